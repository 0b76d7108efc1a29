"""Line elements and metric tensors, unscaled and scaled.

A metric acts on a subset of the full ``(t, x1, ..., xd)`` coordinates:

* ``euclidean(d)`` on ``x1..xd``
* ``minkowski(d)`` on ``t, x1..xd`` with signature ``(+, -, ..., -)``
* ``frw(k, a)`` on ``(t, r, Omega)``, i.e. ``t, x1, x2``

Displacements passed to :func:`line_element` are expressed in the metric's
own coordinates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, SpecParseError
from .fields import Point, ThetaField, scaling_factor

__all__ = [
    "Metric", "Euclidean", "Minkowski", "FRW", "GeneralMetric", "CausalClass",
    "LineElementResult", "line_element", "scaled_line_element",
    "scaled_metric_tensor", "causal_class", "line_element_parts", "parse_metric",
    "LIGHTLIKE_TOL",
]

LIGHTLIKE_TOL = 1e-14


class CausalClass(str, enum.Enum):
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"
    SPACELIKE = "spacelike"
    EUCLIDEAN = "euclidean"

    def __str__(self):
        return self.value


class Metric:
    """Base metric.  ``dim`` is the number of coordinates the metric acts on."""

    lorentzian = False
    riemannian = True
    spec = "?"

    def select(self, coords: np.ndarray) -> np.ndarray:
        """Pick this metric's components from ``(n, 1 + d)`` coordinates."""
        raise NotImplementedError

    def tensor_batch(self, coords: np.ndarray) -> np.ndarray:
        """``(n, dim, dim)`` tensors at each coordinate row."""
        raise NotImplementedError

    def tensor(self, at: Point) -> np.ndarray:
        return self.tensor_batch(at.coords[None, :])[0]

    def speed2(self, coords: np.ndarray, tangent: np.ndarray) -> np.ndarray:
        """``g(v, v)`` for full-coordinate tangents ``v``, row by row."""
        v = self.select(tangent)
        g = self.tensor_batch(coords)
        return np.einsum("ni,nij,nj->n", v, g, v)

    def _need(self, coords, n):
        if coords.shape[1] < n:
            raise DomainError(
                f"{self.spec} needs {n} coordinates (t first), got {coords.shape[1]}")

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec}>"


class Euclidean(Metric):
    def __init__(self, d: int = 3):
        if not 1 <= int(d) <= 3:
            raise DomainError("euclidean dimension must be 1..3")
        self.dim = int(d)
        self.spec = f"euclidean:{self.dim}"

    def select(self, coords):
        coords = np.atleast_2d(coords)
        self._need(coords, self.dim + 1)
        return coords[:, 1:1 + self.dim]

    def tensor_batch(self, coords):
        n = np.atleast_2d(coords).shape[0]
        return np.broadcast_to(np.eye(self.dim), (n, self.dim, self.dim)).copy()

    def speed2(self, coords, tangent):
        v = self.select(tangent)
        return np.einsum("ni,ni->n", v, v)


class Minkowski(Metric):
    lorentzian = True
    riemannian = False

    def __init__(self, d: int = 3, c: float = 1.0):
        if not 1 <= int(d) <= 3:
            raise DomainError("minkowski spatial dimension must be 1..3")
        if not c > 0:
            raise DomainError("speed of light must be positive")
        self.d, self.c = int(d), float(c)
        self.dim = self.d + 1
        self.spec = f"minkowski:{self.d}"

    def select(self, coords):
        coords = np.atleast_2d(coords)
        self._need(coords, self.dim)
        return coords[:, :self.dim]

    def eta(self) -> np.ndarray:
        return np.diag([self.c ** 2] + [-1.0] * self.d)

    def tensor_batch(self, coords):
        n = np.atleast_2d(coords).shape[0]
        return np.broadcast_to(self.eta(), (n, self.dim, self.dim)).copy()


class FRW(Metric):
    """``c^2 dt^2 - a(t)^2 (dr^2 / (1 - k r^2) + r^2 dOmega^2)``."""

    lorentzian = True
    riemannian = False
    dim = 3

    def __init__(self, k: float = 0.0, a: Callable[[np.ndarray], np.ndarray] | float = 1.0,
                 c: float = 1.0, a_spec: str | None = None):
        self.k, self.c = float(k), float(c)
        if callable(a):
            self.a = a
        else:
            const = float(a)
            self.a = lambda t, const=const: np.full(np.shape(t), const)
        self.spec = f"frw:{self.k:g};a={a_spec if a_spec else (a if not callable(a) else 'fn')}"

    def select(self, coords):
        coords = np.atleast_2d(coords)
        self._need(coords, 3)
        return coords[:, :3]

    def _parts(self, coords):
        coords = np.atleast_2d(coords)
        self._need(coords, 3)
        t, r = coords[:, 0], coords[:, 1]
        denom = 1.0 - self.k * r ** 2
        if np.any(denom <= 0):
            raise DomainError(f"FRW coordinate r outside chart: 1 - k r^2 <= 0 (k={self.k:g})")
        a2 = np.asarray(self.a(t), dtype=float) ** 2
        return a2, denom, r

    def tensor_batch(self, coords):
        a2, denom, r = self._parts(coords)
        n = a2.size
        g = np.zeros((n, 3, 3))
        g[:, 0, 0] = self.c ** 2
        g[:, 1, 1] = -a2 / denom
        g[:, 2, 2] = -a2 * r ** 2
        return g


class GeneralMetric(Metric):
    """Metric given by a callable ``g(coords) -> (dim, dim)`` on the first
    ``dim`` spatial coordinates (``riemannian=True``) or on ``t, x``."""

    def __init__(self, g: Callable[[np.ndarray], np.ndarray], dim: int,
                 riemannian: bool = True, spec: str = "general"):
        self.g, self.dim = g, int(dim)
        self.riemannian = riemannian
        self.lorentzian = not riemannian
        self.spec = spec

    def select(self, coords):
        coords = np.atleast_2d(coords)
        if self.riemannian:
            self._need(coords, self.dim + 1)
            return coords[:, 1:1 + self.dim]
        self._need(coords, self.dim)
        return coords[:, :self.dim]

    def tensor_batch(self, coords):
        coords = np.atleast_2d(coords)
        out = np.array([np.asarray(self.g(row), dtype=float) for row in coords])
        if out.shape[1:] != (self.dim, self.dim):
            raise DomainError(f"general metric returned shape {out.shape[1:]}")
        return 0.5 * (out + np.swapaxes(out, 1, 2))


@dataclass(frozen=True)
class LineElementResult:
    unscaled: float
    scaled: float
    factor: float
    causal_class: CausalClass


def _disp(metric: Metric, disp) -> np.ndarray:
    v = np.atleast_1d(np.asarray(disp, dtype=float))
    if v.size != metric.dim:
        raise DomainError(f"{metric.spec} expects a displacement of length {metric.dim}, got {v.size}")
    return v


def line_element(metric: Metric, at: Point, disp) -> float:
    """``ds^2 = g_{mu nu}(at) dx^mu dx^nu``."""
    v = _disp(metric, disp)
    return float(v @ metric.tensor(at) @ v)


def line_element_parts(metric: Metric, at: Point, disp) -> tuple[float, float]:
    """Split a Lorentzian ``ds^2`` into its time part and (negative) space part."""
    if not metric.lorentzian:
        raise DomainError("time/space split needs a Lorentzian metric")
    v = _disp(metric, disp)
    g = metric.tensor(at)
    time = float(g[0, 0] * v[0] ** 2)
    return time, float(v @ g @ v) - time


def causal_class(ds2: float, metric: Metric | str) -> CausalClass:
    lorentzian = metric.lorentzian if isinstance(metric, Metric) else (
        str(metric).split(":")[0] in ("minkowski", "frw"))
    if not lorentzian:
        return CausalClass.EUCLIDEAN
    if abs(ds2) <= LIGHTLIKE_TOL:
        return CausalClass.LIGHTLIKE
    return CausalClass.TIMELIKE if ds2 > 0 else CausalClass.SPACELIKE


def scaled_line_element(metric: Metric, theta: ThetaField, at: Point, disp,
                        ref: Point) -> LineElementResult:
    """``ds^2`` at ``at`` as seen from ``ref``: one factor ``exp(theta(at) - theta(ref))``."""
    unscaled = line_element(metric, at, disp)
    factor = scaling_factor(theta, at, ref)
    scaled = factor * unscaled
    cls = causal_class(unscaled, metric)
    return LineElementResult(unscaled, scaled, factor, cls)


def scaled_metric_tensor(metric: Metric, theta: ThetaField, at: Point, ref: Point) -> np.ndarray:
    return scaling_factor(theta, at, ref) * metric.tensor(at)


def _poly_a(coeffs):
    c = np.asarray(coeffs, dtype=float)
    return lambda t: np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), c)


def parse_metric(spec: str) -> Metric:
    """``euclidean:<d>``, ``minkowski:<d>`` or ``frw:<k>;a=<c | poly:c0,c1,...>``."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise SpecParseError(f"metric spec {spec!r} lacks '<kind>:'", token=spec)
    try:
        if kind == "euclidean":
            return Euclidean(int(body))
        if kind == "minkowski":
            return Minkowski(int(body))
        if kind == "frw":
            k_txt, _, rest = body.partition(";")
            k = float(k_txt)
            a_spec = "1"
            if rest:
                key, eq, a_spec = rest.partition("=")
                if key.strip() != "a" or not eq:
                    raise SpecParseError(f"expected 'a=' in {spec!r}", token=rest)
            if a_spec.startswith("poly:"):
                coeffs = [float(v) for v in a_spec[5:].split(",")]
                return FRW(k, _poly_a(coeffs), a_spec=a_spec)
            return FRW(k, float(a_spec), a_spec=a_spec)
    except SpecParseError:
        raise
    except (ValueError, DomainError) as exc:
        raise SpecParseError(f"malformed metric spec {spec!r}: {exc}", token=spec) from exc
    raise SpecParseError(f"unknown metric kind {kind!r}", token=kind)
