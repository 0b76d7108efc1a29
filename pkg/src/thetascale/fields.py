"""Theta fields, their gradients, and the scaling factors they induce.

Points are handled in two forms.  :class:`Point` is the user-facing value
(time ``t`` and spatial vector ``x``).  Internally, batches of points are
``(n, 1 + d)`` coordinate arrays with time in column 0; every field method
works on such arrays so quadrature can evaluate whole node sets at once.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DivergenceError, DomainError, SingularityError, SpecParseError
from .quadrature import DEFAULT, QuadratureConfig, integrate_pieces

__all__ = [
    "Point", "ThetaField", "ConstantTheta", "LinearTheta", "RadialTheta",
    "TimeLinearTheta", "TimeQuadraticTheta", "TabulatedTheta", "VectorField",
    "EXP_GUARD", "scaling_factor", "path_scaling_factor", "retarded_time",
    "lightcone_scaling", "parse_theta", "parse_vector_field", "parse_point",
    "guarded_exp",
]

# Largest exponent allowed before exp() is treated as divergent.
EXP_GUARD = 700.0


@dataclass(frozen=True, eq=False)
class Point:
    """A spacetime point: time ``t`` and spatial coordinates ``x``."""

    t: float
    x: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        xs = tuple(float(v) for v in np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "x", xs)
        if not all(math.isfinite(v) for v in (self.t, *xs)):
            raise DomainError(f"non-finite coordinate in {self!r}")

    @classmethod
    def from_coords(cls, coords: Sequence[float]) -> "Point":
        c = [float(v) for v in coords]
        return cls(c[0], tuple(c[1:]))

    @classmethod
    def spatial(cls, *x: float, t: float = 0.0) -> "Point":
        return cls(t, tuple(x))

    @property
    def coords(self) -> np.ndarray:
        return np.array((self.t, *self.x))

    @property
    def dim(self) -> int:
        return len(self.x)

    def __eq__(self, other):
        return isinstance(other, Point) and self.t == other.t and self.x == other.x

    def __hash__(self):
        return hash((self.t, self.x))

    def __repr__(self):
        return f"Point(t={self.t!r}, x={self.x!r})"


def _as_batch(coords) -> np.ndarray:
    arr = np.asarray(coords, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _pad(v: np.ndarray, d: int) -> np.ndarray:
    """Zero-pad or truncate the trailing axis of ``v`` to length ``d``."""
    if v.shape[-1] == d:
        return v
    if v.shape[-1] > d:
        return v[..., :d]
    pad = np.zeros(v.shape[:-1] + (d - v.shape[-1],))
    return np.concatenate([v, pad], axis=-1)


class ThetaField:
    """Base class for scalar fields.

    Subclasses implement ``_value(c)``, ``_grad(c)`` and ``_dt(c)`` on
    coordinate batches ``c`` of shape ``(n, 1 + d)``.  ``_grad`` returns the
    spatial gradient (the ``A`` field) with shape ``(n, d)``.
    """

    time_only = False
    spec = "?"

    def value(self, p) -> float | np.ndarray:
        if isinstance(p, Point):
            return float(self._value(p.coords[None, :])[0])
        return self._value(_as_batch(p))

    def gradient(self, p) -> np.ndarray:
        if isinstance(p, Point):
            return self._grad(p.coords[None, :])[0]
        return self._grad(_as_batch(p))

    def time_derivative(self, p) -> float | np.ndarray:
        if isinstance(p, Point):
            return float(self._dt(p.coords[None, :])[0])
        return self._dt(_as_batch(p))

    def shifted(self, c: float) -> "ThetaField":
        """This field plus the constant ``c``."""
        return _Shifted(self, c)

    def _dt(self, c):
        return np.zeros(c.shape[0])

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec}>"


class ConstantTheta(ThetaField):
    time_only = True

    def __init__(self, c: float = 0.0):
        self.c = float(c)
        self.spec = f"constant:{self.c:g}"

    def _value(self, c):
        return np.full(c.shape[0], self.c)

    def _grad(self, c):
        return np.zeros((c.shape[0], c.shape[1] - 1))


class LinearTheta(ThetaField):
    """``a . x + b`` over the spatial coordinates."""

    def __init__(self, a: Sequence[float], b: float = 0.0):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.b = float(b)
        self.spec = f"linear:{','.join(f'{v:g}' for v in self.a)};{self.b:g}"

    def _value(self, c):
        x = c[:, 1:]
        return _pad(x, self.a.size) @ self.a + self.b

    def _grad(self, c):
        d = c.shape[1] - 1
        return np.broadcast_to(_pad(self.a, d), (c.shape[0], d)).copy()


class RadialTheta(ThetaField):
    """``K / |x - x0|``; singular at ``x0``."""

    def __init__(self, K: float, center: Sequence[float]):
        self.K = float(K)
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.spec = f"radial:{self.K:g}@{','.join(f'{v:g}' for v in self.center)}"

    def _offset(self, c):
        dim = max(c.shape[1] - 1, self.center.size)
        rel = _pad(c[:, 1:], dim) - _pad(self.center, dim)
        r = np.sqrt(np.einsum("ij,ij->i", rel, rel))
        if np.any(r == 0):
            raise SingularityError(
                f"radial field evaluated at its center {tuple(self.center)}")
        return rel, r

    def _value(self, c):
        _, r = self._offset(c)
        return self.K / r

    def _grad(self, c):
        d = c.shape[1] - 1
        rel, r = self._offset(c)
        g = -self.K * rel / (r ** 3)[:, None]
        return g[:, :d]


class TimeLinearTheta(ThetaField):
    """``k (t - t_ref)``."""

    time_only = True

    def __init__(self, k: float, t_ref: float = 0.0):
        self.k, self.t_ref = float(k), float(t_ref)
        self.spec = f"time-linear:{self.k:g}@{self.t_ref:g}"

    def _value(self, c):
        return self.k * (c[:, 0] - self.t_ref)

    def _grad(self, c):
        return np.zeros((c.shape[0], c.shape[1] - 1))

    def _dt(self, c):
        return np.full(c.shape[0], self.k)


class TimeQuadraticTheta(ThetaField):
    """``k (t**2 - t_ref**2) / 2``."""

    time_only = True

    def __init__(self, k: float, t_ref: float = 0.0):
        self.k, self.t_ref = float(k), float(t_ref)
        self.spec = f"time-quadratic:{self.k:g}@{self.t_ref:g}"

    def _value(self, c):
        return 0.5 * self.k * (c[:, 0] ** 2 - self.t_ref ** 2)

    def _grad(self, c):
        return np.zeros((c.shape[0], c.shape[1] - 1))

    def _dt(self, c):
        return self.k * c[:, 0]


class TabulatedTheta(ThetaField):
    """Theta tabulated along the first spatial axis, linearly interpolated.

    Outside the grid the end values are held constant.  The gradient is the
    central difference with step equal to the local grid spacing.
    """

    def __init__(self, grid: Sequence[float], values: Sequence[float], source: str = "table"):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != values.shape:
            raise DomainError("tabulated theta needs matching 1-D grid and values (>= 2 rows)")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("tabulated theta grid must be strictly increasing")
        self.grid, self.values = grid, values
        self.spec = f"table:{source}"

    @classmethod
    def from_csv(cls, path: str) -> "TabulatedTheta":
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise SpecParseError(f"bad row in {path}: {row}", token=",".join(row))
                    # header line
        if not rows:
            raise SpecParseError(f"no data rows in {path}", token=path)
        rows.sort()
        g, v = zip(*rows)
        return cls(g, v, source=path)

    def _interp(self, y):
        return np.interp(y, self.grid, self.values)

    def _value(self, c):
        return self._interp(c[:, 1])

    def _grad(self, c):
        y = c[:, 1]
        idx = np.clip(np.searchsorted(self.grid, y) - 1, 0, self.grid.size - 2)
        h = self.grid[idx + 1] - self.grid[idx]
        g = (self._interp(y + h) - self._interp(y - h)) / (2 * h)
        out = np.zeros((c.shape[0], c.shape[1] - 1))
        out[:, 0] = g
        return out


class _Shifted(ThetaField):
    def __init__(self, base: ThetaField, c: float):
        self.base, self.c = base, float(c)
        self.time_only = base.time_only
        self.spec = f"{base.spec}+{self.c:g}"

    def _value(self, c):
        return self.base._value(c) + self.c

    def _grad(self, c):
        return self.base._grad(c)

    def _dt(self, c):
        return self.base._dt(c)


class VectorField:
    """An ``A`` field: either the gradient of a theta field or a custom callable.

    A custom ``func`` maps a spatial position (1-D array) to a vector of the
    same length.
    """

    def __init__(self, theta: ThetaField | None = None, func: Callable | None = None,
                 spec: str = "custom"):
        if (theta is None) == (func is None):
            raise DomainError("VectorField needs exactly one of theta or func")
        self.theta, self.func = theta, func
        self.spec = f"grad:{theta.spec}" if theta is not None else spec

    @classmethod
    def gradient_of(cls, theta: ThetaField) -> "VectorField":
        return cls(theta=theta)

    @classmethod
    def rotational(cls, omega: float = 1.0) -> "VectorField":
        """``omega * (-x2, x1, 0, ...)``; curl-ful, so path dependent."""
        def func(x):
            out = np.zeros_like(x)
            out[0], out[1] = -omega * x[1], omega * x[0]
            return out
        return cls(func=func, spec=f"rotational:{omega:g}")

    @property
    def is_gradient(self) -> bool:
        return self.theta is not None

    def __call__(self, coords) -> np.ndarray:
        c = _as_batch(coords)
        if self.theta is not None:
            return self.theta.gradient(c)
        x = c[:, 1:]
        if x.shape[1] < 2:
            x = _pad(x, 2)
        out = np.array([np.asarray(self.func(row), dtype=float) for row in x])
        return out[:, : c.shape[1] - 1]


def guarded_exp(exponent, what="scaling exponent") -> np.ndarray:
    """``exp`` that raises on overflow; large negative exponents underflow to 0."""
    e = np.asarray(exponent, dtype=float)
    if np.any(e > EXP_GUARD):
        raise DivergenceError(f"{what} {float(np.max(e)):.6g} exceeds guard {EXP_GUARD:g}")
    return np.exp(e)


def scaling_factor(theta: ThetaField, to: Point, frm: Point) -> float:
    """``exp(theta(to) - theta(frm))``."""
    e = theta.value(to) - theta.value(frm)
    if abs(e) > EXP_GUARD:
        raise DivergenceError(f"scaling exponent {e:.6g} exceeds guard {EXP_GUARD:g}")
    return math.exp(e)


def path_scaling_factor(field: VectorField, path, quad: QuadratureConfig = DEFAULT) -> float:
    """``exp`` of the line integral of ``field`` along ``path``."""
    e = line_integral(field, path, quad)
    if abs(e) > EXP_GUARD:
        raise DivergenceError(f"path scaling exponent {e:.6g} exceeds guard {EXP_GUARD:g}")
    return math.exp(e)


def line_integral(field: VectorField, path, quad: QuadratureConfig = DEFAULT) -> float:
    """``integral of A(gamma(s)) . gamma'(s) ds`` over ``s`` in ``[0, 1]``."""
    total = []
    for piece in path.pieces():
        def integrand(s, piece=piece):
            c = piece.position(s)
            dx = piece.derivative(s)[:, 1:]
            a = field(c)
            return np.einsum("ij,ij->i", a, _pad(dx, a.shape[1]))
        total.append(integrate_pieces(integrand, [piece.s0, piece.s1], quad))
    return math.fsum(total)


def retarded_time(observer: Point, event_position: Sequence[float], c: float = 1.0) -> float:
    """Time of the event on the observer's past light cone."""
    if not c > 0:
        raise DomainError("speed of light must be positive")
    ev = np.atleast_1d(np.asarray(event_position, dtype=float))
    obs = np.asarray(observer.x, dtype=float)
    d = max(ev.size, obs.size)
    return observer.t - float(np.linalg.norm(_pad(ev, d) - _pad(obs, d))) / c


def lightcone_scaling(theta: ThetaField, observer: Point, event_position: Sequence[float],
                      c: float = 1.0) -> float:
    """Scaling factor from the observer to an event on its past light cone.

    ``theta`` must depend on time only.  The factor is normalised so that the
    observer itself has factor 1.
    """
    if not theta.time_only:
        raise DomainError("lightcone_scaling requires a time-only theta field")
    t_event = retarded_time(observer, event_position, c)
    event = Point(t_event, tuple(np.atleast_1d(np.asarray(event_position, dtype=float))))
    return scaling_factor(theta, event, observer)


# --- spec grammar -----------------------------------------------------------

def _floats(text: str, token: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise SpecParseError(f"expected comma-separated numbers in {token!r}", token=token) from None


def parse_point(text: str) -> Point:
    """``t,x1[,x2[,x3]]`` with time first."""
    vals = _floats(text, text)
    if not vals:
        raise SpecParseError(f"empty point {text!r}", token=text)
    return Point.from_coords(vals)


def parse_theta(spec: str) -> ThetaField:
    """Parse ``constant:``, ``linear:``, ``radial:``, ``time-linear:``,
    ``time-quadratic:`` or ``table:`` field specs."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise SpecParseError(f"theta spec {spec!r} lacks '<kind>:'", token=spec)
    kind = kind.strip()
    try:
        if kind == "constant":
            (c,) = _floats(body, spec)
            return ConstantTheta(c)
        if kind == "linear":
            a_txt, _, b_txt = body.partition(";")
            a = _floats(a_txt, spec)
            b = _floats(b_txt, spec)[0] if b_txt.strip() else 0.0
            if not a:
                raise SpecParseError(f"linear theta needs a coefficient vector: {spec!r}", token=spec)
            return LinearTheta(a, b)
        if kind == "radial":
            k_txt, at, c_txt = body.partition("@")
            if not at:
                raise SpecParseError(f"radial theta needs '@<center>': {spec!r}", token=spec)
            (K,) = _floats(k_txt, spec)
            return RadialTheta(K, _floats(c_txt, spec))
        if kind in ("time-linear", "time-quadratic"):
            k_txt, _, t_txt = body.partition("@")
            (k,) = _floats(k_txt, spec)
            t_ref = _floats(t_txt, spec)[0] if t_txt.strip() else 0.0
            cls = TimeLinearTheta if kind == "time-linear" else TimeQuadraticTheta
            return cls(k, t_ref)
        if kind == "table":
            try:
                return TabulatedTheta.from_csv(body)
            except OSError as exc:
                raise SpecParseError(f"cannot read theta table {body!r}: {exc}", token=body) from exc
    except ValueError as exc:
        if isinstance(exc, SpecParseError):
            raise
        raise SpecParseError(f"malformed theta spec {spec!r}", token=spec) from exc
    raise SpecParseError(f"unknown theta kind {kind!r}", token=kind)


def parse_vector_field(spec: str) -> VectorField:
    """``grad:<theta spec>``, ``rotational:<omega>``, or a bare theta spec
    (taken as its gradient)."""
    kind, sep, body = spec.partition(":")
    if kind == "grad":
        return VectorField.gradient_of(parse_theta(body))
    if kind == "rotational":
        vals = _floats(body, spec) if body.strip() else [1.0]
        if len(vals) != 1:
            raise SpecParseError(f"rotational field takes one number: {spec!r}", token=spec)
        return VectorField.rotational(vals[0])
    return VectorField.gradient_of(parse_theta(spec))
