"""Curves, their lengths, and internally scaled lengths.

All curves are parameterized by ``s`` in ``[0, 1]`` and return full
coordinates ``(t, x1, ..., xd)``.  Piecewise-linear curves expose one smooth
piece per segment so quadrature never straddles a kink.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DivergenceError, DomainError, SingularityError, SpecParseError
from .fields import (EXP_GUARD, Point, ThetaField, VectorField, _pad, guarded_exp,
                     scaling_factor)
from .geometry import LIGHTLIKE_TOL, Euclidean, Metric
from .quadrature import DEFAULT, QuadratureConfig, adaptive_simpson

__all__ = [
    "Curve", "Segment", "Polyline", "PolynomialCurve", "SampledCurve", "ScaledLength",
    "curve_length", "curve_length_scaled", "curve_length_scaled_path",
    "transfer_length", "parse_curve",
]


class _Linear:
    """Straight piece between ``p0`` (at ``s0``) and ``p1`` (at ``s1``)."""

    def __init__(self, s0, s1, p0, p1):
        self.s0, self.s1 = float(s0), float(s1)
        self.p0 = np.asarray(p0, dtype=float)
        self.p1 = np.asarray(p1, dtype=float)
        self.slope = (self.p1 - self.p0) / (self.s1 - self.s0)

    def position(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.p0 + (s - self.s0)[:, None] * self.slope

    def derivative(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.broadcast_to(self.slope, (s.size, self.slope.size)).copy()


class Curve:
    """Base class.  ``pieces()`` returns smooth pieces covering ``[0, 1]``."""

    def position(self, s) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, s) -> np.ndarray:
        raise NotImplementedError

    def pieces(self) -> list:
        return [_Whole(self)]

    @property
    def start(self) -> Point:
        return Point.from_coords(self.position(0.0)[0])

    @property
    def end(self) -> Point:
        return Point.from_coords(self.position(1.0)[0])

    @property
    def ncoords(self) -> int:
        return self.position(0.0).shape[1]

    def point(self, s: float) -> Point:
        return Point.from_coords(self.position(s)[0])


class _Whole:
    def __init__(self, curve):
        self.curve, self.s0, self.s1 = curve, 0.0, 1.0

    def position(self, s):
        return self.curve.position(s)

    def derivative(self, s):
        return self.curve.derivative(s)


class Segment(Curve):
    def __init__(self, frm: Point, to: Point):
        a, b = frm.coords, to.coords
        d = max(a.size, b.size)
        self._piece = _Linear(0.0, 1.0, _pad(a, d), _pad(b, d))

    def position(self, s):
        return self._piece.position(s)

    def derivative(self, s):
        return self._piece.derivative(s)

    def pieces(self):
        return [self._piece]


class SampledCurve(Curve):
    """Linear interpolation of ``points`` at parameters ``s_grid``."""

    def __init__(self, s_grid: Sequence[float], points):
        s = np.asarray(s_grid, dtype=float)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if s.ndim != 1 or s.size < 2 or pts.shape[0] != s.size:
            raise DomainError("sampled curve needs >= 2 points matching its s-grid")
        if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise DomainError("s-grid must increase strictly from 0 to 1")
        self.s, self.points = s, pts
        self._pieces = [_Linear(s[i], s[i + 1], pts[i], pts[i + 1]) for i in range(s.size - 1)]

    def _index(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return s, np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.s.size - 2)

    def position(self, s):
        s, i = self._index(s)
        w = ((s - self.s[i]) / (self.s[i + 1] - self.s[i]))[:, None]
        return (1 - w) * self.points[i] + w * self.points[i + 1]

    def derivative(self, s):
        s, i = self._index(s)
        return (self.points[i + 1] - self.points[i]) / (self.s[i + 1] - self.s[i])[:, None]

    def pieces(self):
        return self._pieces


class Polyline(SampledCurve):
    """Vertices joined by straight segments, one per equal share of ``s``."""

    def __init__(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] < 2:
            raise DomainError("polyline needs at least two points")
        super().__init__(np.linspace(0.0, 1.0, pts.shape[0]), pts)

    @classmethod
    def from_points(cls, points: Sequence[Point]) -> "Polyline":
        d = max(p.coords.size for p in points)
        return cls([_pad(p.coords, d) for p in points])


class PolynomialCurve(Curve):
    """Each coordinate is a polynomial in ``s`` (ascending coefficients)."""

    def __init__(self, coeffs: Sequence[Sequence[float]]):
        if not coeffs:
            raise DomainError("polynomial curve needs at least one coordinate")
        n = max(len(c) for c in coeffs)
        self.coeffs = np.array([list(c) + [0.0] * (n - len(c)) for c in coeffs], dtype=float)
        self.dcoeffs = np.array([np.polynomial.polynomial.polyder(c) if n > 1 else [0.0]
                                 for c in self.coeffs])

    def position(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.polynomial.polynomial.polyval(s, self.coeffs.T).T

    def derivative(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.polynomial.polynomial.polyval(s, self.dcoeffs.T).T


@dataclass(frozen=True)
class ScaledLength:
    """A length expressed in the number structure at ``ref``."""

    value: float
    ref: Point
    theta_id: str = ""
    clipped: bool = False


def _speed_fn(metric: Metric, interval: str):
    if interval not in ("proper-time", "proper-length"):
        raise DomainError(f"interval must be 'proper-time' or 'proper-length', not {interval!r}")
    sign = 1.0 if (interval == "proper-time" or not metric.lorentzian) else -1.0

    def speed(c, v):
        q = sign * metric.speed2(c, v)
        if np.any(q < -LIGHTLIKE_TOL):
            if metric.lorentzian:
                hint = "proper-length" if interval == "proper-time" else "proper-time"
                raise DomainError(
                    f"tangent has the wrong causal sign for {interval}; "
                    f"use interval='{hint}' (mixed-sign curves are not supported)")
            raise DomainError("metric is not positive along the curve")
        return np.sqrt(np.maximum(q, 0.0))
    return speed


def curve_length(curve: Curve, metric: Metric | None = None, quad: QuadratureConfig = DEFAULT,
                 interval: str = "proper-time") -> float:
    """Unscaled length ``integral |gamma'(s)| ds``."""
    metric = metric or Euclidean(curve.ncoords - 1)
    speed = _speed_fn(metric, interval)
    parts = []
    for piece in curve.pieces():
        def f(s, piece=piece):
            return speed(piece.position(s), piece.derivative(s))
        parts.append(adaptive_simpson(f, piece.s0, piece.s1, quad))
    return math.fsum(parts)


def _endpoint_clip(curve: Curve, theta: ThetaField, eps: float) -> tuple[float, float]:
    lo, hi = 0.0, 1.0
    for s, attr in ((0.0, "lo"), (1.0, "hi")):
        try:
            theta.value(curve.position(s))
        except SingularityError:
            if attr == "lo":
                lo = eps
            else:
                hi = 1.0 - eps
    return lo, hi


def _largest_finite_partial(integrate_to, lo: float, hi: float, iters: int = 60) -> float:
    """Largest value of ``integrate_to(u)`` over ``u`` in ``[lo, hi]`` that does
    not trip the divergence guard (bisection on ``u``)."""
    good, bad, best = lo, hi, 0.0
    for _ in range(iters):
        mid = 0.5 * (good + bad)
        try:
            best = integrate_to(mid)
            good = mid
        except DivergenceError:
            bad = mid
        if bad - good <= 1e-15 * max(1.0, abs(bad)):
            break
    return best


def curve_length_scaled(curve: Curve, metric: Metric | None, theta: ThetaField, ref: Point,
                        quad: QuadratureConfig = DEFAULT, interval: str = "proper-time",
                        upper: float = 1.0) -> ScaledLength:
    """``integral exp(theta(gamma(s)) - theta(ref)) |gamma'(s)| ds`` over ``[0, upper]``.

    A singular endpoint is clipped by ``quad.singularity_clip`` and reported
    via ``clipped``.  If the integrand overflows, :class:`DivergenceError` is
    raised with the largest finite partial length attached.
    """
    metric = metric or Euclidean(curve.ncoords - 1)
    speed = _speed_fn(metric, interval)
    theta_ref = theta.value(ref)
    lo, hi = _endpoint_clip(curve, theta, quad.singularity_clip)
    hi = min(hi, upper)
    clipped = lo > 0.0 or hi < upper

    def integrand_for(piece):
        def f(s):
            c = piece.position(s)
            e = theta.value(c) - theta_ref
            return guarded_exp(e) * speed(c, piece.derivative(s))
        return f

    def integrate_to(u):
        parts = []
        for piece in curve.pieces():
            a, b = max(piece.s0, lo), min(piece.s1, u)
            if b > a:
                parts.append(adaptive_simpson(integrand_for(piece), a, b, quad))
        return math.fsum(parts)

    try:
        value = integrate_to(hi)
    except DivergenceError as exc:
        partial = _largest_finite_partial(integrate_to, lo, hi)
        raise DivergenceError(f"scaled length diverges: {exc}", partial=partial) from exc
    return ScaledLength(value, ref, theta.spec, clipped)


def curve_length_scaled_path(curve: Curve, field: VectorField, quad: QuadratureConfig = DEFAULT,
                             metric: Metric | None = None) -> ScaledLength:
    """Length with factors from the running line integral of ``field``.

    The factor at ``s`` is ``exp(integral_0^s A . gamma' du)``, so the
    reference is ``gamma(0)``.  Both integrals are advanced together with an
    8th-order Runge-Kutta (DOP853) integrator, piece by piece.
    """
    metric = metric or Euclidean(curve.ncoords - 1)
    speed = _speed_fn(metric, "proper-time")
    state = np.zeros(2)
    for piece in curve.pieces():
        def rhs(s, y, piece=piece):
            c = piece.position(s)
            v = piece.derivative(s)
            a = field(c)[0]
            dI = float(a @ _pad(v[0, 1:], a.size))
            if y[0] > EXP_GUARD:
                raise DivergenceError(f"path scaling exponent {y[0]:.6g} exceeds guard",
                                      partial=float(y[1]))
            return [dI, math.exp(y[0]) * float(speed(c, v)[0])]
        sol = solve_ivp(rhs, (piece.s0, piece.s1), state, method="DOP853",
                        rtol=quad.rel_tol, atol=quad.abs_tol)
        if not sol.success:
            raise ConvergenceError(f"path-scaled length integration failed: {sol.message}",
                                   best=float(state[1]))
        state = sol.y[:, -1]
    return ScaledLength(float(state[1]), curve.start, field.spec)


def transfer_length(length: ScaledLength, theta: ThetaField, to: Point) -> ScaledLength:
    """Re-express a scaled length at reference ``to`` (external scaling)."""
    factor = scaling_factor(theta, length.ref, to)
    return replace(length, value=length.value * factor, ref=to)


# --- spec grammar -----------------------------------------------------------

def _nums(text, token):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise SpecParseError(f"expected numbers in {token!r}", token=token) from None


def _read_points(path: str) -> np.ndarray:
    rows = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if rows:
                        raise SpecParseError(f"bad row in {path}: {row}", token=",".join(row))
    except OSError as exc:
        raise SpecParseError(f"cannot read {path!r}: {exc}", token=path) from exc
    if len(rows) < 2 or len({len(r) for r in rows}) != 1:
        raise SpecParseError(f"{path} needs >= 2 rows of equal length", token=path)
    return np.array(rows)


def parse_curve(spec: str) -> Curve:
    """``segment:<p>,<q>`` (or ``<p>;<q>``), ``polyline:@<csv>``, ``poly:<c0,c1..>;<...>``.

    Points are time-first.  With commas only, a segment's numbers are split
    evenly between its two endpoints.
    """
    kind, sep, body = spec.partition(":")
    if not sep:
        raise SpecParseError(f"curve spec {spec!r} lacks '<kind>:'", token=spec)
    if kind == "segment":
        if ";" in body:
            a_txt, _, b_txt = body.partition(";")
            a, b = _nums(a_txt, spec), _nums(b_txt, spec)
        else:
            vals = _nums(body, spec)
            if len(vals) < 4 or len(vals) % 2:
                raise SpecParseError(
                    f"segment needs two points of equal dimension (t first): {spec!r}", token=body)
            a, b = vals[: len(vals) // 2], vals[len(vals) // 2:]
        if len(a) < 2 or len(b) < 2:
            raise SpecParseError(f"segment endpoints need t and x: {spec!r}", token=body)
        return Segment(Point.from_coords(a), Point.from_coords(b))
    if kind == "polyline":
        if not body.startswith("@"):
            raise SpecParseError("polyline spec is 'polyline:@<csv file>'", token=body)
        return Polyline(_read_points(body[1:]))
    if kind == "poly":
        coeffs = [_nums(part, spec) for part in body.split(";")]
        if len(coeffs) < 2 or any(not c for c in coeffs):
            raise SpecParseError(f"poly curve needs coefficient lists for t and x: {spec!r}",
                                 token=body)
        return PolynomialCurve(coeffs)
    raise SpecParseError(f"unknown curve kind {kind!r}", token=kind)
