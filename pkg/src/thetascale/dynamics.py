"""Classical motion with a theta-weighted action, and covariant derivatives.

The action is ``S = integral exp(theta(t, x) - theta(ref)) L(x, v) dt``.  Its
Euler-Lagrange equation for ``L = m |v|^2 / 2 - V(x)`` solves to::

    a = A (|v|^2 / 2 - V / m) - (A . v + d_t theta) v - grad V / m

with ``A`` the spatial gradient of theta.  A constant shift of theta drops
out, as does the reference point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .curves import Curve
from .errors import DomainError, SingularityError, SpecParseError, StencilError
from .fields import Point, ThetaField, _pad, guarded_exp
from .quadrature import DEFAULT, QuadratureConfig, adaptive_simpson

__all__ = [
    "Lagrangian", "Trajectory", "scaled_action", "acceleration", "integrate_eom",
    "discrete_action", "discrete_action_residual", "covariant_derivative",
    "SampledFunction", "momentum_apply", "kinetic_apply", "parse_lagrangian",
    "parse_function",
]


class Lagrangian:
    """``L = m |v|^2 / 2 - V(x)``.

    Parameters
    ----------
    m : float
        Mass, positive.
    V : callable, optional
        Potential on ``(n, d)`` positions returning ``(n,)``.  Omitted for a
        free particle.
    grad_V : callable, optional
        Gradient of ``V`` returning ``(n, d)``.  Central differences are used
        when it is missing.
    """

    def __init__(self, m: float = 1.0, V: Callable | None = None,
                 grad_V: Callable | None = None, spec: str | None = None):
        if not (m > 0 and math.isfinite(m)):
            raise DomainError(f"mass must be positive, got {m!r}")
        self.m = float(m)
        self.V, self._grad_V = V, grad_V
        self.spec = spec or (f"free:{self.m:g}" if V is None else "custom")

    @classmethod
    def free(cls, m: float = 1.0) -> "Lagrangian":
        return cls(m)

    @classmethod
    def harmonic(cls, m: float, k: float) -> "Lagrangian":
        """``V = k |x|^2 / 2``."""
        return cls(m, lambda x: 0.5 * k * np.einsum("ij,ij->i", x, x),
                   lambda x: k * x, spec=f"harmonic:{m:g};{k:g}")

    @property
    def is_free(self) -> bool:
        return self.V is None

    def potential(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.V is None:
            return np.zeros(x.shape[0])
        return np.asarray(self.V(x), dtype=float).reshape(x.shape[0])

    def grad_potential(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.V is None:
            return np.zeros_like(x)
        if self._grad_V is not None:
            return np.asarray(self._grad_V(x), dtype=float).reshape(x.shape)
        out = np.empty_like(x)
        for j in range(x.shape[1]):
            h = 1e-5 * np.maximum(1.0, np.abs(x[:, j]))
            xp, xm = x.copy(), x.copy()
            xp[:, j] += h
            xm[:, j] -= h
            out[:, j] = (self.potential(xp) - self.potential(xm)) / (2 * h)
        return out

    def __call__(self, x, v) -> np.ndarray:
        v = np.atleast_2d(v)
        return 0.5 * self.m * np.einsum("ij,ij->i", v, v) - self.potential(x)

    def energy(self, x, v) -> np.ndarray:
        v = np.atleast_2d(v)
        return 0.5 * self.m * np.einsum("ij,ij->i", v, v) + self.potential(x)


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        n = self.times.size
        if self.positions.shape[0] != n or self.velocities.shape != self.positions.shape:
            raise DomainError("trajectory arrays must have matching lengths")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must increase strictly")

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def header(self) -> list[str]:
        d = self.dim
        return ["t"] + [f"x{i}" for i in range(1, d + 1)] + [f"v{i}" for i in range(1, d + 1)]

    def rows(self):
        for t, x, v in zip(self.times, self.positions, self.velocities):
            yield [t, *x, *v]


def _coords(t, x):
    x = np.atleast_2d(x)
    return np.column_stack([np.broadcast_to(np.asarray(t, dtype=float), x.shape[0]), x])


def acceleration(L: Lagrangian, theta: ThetaField, t, x, v) -> np.ndarray:
    """Acceleration solving the theta-weighted Euler-Lagrange equation.

    ``x`` and ``v`` are ``(n, d)`` (or ``(d,)``); ``t`` is scalar or ``(n,)``.
    """
    x, v = np.atleast_2d(x), np.atleast_2d(v)
    c = _coords(t, x)
    A = _pad(theta.gradient(c), x.shape[1])
    dtheta = np.einsum("ij,ij->i", A, v) + theta.time_derivative(c)
    lag_per_m = 0.5 * np.einsum("ij,ij->i", v, v) - L.potential(x) / L.m
    return A * lag_per_m[:, None] - dtheta[:, None] * v - L.grad_potential(x) / L.m


# largest change of theta tolerated across the stages of one step
THETA_STEP_LIMIT = 5.0


def integrate_eom(L: Lagrangian, theta: ThetaField, x0: Sequence[float], v0: Sequence[float],
                  t_end: float, dt: float, t0: float = 0.0) -> Trajectory:
    """Classical fourth-order Runge-Kutta from ``t0`` to ``t_end``.

    The last step is shortened to land on ``t_end`` exactly.  If theta turns
    singular, jumps by more than ``THETA_STEP_LIMIT`` within one step, or the
    state stops being finite, a :class:`SingularityError` carries the
    trajectory up to the last good step in ``partial``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not t_end > t0:
        raise DomainError("t_end must exceed the start time")
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    v = np.atleast_1d(np.asarray(v0, dtype=float))
    d = max(x.size, v.size)
    x, v = _pad(x, d), _pad(v, d)
    n_full = int(math.floor((t_end - t0) / dt * (1 + 1e-12)))
    steps = [dt] * n_full
    rest = (t_end - t0) - n_full * dt
    if rest > 1e-12 * dt:
        steps.append(rest)

    def f(t, y):
        a = acceleration(L, theta, t, y[:d], y[d:])[0]
        return np.concatenate([y[d:], a])

    ts, ys = [t0], [np.concatenate([x, v])]
    t, y = t0, ys[0]
    for k, h in enumerate(steps):
        try:
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(y_new)):
                raise SingularityError("state became non-finite")
            # a step across (or next to) a singular point shows up as a jump
            # in theta that no step of this size can resolve
            stages = np.array([y[:d], y[:d] + h / 2 * k1[:d], y[:d] + h / 2 * k2[:d],
                               y[:d] + h * k3[:d], y_new[:d]])
            th = theta.value(_coords([t, t + h / 2, t + h / 2, t + h, t + h], stages))
            jump = float(np.max(th) - np.min(th))
            if jump > THETA_STEP_LIMIT:
                raise SingularityError(
                    f"theta varies by {jump:.3g} within one step (singular point, or dt too coarse)")
        except SingularityError as exc:
            Y = np.array(ys)
            partial = Trajectory(np.array(ts), Y[:, :d], Y[:, d:])
            raise SingularityError(f"trajectory hit a singularity near t={t:.6g}: {exc}",
                                   partial=partial) from exc
        # t0 + (k+1) dt avoids drift from summing step sizes
        t = t0 + (k + 1) * dt if k < n_full else t_end
        y = y_new
        ts.append(t)
        ys.append(y)
    Y = np.array(ys)
    return Trajectory(np.array(ts), Y[:, :d], Y[:, d:])


def scaled_action(path: Curve, L: Lagrangian, theta: ThetaField, ref: Point,
                  quad: QuadratureConfig = DEFAULT) -> float:
    """``integral exp(theta(gamma) - theta(ref)) L dt`` along a ``(t, x)`` path.

    The path may use any parameter ``s``; velocities are ``x'(s) / t'(s)``
    and the measure is ``t'(s) ds``, so ``t`` must increase along the path.
    """
    theta_ref = theta.value(ref)
    parts = []
    for piece in path.pieces():
        def integrand(s, piece=piece):
            c = piece.position(s)
            dc = piece.derivative(s)
            tdot = dc[:, 0]
            if np.any(tdot <= 0):
                raise DomainError("action path must advance in time (dt/ds > 0)")
            v = dc[:, 1:] / tdot[:, None]
            return guarded_exp(theta.value(c) - theta_ref) * L(c[:, 1:], v) * tdot
        parts.append(adaptive_simpson(integrand, piece.s0, piece.s1, quad))
    return math.fsum(parts)


def discrete_action(times: np.ndarray, positions: np.ndarray, L: Lagrangian,
                    theta: ThetaField, theta_ref: float = 0.0) -> float:
    """Midpoint-rule action of a sampled path."""
    t = np.asarray(times, dtype=float)
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    if x.shape[0] != t.size:
        x = x.T
    h = np.diff(t)
    tm = 0.5 * (t[1:] + t[:-1])
    xm = 0.5 * (x[1:] + x[:-1])
    v = np.diff(x, axis=0) / h[:, None]
    w = guarded_exp(theta.value(_coords(tm, xm)) - theta_ref)
    return math.fsum(h * w * L(xm, v))


def discrete_action_residual(traj: Trajectory, L: Lagrangian, theta: ThetaField) -> float:
    """Largest discrete Euler-Lagrange residual along a trajectory.

    Each interior node is nudged by central differences; the resulting
    action derivative, divided by ``m`` times the local scaling factor and
    step, has units of acceleration and vanishes on exact solutions up to
    ``O(dt^2)``.
    """
    t, x = traj.times, traj.positions
    if t.size < 3:
        raise StencilError("residual needs at least 3 trajectory samples")
    theta_ref = float(theta.value(_coords(t[0], x[0]))[0])
    f = guarded_exp(theta.value(_coords(t, x)) - theta_ref)
    worst = 0.0
    for k in range(1, t.size - 1):
        sl = slice(k - 1, k + 2)
        h_loc = 0.5 * (t[k + 1] - t[k - 1])
        for j in range(x.shape[1]):
            eps = 1e-6 * max(1.0, abs(x[k, j]))
            xp, xm = x[sl].copy(), x[sl].copy()
            xp[1, j] += eps
            xm[1, j] -= eps
            dS = (discrete_action(t[sl], xp, L, theta, theta_ref)
                  - discrete_action(t[sl], xm, L, theta, theta_ref)) / (2 * eps)
            worst = max(worst, abs(dS) / (h_loc * f[k] * L.m))
    return worst


# --- covariant derivative -----------------------------------------------------

@dataclass
class SampledFunction:
    """Real samples ``values`` on a 1-D ``grid`` along spatial axis ``axis``."""

    grid: np.ndarray
    values: np.ndarray
    axis: int = 1

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.shape != self.values.shape or self.grid.ndim != 1:
            raise DomainError("sampled function needs matching 1-D grid and values")
        if np.any(np.diff(self.grid) <= 0):
            raise DomainError("sample grid must increase strictly")


def covariant_derivative(f, theta: ThetaField, at: Point, j: int = 1,
                         df: Callable | None = None) -> float:
    """``d_j f + (d_j theta) f`` at ``at``; ``j`` counts spatial axes from 1.

    ``f`` is a :class:`SampledFunction` (central differences, linearly
    interpolated to ``at``) or a callable on full coordinates.  A callable
    may come with ``df`` returning its spatial gradient; otherwise a
    five-point central difference is used.
    """
    if j < 1 or j > max(at.dim, 1):
        raise DomainError(f"axis {j} outside 1..{at.dim}")
    c = at.coords
    A = _pad(np.atleast_1d(theta.gradient(at)), at.dim)[j - 1]
    if isinstance(f, SampledFunction):
        if f.grid.size < 3:
            raise StencilError("sampled derivative needs at least 3 points")
        y = c[j]
        if not f.grid[0] <= y <= f.grid[-1]:
            raise DomainError(f"x{j}={y:g} outside the sample grid")
        deriv = np.gradient(f.values, f.grid, edge_order=2)
        return float(np.interp(y, f.grid, deriv) + A * np.interp(y, f.grid, f.values))
    value = float(f(c))
    if df is not None:
        d = float(np.atleast_1d(df(c))[j - 1])
    else:
        h = 1e-3 * max(1.0, abs(c[j]))
        def at_offset(k):
            cc = c.copy()
            cc[j] += k * h
            return float(f(cc))
        d = (-at_offset(2) + 8 * at_offset(1) - 8 * at_offset(-1) + at_offset(-2)) / (12 * h)
    return d + A * value


def _grid_coords(grid: np.ndarray, t: float) -> np.ndarray:
    return np.column_stack([np.full(grid.size, t), grid])


def _check_grid(grid, psi):
    grid = np.asarray(grid, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    if grid.ndim != 1 or psi.shape != grid.shape:
        raise DomainError("psi and grid must be matching 1-D arrays")
    if grid.size < 5:
        raise StencilError(f"momentum operator needs at least 5 grid points, got {grid.size}")
    step = np.diff(grid)
    if np.any(step <= 0) or np.ptp(step) > 1e-9 * abs(step.mean()):
        raise DomainError("momentum operator needs a uniform increasing grid")
    return grid, psi


def _cov(psi, grid, theta, t):
    A = theta.gradient(_grid_coords(grid, t))[:, 0]
    return np.gradient(psi, grid, edge_order=2) + A * psi


def momentum_apply(psi, grid, theta: ThetaField, hbar: float = 1.0, t: float = 0.0) -> np.ndarray:
    """``i hbar (d psi/dy + A psi)`` on a uniform 1-D grid.

    Second-order central differences inside, second-order one-sided at the
    edges.
    """
    grid, psi = _check_grid(grid, psi)
    return 1j * hbar * _cov(psi, grid, theta, t)


def kinetic_apply(psi, grid, theta: ThetaField, hbar: float = 1.0, m: float = 1.0,
                  t: float = 0.0) -> np.ndarray:
    """``-hbar^2 / (2 m) D D psi`` with ``D = d/dy + A``."""
    if not m > 0:
        raise DomainError("mass must be positive")
    grid, psi = _check_grid(grid, psi)
    return -hbar ** 2 / (2 * m) * _cov(_cov(psi, grid, theta, t), grid, theta, t)


# --- spec grammar -----------------------------------------------------------

def _nums(text: str, token: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise SpecParseError(f"expected numbers in {token!r}", token=token) from None


def parse_lagrangian(spec: str) -> Lagrangian:
    """``free:<m>`` or ``harmonic:<m>;<k>``."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise SpecParseError(f"lagrangian spec {spec!r} lacks '<kind>:'", token=spec)
    try:
        if kind == "free":
            (m,) = _nums(body, spec)
            return Lagrangian.free(m)
        if kind == "harmonic":
            m_txt, _, k_txt = body.partition(";")
            (m,) = _nums(m_txt, spec)
            (k,) = _nums(k_txt, spec)
            return Lagrangian.harmonic(m, k)
    except ValueError as exc:
        if isinstance(exc, SpecParseError):
            raise
        raise SpecParseError(f"malformed lagrangian spec {spec!r}", token=spec) from exc
    raise SpecParseError(f"unknown lagrangian kind {kind!r}", token=kind)


def parse_function(spec: str, theta: ThetaField | None = None, j: int = 1):
    """Test functions of ``x_j`` for the covariant derivative.

    ``poly:<c0,c1,..>`` (ascending), ``exp:<k>`` for ``exp(k x_j)``,
    ``exp-neg-theta`` for ``exp(-theta)``, or ``table:<csv of x,value>``.
    Returns ``(f, df)``; ``df`` is ``None`` for tables, which are returned as
    a :class:`SampledFunction`.
    """
    kind, _, body = spec.partition(":")
    if kind == "poly":
        coeffs = np.array(_nums(body, spec))
        if coeffs.size == 0:
            raise SpecParseError("poly function needs coefficients", token=spec)
        dcoeffs = np.polynomial.polynomial.polyder(coeffs)
        def f(c):
            return float(np.polynomial.polynomial.polyval(c[j], coeffs))
        def df(c):
            g = np.zeros(c.size - 1)
            g[j - 1] = np.polynomial.polynomial.polyval(c[j], dcoeffs)
            return g
        return f, df
    if kind == "exp":
        vals = _nums(body, spec)
        if len(vals) != 1:
            raise SpecParseError("exp function takes one rate", token=spec)
        k = vals[0]
        def f(c):
            return math.exp(k * c[j])
        def df(c):
            g = np.zeros(c.size - 1)
            g[j - 1] = k * math.exp(k * c[j])
            return g
        return f, df
    if kind == "exp-neg-theta":
        if theta is None:
            raise SpecParseError("exp-neg-theta needs a theta field", token=spec)
        def f(c):
            return math.exp(-float(theta.value(c[None, :])[0]))
        def df(c):
            return -_pad(theta.gradient(c[None, :])[0], c.size - 1) * f(c)
        return f, df
    if kind == "table":
        try:
            with open(body, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        except OSError as exc:
            raise SpecParseError(f"cannot read {body!r}: {exc}", token=body) from exc
        data = []
        for r in rows:
            try:
                data.append([float(r[0]), float(r[1])])
            except (ValueError, IndexError):
                if data:
                    raise SpecParseError(f"bad row {r} in {body}", token=",".join(r)) from None
        arr = np.array(data)
        if arr.shape[0] < 2:
            raise SpecParseError(f"{body} needs at least two rows", token=body)
        return SampledFunction(arr[:, 0], arr[:, 1], axis=j), None
    raise SpecParseError(f"unknown function kind {kind!r}", token=kind)
