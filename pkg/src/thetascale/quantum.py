"""Scaled normalization and expectation values of wave packets.

Every integrand carries one factor ``exp(theta(y) - theta(ref))``.  Gaussian
packets are integrated axis by axis with adaptive Simpson quadrature, which
requires theta to split into a sum of one-axis terms; sampled packets use
trapezoid weights on their grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .dynamics import momentum_apply
from .errors import DivergenceError, DomainError, SpecParseError
from .fields import (ConstantTheta, LinearTheta, Point, RadialTheta, TabulatedTheta,
                     ThetaField, TimeLinearTheta, TimeQuadraticTheta, _Shifted,
                     guarded_exp, scaling_factor)
from .quadrature import DEFAULT, QuadratureConfig, integrate_pieces

__all__ = ["WavePacket", "GaussianPacket", "SampledPacket", "ScaledExpectation",
           "scaled_norm", "scaled_position", "scaled_momentum", "transfer_expectation",
           "parse_packet"]

NORM_TOL = 1e-6
_SHELL = 8.0         # bound extension step, in standard deviations
_MAX_HALF_WIDTH = 400.0


class WavePacket:
    dim = 1


@dataclass(frozen=True)
class GaussianPacket(WavePacket):
    """Normalized product of 1-D gaussians, ``|psi|^2 = prod N(y_j; mu_j, sigma_j)``.

    ``k`` is a plane-wave phase; it does not enter ``|psi|^2``.
    """

    mu: tuple
    sigma: tuple
    k: tuple = ()

    def __post_init__(self):
        mu = tuple(float(v) for v in np.atleast_1d(self.mu))
        sigma = tuple(float(v) for v in np.atleast_1d(self.sigma))
        if len(sigma) == 1 and len(mu) > 1:
            sigma = sigma * len(mu)
        if len(sigma) != len(mu):
            raise DomainError("gaussian packet needs one sigma per axis (or a single sigma)")
        if not all(s > 0 and math.isfinite(s) for s in sigma):
            raise DomainError("gaussian sigma must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))

    @property
    def dim(self) -> int:
        return len(self.mu)

    def density_axis(self, j: int, y: np.ndarray) -> np.ndarray:
        m, s = self.mu[j], self.sigma[j]
        return np.exp(-0.5 * ((y - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))

    def amplitude(self, y: np.ndarray) -> np.ndarray:
        """``psi`` on a 1-D grid (first axis only)."""
        if self.dim != 1:
            raise DomainError("amplitude sampling is 1-D only")
        y = np.asarray(y, dtype=float)
        phase = np.exp(1j * self.k[0] * y) if self.k else 1.0
        return np.sqrt(self.density_axis(0, y)) * phase

    def sample(self, n: int = 2 ** 12, width: float = 6.0) -> "SampledPacket":
        """Grid of ``n`` points over ``mu +- width * sigma``."""
        y = np.linspace(self.mu[0] - width * self.sigma[0], self.mu[0] + width * self.sigma[0], n)
        return SampledPacket(y, self.amplitude(y))


@dataclass(frozen=True, eq=False)
class SampledPacket(WavePacket):
    """Complex amplitudes on a strictly increasing 1-D grid."""

    grid: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        psi = np.asarray(self.psi, dtype=complex)
        if grid.ndim != 1 or psi.shape != grid.shape or grid.size < 2:
            raise DomainError("sampled packet needs matching 1-D grid and amplitudes")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("sampled packet grid must increase strictly")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "psi", psi)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights of the grid."""
        w = np.zeros(self.grid.size)
        h = np.diff(self.grid)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    @property
    def norm(self) -> float:
        return math.fsum(self.weights * np.abs(self.psi) ** 2)

    @property
    def normalized(self) -> bool:
        return abs(self.norm - 1.0) <= NORM_TOL

    @classmethod
    def from_csv(cls, path: str) -> "SampledPacket":
        rows = []
        try:
            with open(path, newline="") as fh:
                for row in csv.reader(fh):
                    if not row or row[0].strip().startswith("#"):
                        continue
                    try:
                        rows.append([float(v) for v in row[:3]])
                    except ValueError:
                        if rows:
                            raise SpecParseError(f"bad row in {path}: {row}",
                                                 token=",".join(row)) from None
        except OSError as exc:
            raise SpecParseError(f"cannot read {path!r}: {exc}", token=path) from exc
        if len(rows) < 2 or any(len(r) != 3 for r in rows):
            raise SpecParseError(f"{path} needs >= 2 rows of grid,re,im", token=path)
        a = np.array(rows)
        return cls(a[:, 0], a[:, 1] + 1j * a[:, 2])


@dataclass(frozen=True)
class ScaledExpectation:
    value: float
    ref: Point
    quantity: str = "norm"
    imag: float = 0.0

    def __post_init__(self):
        if self.quantity == "norm" and not self.value > 0:
            raise DomainError("a norm must be positive")


# --- gaussian path ------------------------------------------------------------

def _separable(theta: ThetaField, d: int) -> bool:
    """True when theta is a sum of one-axis terms for ``d`` spatial axes."""
    if isinstance(theta, _Shifted):
        return _separable(theta.base, d)
    if isinstance(theta, (ConstantTheta, LinearTheta, TimeLinearTheta, TimeQuadraticTheta,
                          TabulatedTheta)):
        return True
    if isinstance(theta, RadialTheta):
        return d == 1
    return False


def _singular_points(theta: ThetaField, j: int, packet: GaussianPacket) -> list[float]:
    base = theta.base if isinstance(theta, _Shifted) else theta
    if isinstance(base, RadialTheta) and not np.any(base.center[1:]):
        return [float(base.center[0])]
    return []


def _axis_integral(packet: GaussianPacket, theta: ThetaField, j: int, t: float,
                   weight: Callable[[np.ndarray], np.ndarray], quad: QuadratureConfig,
                   anchor: float) -> float:
    """``integral weight(y) exp(theta_j(y) - anchor) rho_j(y) dy``.

    ``theta_j`` is theta with every other coordinate held at the mean.

    Bounds grow in shells of 8 sigma until a shell adds less than the
    tolerance.  A growing integrand trips the exponent guard or the width
    cap and raises :class:`DivergenceError`.
    """
    mu, sigma = packet.mu[j], packet.sigma[j]
    base = np.array([t, *packet.mu])
    eps = quad.singularity_clip

    def integrand(y):
        c = np.repeat(base[None, :], y.size, axis=0)
        c[:, j + 1] = y
        e = theta.value(c) - anchor
        return weight(y) * guarded_exp(e) * packet.density_axis(j, y)

    sing = _singular_points(theta, j, packet)

    def over(lo, hi):
        cuts = [lo]
        for p in sing:
            if lo < p < hi:
                cuts += [p - eps, p + eps]
        cuts.append(hi)
        # drop the excluded neighbourhoods of singular points
        total = []
        for a, b in zip(cuts[0::2], cuts[1::2]):
            if b > a:
                total.append(integrate_pieces(integrand, [a, b], quad))
        return math.fsum(total)

    W = _SHELL
    try:
        value = over(mu - W * sigma, mu + W * sigma)
        while True:
            shell = over(mu - (W + _SHELL) * sigma, mu - W * sigma) + \
                over(mu + W * sigma, mu + (W + _SHELL) * sigma)
            value += shell
            W += _SHELL
            if abs(shell) <= max(quad.abs_tol, quad.rel_tol * abs(value)):
                return value
            if W >= _MAX_HALF_WIDTH:
                raise DivergenceError(
                    f"expectation integrand still growing at {W:g} sigma on axis {j + 1}",
                    partial=value)
    except DivergenceError as exc:
        if exc.partial is None:
            raise DivergenceError(f"expectation integral diverges on axis {j + 1}: {exc}") from exc
        raise


def _gaussian_moments(packet: GaussianPacket, theta: ThetaField, ref: Point,
                      quad: QuadratureConfig, axis: int | None):
    d = packet.dim
    if not _separable(theta, d):
        raise DomainError(
            f"{theta.spec} is not separable over {d} axes; sample the packet and use the "
            "sampled form instead")
    t = ref.t
    if d == 1:
        # one axis: measure from the reference directly (the mean may be singular)
        prefactor, anchor = 1.0, theta.value(ref)
    else:
        base = Point(t, packet.mu)
        prefactor, anchor = scaling_factor(theta, base, ref), theta.value(base)
    factors = []
    for j in range(d):
        w = (lambda y: y) if j == axis else np.ones_like
        factors.append(_axis_integral(packet, theta, j, t, w, quad, anchor))
    return prefactor * math.prod(factors)


def _theta_on_grid(theta: ThetaField, grid: np.ndarray, t: float) -> np.ndarray:
    return theta.value(np.column_stack([np.full(grid.size, t), grid]))


def _sampled_sum(packet: SampledPacket, theta: ThetaField, ref: Point, values: np.ndarray) -> complex:
    e = _theta_on_grid(theta, packet.grid, ref.t) - theta.value(ref)
    terms = packet.weights * guarded_exp(e) * values
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def scaled_norm(psi: WavePacket, theta: ThetaField, ref: Point,
                quad: QuadratureConfig = DEFAULT) -> ScaledExpectation:
    """``integral exp(theta(y) - theta(ref)) |psi(y)|^2 dy``."""
    if isinstance(psi, GaussianPacket):
        value = _gaussian_moments(psi, theta, ref, quad, None)
    elif isinstance(psi, SampledPacket):
        value = _sampled_sum(psi, theta, ref, np.abs(psi.psi) ** 2).real
    else:
        raise DomainError(f"unsupported packet {type(psi).__name__}")
    return ScaledExpectation(value, ref, "norm")


def scaled_position(psi: WavePacket, theta: ThetaField, ref: Point, axis: int = 1,
                    quad: QuadratureConfig = DEFAULT) -> ScaledExpectation:
    """``integral exp(theta(y) - theta(ref)) y_axis |psi(y)|^2 dy``; ``axis`` from 1."""
    if not 1 <= axis <= psi.dim:
        raise DomainError(f"axis {axis} outside 1..{psi.dim}")
    if isinstance(psi, GaussianPacket):
        value = _gaussian_moments(psi, theta, ref, quad, axis - 1)
    elif isinstance(psi, SampledPacket):
        value = _sampled_sum(psi, theta, ref, psi.grid * np.abs(psi.psi) ** 2).real
    else:
        raise DomainError(f"unsupported packet {type(psi).__name__}")
    return ScaledExpectation(value, ref, f"position:{axis}")


def scaled_momentum(psi: SampledPacket, theta: ThetaField, ref: Point, hbar: float = 1.0,
                    covariant: bool = True) -> ScaledExpectation:
    """``integral exp(theta - theta(ref)) conj(psi) p psi dy`` for sampled packets.

    ``p`` is ``i hbar D`` with the covariant derivative, or ``i hbar d/dy``
    when ``covariant`` is false.  The imaginary part is kept in ``imag``.
    """
    if not isinstance(psi, SampledPacket):
        raise DomainError("momentum expectations need a sampled packet")
    field = theta if covariant else ConstantTheta(0.0)
    p_psi = momentum_apply(psi.psi, psi.grid, field, hbar, t=ref.t)
    z = _sampled_sum(psi, theta, ref, np.conj(psi.psi) * p_psi)
    return ScaledExpectation(z.real, ref, "momentum" if covariant else "momentum:plain", z.imag)


def transfer_expectation(e: ScaledExpectation, theta: ThetaField, to: Point) -> ScaledExpectation:
    """Re-reference ``e`` at ``to``: multiply by ``exp(theta(e.ref) - theta(to))``."""
    factor = scaling_factor(theta, e.ref, to)
    return replace(e, value=e.value * factor, imag=e.imag * factor, ref=to)


# --- spec grammar -----------------------------------------------------------

def parse_packet(spec: str) -> WavePacket:
    """``gaussian:<mu1,..>;<sigma1,..>`` or ``sampled:@<csv of grid,re,im>``."""
    kind, sep, body = spec.partition(":")
    if not sep:
        raise SpecParseError(f"packet spec {spec!r} lacks '<kind>:'", token=spec)
    if kind == "gaussian":
        mu_txt, semi, sig_txt = body.partition(";")
        if not semi:
            raise SpecParseError(f"gaussian packet needs '<mu>;<sigma>': {spec!r}", token=body)
        try:
            mu = [float(v) for v in mu_txt.split(",") if v.strip()]
            sigma = [float(v) for v in sig_txt.split(",") if v.strip()]
        except ValueError:
            raise SpecParseError(f"expected numbers in {spec!r}", token=body) from None
        if not mu or not sigma:
            raise SpecParseError(f"gaussian packet needs mu and sigma: {spec!r}", token=body)
        return GaussianPacket(tuple(mu), tuple(sigma))
    if kind == "sampled":
        if not body.startswith("@"):
            raise SpecParseError("sampled packet spec is 'sampled:@<csv file>'", token=body)
        return SampledPacket.from_csv(body[1:])
    raise SpecParseError(f"unknown packet kind {kind!r}", token=kind)
