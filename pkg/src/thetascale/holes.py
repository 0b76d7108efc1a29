"""Distance profiles around a ``theta = K / |x - x0|`` scaling hole.

Along the straight path from ``z`` (at distance ``l`` from ``x0``) the scaled
length up to fraction ``w`` is

    inward:   l  * integral_0^w exp(K / (l (1 - s)) - K / l) ds
    outward:  l' * integral_0^w exp(K / (l + s l') - K / l) ds

referenced at ``z``.  ``K > 0`` (black hole) makes the inward profile
diverge as ``w -> 1``; ``K < 0`` (white hole) makes it level off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .csvio import write_csv
from .errors import ConvergenceError, DivergenceError, DomainError
from .fields import Point, RadialTheta, guarded_exp
from .quadrature import DEFAULT, QuadratureConfig, adaptive_simpson

__all__ = ["HoleSpec", "ProfileRow", "hole_profile", "profile_integrand", "write_profile_csv",
           "length_readings", "PROFILE_HEADER"]

PROFILE_HEADER = ("w", "unscaled", "scaled", "divergent")


@dataclass(frozen=True)
class HoleSpec:
    """Hole strength ``K``, reference distance ``l`` and path direction.

    For outward paths ``l_prime`` is the path length; by default the far
    end sits at ``2 |K|`` from the centre, i.e. ``l_prime = 2 |K| - l``.
    """

    K: float
    l: float = 1.0
    direction: str = "inward"
    l_prime: float | None = None

    def __post_init__(self):
        if self.K == 0 or not math.isfinite(self.K):
            raise DomainError("hole strength K must be finite and nonzero")
        if not (self.l > 0 and math.isfinite(self.l)):
            raise DomainError("reference distance l must be positive")
        if self.direction not in ("inward", "outward"):
            raise DomainError(f"direction must be 'inward' or 'outward', not {self.direction!r}")
        if self.direction == "outward":
            lp = 2 * abs(self.K) - self.l if self.l_prime is None else self.l_prime
            if not lp > 0:
                raise DomainError(
                    f"default outward length 2|K| - l = {lp:g} is not positive; give l_prime")
            object.__setattr__(self, "l_prime", float(lp))

    @property
    def kind(self) -> str:
        return "black" if self.K > 0 else "white"

    @property
    def path_length(self) -> float:
        return self.l if self.direction == "inward" else self.l_prime

    def radial_setup(self, w: float) -> tuple[RadialTheta, Point, Point]:
        """The same path in space: centre at the origin, ``z`` on the first axis.

        Returns ``(theta, z, end)`` where ``end`` is the path point at ``w``.
        """
        theta = RadialTheta(self.K, [0.0, 0.0, 0.0])
        z = Point.spatial(self.l, 0.0, 0.0)
        if self.direction == "inward":
            end = Point.spatial(self.l * (1 - w), 0.0, 0.0)
        else:
            end = Point.spatial(self.l + w * self.l_prime, 0.0, 0.0)
        return theta, z, end


@dataclass(frozen=True)
class ProfileRow:
    w: float
    unscaled: float
    scaled: float
    divergent: bool = False

    def as_tuple(self):
        return (self.w, self.unscaled, self.scaled, int(self.divergent))


def profile_integrand(spec: HoleSpec):
    """Dimensionless integrand ``s -> exp(theta(s) - theta(z))`` on ``[0, 1]``."""
    K, l = spec.K, spec.l
    if spec.direction == "inward":
        def f(s):
            return guarded_exp(K / (l * (1.0 - s)) - K / l)
    else:
        lp = spec.l_prime
        def f(s):
            return guarded_exp(K / (l + s * lp) - K / l)
    return f


def _last_finite(f, a, b, quad, iters=60):
    """Largest ``integral_a^u f`` with ``u`` in ``(a, b]`` below the guard."""
    good, bad, best = a, b, 0.0
    for _ in range(iters):
        mid = 0.5 * (good + bad)
        try:
            best = adaptive_simpson(f, a, mid, quad)
            good = mid
        except DivergenceError:
            bad = mid
        if bad - good <= 1e-15:
            break
    return best


def hole_profile(spec: HoleSpec, samples: int = 200, quad: QuadratureConfig = DEFAULT,
                 w_max: float = 1.0) -> list[ProfileRow]:
    """Rows at ``samples`` uniform ``w`` in ``[0, w_max]``.

    Each row adds the integral over its own ``w`` interval to the previous
    total.  The singular end ``s = 1`` of an inward path is clipped to
    ``1 - quad.singularity_clip``.  For a black hole, rows past the clip or
    past the exponent guard are flagged divergent; their ``scaled`` value is
    the largest finite partial length, a lower bound.
    """
    if samples < 2:
        raise DomainError("samples must be at least 2")
    if not 0 < w_max <= 1:
        raise DomainError("w_max must lie in (0, 1]")
    f = profile_integrand(spec)
    scale = spec.path_length
    ws = np.linspace(0.0, w_max, samples)
    clip = 1.0 - quad.singularity_clip
    rows = [ProfileRow(0.0, 0.0, 0.0, False)]
    parts: list[float] = []
    diverged_at = None
    for w_prev, w in zip(ws[:-1], ws[1:]):
        w, w_prev = float(w), float(w_prev)
        if diverged_at is None:
            hi = w
            if spec.direction == "inward":
                hi = min(w, clip)
            beyond_clip = spec.direction == "inward" and spec.K > 0 and w > clip
            try:
                if hi > w_prev:
                    parts.append(adaptive_simpson(f, w_prev, hi, quad))
            except (DivergenceError, ConvergenceError):
                # overflow, or a steepness the quadrature cannot resolve just
                # below the guard: keep the largest finite partial
                parts.append(_last_finite(f, w_prev, hi, quad))
                diverged_at = w
            if beyond_clip:
                diverged_at = w
        total = math.fsum(parts) * scale
        rows.append(ProfileRow(w, w * scale, total, diverged_at is not None))
    return rows


def length_readings(row: ProfileRow, spec: HoleSpec) -> dict:
    """Two ways to quote a row: scaled length in units of the path length,
    and its ratio to the unscaled length."""
    scale = spec.path_length
    ratio = row.scaled / row.unscaled if row.unscaled > 0 else float("nan")
    return {"w": row.w, "scaled_over_l": row.scaled / scale, "scaled_over_unscaled": ratio}


def write_profile_csv(stream, rows: Iterable[ProfileRow]) -> None:
    write_csv(stream, PROFILE_HEADER, (r.as_tuple() for r in rows))
