"""Deterministic adaptive Simpson quadrature.

Panels are refined breadth-first so that every pass evaluates the
integrand on one array of new nodes.  Panel values are summed in
left-to-right order with ``math.fsum``; the result depends only on the
inputs.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = ["QuadratureConfig", "adaptive_simpson", "integrate_pieces"]

TOL_ENV = "THETASCALE_TOL"


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 10**6
    singularity_clip: float = 1e-6

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if not 0 < self.singularity_clip < 0.1:
            raise DomainError("singularity_clip must lie in (0, 0.1)")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "QuadratureConfig":
        """Defaults, with ``rel_tol`` taken from ``THETASCALE_TOL`` if set."""
        env = os.environ.get(TOL_ENV)
        if env and "rel_tol" not in overrides:
            try:
                overrides["rel_tol"] = float(env)
            except ValueError as exc:
                raise DomainError(f"{TOL_ENV}={env!r} is not a number") from exc
        return cls(**overrides)

    def with_(self, **kw) -> "QuadratureConfig":
        return replace(self, **kw)


DEFAULT = QuadratureConfig()

_INITIAL_PANELS = 8


def adaptive_simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                     cfg: QuadratureConfig = DEFAULT) -> float:
    """Integrate vectorized ``f`` over ``[a, b]``.

    Each panel carries a whole-panel and a two-half Simpson estimate; their
    difference ``e`` gives the error estimate ``|e| / 15``.  Refinement stops
    when the summed estimate is below ``max(abs_tol, rel_tol * |I|)``;
    otherwise every panel whose error exceeds its even share of that budget
    is bisected.  Panels contribute their Richardson-corrected values.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, cfg)
    min_width = (b - a) * 1e-15

    edges = np.linspace(a, b, _INITIAL_PANELS + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    vals = _eval(f, np.concatenate([edges, mid]))
    f_lo, f_hi = vals[:_INITIAL_PANELS], vals[1:_INITIAL_PANELS + 1]
    f_mid = vals[_INITIAL_PANELS + 1:]
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)

    pool: dict[str, np.ndarray] | None = None
    created = _INITIAL_PANELS

    while True:
        # one extra level on the active panels yields their error estimates
        ql = 0.5 * (lo + mid)
        qr = 0.5 * (mid + hi)
        qv = _eval(f, np.concatenate([ql, qr]))
        f_ql, f_qr = qv[:lo.size], qv[lo.size:]
        half = 0.5 * (hi - lo)
        left = half / 6.0 * (f_lo + 4.0 * f_ql + f_mid)
        right = half / 6.0 * (f_mid + 4.0 * f_qr + f_hi)
        diff = left + right - whole
        fresh = dict(lo=lo, mid=mid, hi=hi, ql=ql, qr=qr, f_lo=f_lo, f_mid=f_mid,
                     f_hi=f_hi, f_ql=f_ql, f_qr=f_qr, left=left, right=right,
                     val=left + right + diff / 15.0, err=np.abs(diff) / 15.0)
        pool = fresh if pool is None else {k: np.concatenate([pool[k], fresh[k]]) for k in pool}

        estimate = math.fsum(pool["val"])
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(estimate))
        if math.fsum(pool["err"]) <= tol:
            break
        split = pool["err"] > tol / pool["err"].size
        st = {k: v[split] for k, v in pool.items()}
        if np.any(0.5 * (st["hi"] - st["lo"]) < min_width):
            raise ConvergenceError(
                "quadrature panel width underflow before reaching tolerance", best=estimate)
        created += int(split.sum())
        if created > cfg.max_subdivisions:
            raise ConvergenceError(
                f"quadrature exceeded {cfg.max_subdivisions} subdivisions", best=estimate)
        pool = {k: v[~split] for k, v in pool.items()}
        # children [lo, mid] and [mid, hi] inherit their halves as whole estimates
        lo = np.concatenate([st["lo"], st["mid"]])
        hi = np.concatenate([st["mid"], st["hi"]])
        mid = np.concatenate([st["ql"], st["qr"]])
        f_lo = np.concatenate([st["f_lo"], st["f_mid"]])
        f_hi = np.concatenate([st["f_mid"], st["f_hi"]])
        f_mid = np.concatenate([st["f_ql"], st["f_qr"]])
        whole = np.concatenate([st["left"], st["right"]])

    order = np.argsort(pool["lo"], kind="stable")
    return math.fsum(pool["val"][order])


def integrate_pieces(f: Callable[[np.ndarray], np.ndarray], breaks: Sequence[float],
                     cfg: QuadratureConfig = DEFAULT) -> float:
    """Integrate over consecutive intervals of ``breaks`` and fsum the parts."""
    parts = [adaptive_simpson(f, float(x0), float(x1), cfg)
             for x0, x1 in zip(breaks[:-1], breaks[1:])]
    return math.fsum(parts)


def _eval(f, x: np.ndarray) -> np.ndarray:
    y = np.asarray(f(x), dtype=float)
    if y.shape != x.shape:
        y = np.broadcast_to(y, x.shape).astype(float)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise DomainError(f"integrand is not finite at {bad!r}")
    return y
