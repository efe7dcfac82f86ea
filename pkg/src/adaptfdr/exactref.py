"""Slow reference implementations used to check the fast engines.

``exhaustive_stepdown`` restates the step-down rule literally.
``exact_fdr_stepdown`` integrates ``E[V / max(R, 1)]`` over the unit cube for
very small ``m`` by nested adaptive quadrature.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .core import (
    CriticalConstants,
    DomainError,
    LengthMismatch,
    PValueVector,
    RejectionSet,
    SizeGuard,
    ToleranceFailure,
    sort_pvalues,
)

__all__ = [
    "ExactFdrSpec",
    "exhaustive_stepdown",
    "exact_fdr_stepdown",
    "uniform_cdf",
    "gaussian_shift_cdf",
]

MAX_EXHAUSTIVE_M = 16
MAX_EXACT_M = 3


def uniform_cdf(t):
    return np.clip(t, 0.0, 1.0)


def gaussian_shift_cdf(mu: float) -> Callable:
    """CDF of ``p = 1 - Phi(Z + mu)``, ``Z ~ N(0, 1)``:
    ``F(t) = 1 - Phi(Phi^{-1}(1 - t) - mu)``."""

    def cdf(t):
        t = np.clip(t, 0.0, 1.0)
        return special.ndtr(special.ndtri(t) + mu)

    cdf.mu = mu
    return cdf


def _gaussian_shift_quantile(mu):
    def quantile(u):
        return special.ndtr(special.ndtri(u) - mu)

    return quantile


@dataclass(frozen=True)
class ExactFdrSpec:
    """Step-down constants, the number of true nulls, and the CDF of a
    false-null p-value. ``alt_mu`` (when set) overrides ``alt_cdf`` with the
    Gaussian-shift alternative of the simulation model."""

    constants: CriticalConstants
    m0: int
    alt_cdf: Optional[Callable] = None
    alt_mu: Optional[float] = None

    def __post_init__(self):
        m = self.constants.m
        if not (0 <= self.m0 <= m):
            raise DomainError(f"m0 must lie in [0, {m}], got {self.m0}")


def exhaustive_stepdown(pv, c) -> RejectionSet:
    """Largest ``i`` such that ``p_(j) <= alpha_j`` for all ``j <= i``,
    found by scanning every ``i`` from ``m`` downwards."""
    pv = pv if isinstance(pv, PValueVector) else PValueVector(pv)
    alphas = c.alphas if isinstance(c, CriticalConstants) else np.asarray(c, dtype=float)
    m = pv.m
    if m > MAX_EXHAUSTIVE_M:
        raise SizeGuard(f"exhaustive reference limited to m <= {MAX_EXHAUSTIVE_M}, got {m}")
    if alphas.size != m:
        raise LengthMismatch(f"{m} p-values but {alphas.size} constants")
    order = sort_pvalues(pv)
    p = [float(x) for x in order.sorted_values]
    a = [float(x) for x in alphas]
    k = 0
    for i in range(m, 0, -1):
        if all(p[j] <= a[j] for j in range(i)):
            k = i
            break
    ids = frozenset(int(x) for x in order.rank_to_id[:k])
    return RejectionSet(ids, k, p[k - 1] if k else 0.0, alphas)


def _fdp_sorted_scan(p, alphas, is_null):
    # plain-python step-down on a tiny unsorted tuple; ties irrelevant here
    order = sorted(range(len(p)), key=lambda j: (p[j], j))
    k = 0
    for i in range(len(p), 0, -1):
        if all(p[order[j]] <= alphas[j] for j in range(i)):
            k = i
            break
    if k == 0:
        return 0.0
    v = sum(1 for j in order[:k] if is_null[j])
    return v / k


def exact_fdr_stepdown(spec: ExactFdrSpec, tol: float = 1e-6) -> float:
    """FDR of the step-down procedure under independence, for ``m <= 3``.

    Each coordinate is integrated in its probability-integral scale ``u``
    (uniform on [0, 1]), mapped to ``p`` through the coordinate's quantile
    function. The integrand is piecewise constant, with jumps where ``p``
    crosses a critical constant, so every quadrature is split at those
    points. Nulls occupy the first ``m0`` coordinates.
    """
    alphas = [float(a) for a in spec.constants.alphas]
    m = len(alphas)
    if m > MAX_EXACT_M:
        raise SizeGuard(f"exact integration limited to m <= {MAX_EXACT_M}, got {m}")
    if m == 0 or spec.m0 == 0:
        return 0.0

    if spec.alt_mu is not None:
        alt_quantile = _gaussian_shift_quantile(spec.alt_mu)
        alt_cdf = gaussian_shift_cdf(spec.alt_mu)
    elif spec.alt_cdf is None or spec.alt_cdf is uniform_cdf:
        alt_quantile, alt_cdf = (lambda u: u), uniform_cdf
    else:
        alt_cdf = spec.alt_cdf
        alt_quantile = _numeric_quantile(alt_cdf)

    is_null = [j < spec.m0 for j in range(m)]
    quantiles = [(lambda u: u) if is_null[j] else alt_quantile for j in range(m)]
    breaks = []
    for j in range(m):
        cdf = uniform_cdf if is_null[j] else alt_cdf
        pts = sorted({float(cdf(a)) for a in alphas if 0.0 < float(cdf(a)) < 1.0})
        breaks.append(pts)

    inner_tol = tol / 10.0
    worst = [0.0]

    def level(j, prefix):
        if j == m:
            return _fdp_sorted_scan(prefix, alphas, is_null)

        def f(u):
            return level(j + 1, prefix + (float(quantiles[j](u)),))

        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(
                    f, 0.0, 1.0, points=breaks[j] or None, epsabs=inner_tol, epsrel=0.0, limit=200
                )
            except integrate.IntegrationWarning as exc:
                raise ToleranceFailure(str(exc)) from exc
        worst[0] = max(worst[0], err)
        return val

    value = level(0, ())
    if worst[0] > tol:
        raise ToleranceFailure(f"quadrature error estimate {worst[0]:.3g} exceeds {tol:.3g}")
    return float(value)


def _numeric_quantile(cdf):
    from scipy.optimize import brentq

    def quantile(u):
        if u <= 0.0:
            return 0.0
        if u >= 1.0:
            return 1.0
        return brentq(lambda t: float(cdf(t)) - u, 0.0, 1.0, xtol=1e-15)

    return quantile
