"""Critical constants, the step-down/step-up engines and the named
procedures: BH, two-stage BKY (TS), multiple-stage step-down (MS),
modified Storey (STS), oracle BH (ORC) and the PRDS-safe step-down.

Every named procedure is written once, as a batched rule over a matrix of
sorted p-value rows (:func:`reject_counts`). The single-vector functions
wrap that rule, so the simulation harness and the library surface agree
bit for bit.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .core import (
    CriticalConstants,
    DomainError,
    LengthMismatch,
    OrderedPValues,
    PValueVector,
    RejectionSet,
    sort_pvalues,
)

__all__ = [
    "PROCEDURES",
    "ORACLE_CAP",
    "ms_constants",
    "bh_constants",
    "prds_constants",
    "check_theorem1_condition",
    "theorem1_bound",
    "step_down",
    "step_up",
    "bh_procedure",
    "ms_procedure",
    "two_stage_bky",
    "sts_procedure",
    "oracle_bh",
    "prds_procedure",
    "apply_procedure",
    "reject_counts",
]

PROCEDURES = ("BH", "TS", "MS", "STS", "ORC", "PRDS")

# oracle constants are kept strictly below 1
ORACLE_CAP = 1.0 - 1e-12
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _check_q(q):
    if not (isinstance(q, (int, float, np.floating)) and 0.0 < q < 1.0):
        raise DomainError(f"q must lie in (0, 1), got {q!r}")


def _check_m(m):
    if int(m) != m or m < 0:
        raise DomainError(f"m must be a nonnegative integer, got {m!r}")
    return int(m)


def ms_constants(m: int, q: float, beta: float = 1.0) -> CriticalConstants:
    """``alpha_i = i q / (m + beta - i (1 - q))``; ``beta=1`` gives the
    multiple-stage step-down schedule, larger ``beta`` is more conservative."""
    m = _check_m(m)
    _check_q(q)
    if not beta >= 1.0:
        raise DomainError(f"beta must be >= 1, got {beta!r}")
    i = np.arange(1, m + 1, dtype=np.float64)
    return CriticalConstants(i * q / (m + beta - i * (1.0 - q)), family="MS", q=q, beta=float(beta))


def bh_constants(m: int, q: float) -> CriticalConstants:
    m = _check_m(m)
    _check_q(q)
    return CriticalConstants(np.arange(1, m + 1) * q / m, family="BH", q=q)


def prds_constants(m: int, q: float) -> CriticalConstants:
    """Step-down constants safe under positive regression dependence.

    Uses ``beta = m (1 - q)``, the smallest admissible value, so the last
    constant equals ``q``.
    """
    m = _check_m(m)
    _check_q(q)
    beta = m * (1.0 - q)
    i = np.arange(1, m + 1, dtype=np.float64)
    return CriticalConstants(i * q / (m + beta - i * (1.0 - q)), family="PRDS", q=q, beta=beta)


def theorem1_bound(m: int, q: float) -> np.ndarray:
    """Upper bound ``i q / (m + 1 - i)`` on the odds ``alpha_i / (1 - alpha_i)``."""
    i = np.arange(1, m + 1, dtype=np.float64)
    return i * q / (m + 1 - i)


def check_theorem1_condition(c: CriticalConstants, q: float | None = None, rtol: float = 1e-12) -> bool:
    """True iff every ``alpha_i / (1 - alpha_i) <= i q / (m + 1 - i)``, with a
    relative slack of ``rtol`` for boundary equality.

    Schedules satisfying this control the FDR at ``q`` for independent
    uniform nulls when used step-down.
    """
    if q is None:
        q = c.q
    _check_q(q)
    a = c.alphas
    if a.size == 0:
        return True
    if np.any(a >= 1.0) or np.any(a < 0.0):
        return False
    odds = a / (1.0 - a)
    bound = theorem1_bound(a.size, q)
    return bool(np.all(odds <= bound * (1.0 + rtol)))


# ------------------------------------------------------------------ engines


def _as_pv(pv) -> PValueVector:
    return pv if isinstance(pv, PValueVector) else PValueVector(pv)


def _alphas(c) -> np.ndarray:
    return c.alphas if isinstance(c, CriticalConstants) else np.asarray(c, dtype=np.float64)


def _rejection(order: OrderedPValues, k: int, alphas=None) -> RejectionSet:
    k = int(k)
    threshold = float(order.sorted_values[k - 1]) if k > 0 else 0.0
    ids = frozenset(int(i) for i in order.rank_to_id[:k])
    return RejectionSet(rejected_ids=ids, k=k, threshold=threshold, alphas=alphas)


def step_down(pv, c) -> RejectionSet:
    """Reject the longest prefix of sorted p-values with ``p_(j) <= alpha_j``."""
    pv = _as_pv(pv)
    alphas = _alphas(c)
    if alphas.size != pv.m:
        raise LengthMismatch(f"{pv.m} p-values but {alphas.size} constants")
    order = sort_pvalues(pv)
    k = K.stepdown_count(order.sorted_values[None, :], alphas)[0]
    return _rejection(order, k, alphas)


def step_up(pv, c) -> RejectionSet:
    """Reject ranks ``1..k`` where ``k`` is the largest ``i`` with ``p_(i) <= alpha_i``."""
    pv = _as_pv(pv)
    alphas = _alphas(c)
    if alphas.size != pv.m:
        raise LengthMismatch(f"{pv.m} p-values but {alphas.size} constants")
    order = sort_pvalues(pv)
    k = K.stepup_count(order.sorted_values[None, :], alphas)[0]
    return _rejection(order, k, alphas)


# ---------------------------------------------------------- batched rules


def _linear(m, levels, caps):
    return np.arange(1, m + 1) * levels / m if caps is None else np.minimum(np.arange(1, m + 1) * levels / m, caps)


def _ts_levels(sp, q):
    n, m = sp.shape
    q1 = q / (1.0 + q)
    r1 = K.stepup_linear_count(sp, np.full(n, q1), np.full(n, np.inf))
    mid = (r1 > 0) & (r1 < m)
    m0_hat = np.where(mid, m - r1, m)
    return r1, np.where(mid, q1 * m / m0_hat, q1)


def _sts_levels(sp, q, lam):
    n, m = sp.shape
    r = K.count_le(sp, np.full(n, lam))
    m0_hat = (m + 1 - r) / (1.0 - lam)
    return q * m / m0_hat


def reject_counts(tag: str, sp: np.ndarray, q: float, *, m0: int | None = None, lam: float = 0.5) -> np.ndarray:
    """Number of rejections made by procedure ``tag`` on each sorted row of ``sp``."""
    sp = np.ascontiguousarray(sp, dtype=np.float64)
    n, m = sp.shape
    if m == 0:
        return np.zeros(n, dtype=np.int64)
    if tag == "BH":
        return K.stepup_linear_count(sp, np.full(n, q), np.full(n, np.inf))
    if tag == "MS":
        return K.stepdown_count(sp, ms_constants(m, q).alphas)
    if tag == "PRDS":
        return K.stepdown_count(sp, prds_constants(m, q).alphas)
    if tag == "TS":
        r1, levels = _ts_levels(sp, q)
        k2 = K.stepup_linear_count(sp, levels, np.full(n, np.inf))
        return np.where(r1 == 0, 0, np.where(r1 == m, m, k2)).astype(np.int64)
    if tag == "STS":
        levels = _sts_levels(sp, q, lam)
        return K.stepup_linear_count(sp, levels, np.full(n, lam))
    if tag == "ORC":
        if m0 is None:
            raise DomainError("the oracle procedure needs m0")
        if m0 == 0:
            return K.count_le(sp, np.full(n, _BELOW_ONE))
        return K.stepup_linear_count(sp, np.full(n, q * m / m0), np.full(n, ORACLE_CAP))
    raise DomainError(f"unknown procedure {tag!r}; expected one of {PROCEDURES}")


# --------------------------------------------------------- named procedures


def _run(tag, pv, q, alphas_fn, **kw) -> RejectionSet:
    pv = _as_pv(pv)
    _check_q(q)
    order = sort_pvalues(pv)
    if pv.m == 0:
        return RejectionSet(frozenset(), 0, 0.0, np.empty(0))
    sp = order.sorted_values[None, :]
    k = reject_counts(tag, sp, q, **kw)[0]
    return _rejection(order, k, alphas_fn(sp))


def bh_procedure(pv, q: float) -> RejectionSet:
    return _run("BH", pv, q, lambda sp: bh_constants(sp.shape[1], q).alphas)


def ms_procedure(pv, q: float) -> RejectionSet:
    """Multiple-stage adaptive step-down procedure at level ``q``."""
    return _run("MS", pv, q, lambda sp: ms_constants(sp.shape[1], q).alphas)


def prds_procedure(pv, q: float) -> RejectionSet:
    return _run("PRDS", pv, q, lambda sp: prds_constants(sp.shape[1], q).alphas)


def two_stage_bky(pv, q: float) -> RejectionSet:
    """Two-stage adaptive BH.

    Stage one runs BH at ``q' = q / (1 + q)`` and counts ``r1`` rejections.
    Nothing is rejected when ``r1 = 0`` and everything when ``r1 = m``;
    otherwise BH is rerun on all hypotheses at ``q' m / (m - r1)``.
    """

    def alphas(sp):
        _, levels = _ts_levels(sp, q)
        return _linear(sp.shape[1], levels[0], None)

    return _run("TS", pv, q, alphas)


def sts_procedure(pv, q: float, lam: float = 0.5) -> RejectionSet:
    """Modified Storey procedure.

    Estimates ``m0`` by ``(m + 1 - #{p <= lam}) / (1 - lam)`` and runs
    BH at ``q m / m0_hat`` with constants capped at ``lam``, so no
    p-value above ``lam`` is ever rejected.
    """
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lambda must lie in (0, 1), got {lam!r}")

    def alphas(sp):
        return _linear(sp.shape[1], _sts_levels(sp, q, lam)[0], lam)

    return _run("STS", pv, q, alphas, lam=lam)


def oracle_bh(pv, q: float, m0: int) -> RejectionSet:
    """BH at level ``q m / m0`` using the true number of nulls."""
    pv = _as_pv(pv)
    if int(m0) != m0 or not (0 <= m0 <= pv.m):
        raise DomainError(f"m0 must be an integer in [0, {pv.m}], got {m0!r}")
    m0 = int(m0)

    def alphas(sp):
        m = sp.shape[1]
        if m0 == 0:
            return np.full(m, _BELOW_ONE)
        return _linear(m, q * m / m0, ORACLE_CAP)

    return _run("ORC", pv, q, alphas, m0=m0)


def apply_procedure(tag: str, pv, q: float, *, lam: float = 0.5, m0: int | None = None) -> RejectionSet:
    tag = tag.upper()
    if tag == "BH":
        return bh_procedure(pv, q)
    if tag == "MS":
        return ms_procedure(pv, q)
    if tag == "PRDS":
        return prds_procedure(pv, q)
    if tag == "TS":
        return two_stage_bky(pv, q)
    if tag == "STS":
        return sts_procedure(pv, q, lam)
    if tag == "ORC":
        if m0 is None:
            raise DomainError("the oracle procedure needs m0")
        return oracle_bh(pv, q, m0)
    raise DomainError(f"unknown procedure {tag!r}; expected one of {PROCEDURES}")
