"""Domain types shared by every procedure: p-value vectors, orderings,
critical constants, rejection sets and confusion counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "InvalidPValue",
    "DomainError",
    "LengthMismatch",
    "SizeGuard",
    "ToleranceFailure",
    "PValueVector",
    "OrderedPValues",
    "CriticalConstants",
    "RejectionSet",
    "ConfusionCounts",
    "ValidationReport",
    "sort_pvalues",
    "validate_constants",
    "confusion_counts",
]


class InvalidPValue(ValueError):
    pass


class DomainError(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class SizeGuard(ValueError):
    pass


class ToleranceFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class PValueVector:
    """Raw p-values with stable hypothesis ids.

    ``truth`` is an optional boolean array; ``True`` marks a true null
    hypothesis. ``ids`` default to ``0..m-1``.
    """

    values: np.ndarray
    ids: Optional[np.ndarray] = None
    truth: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        m = values.size
        bad = ~np.isfinite(values) | (values < 0.0) | (values > 1.0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InvalidPValue(f"p-value at position {i} is {values[i]!r}, not in [0, 1]")
        if self.ids is None:
            ids = np.arange(m, dtype=np.int64)
        else:
            ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
            if ids.size != m or not np.array_equal(np.sort(ids), np.arange(m)):
                raise InvalidPValue("ids must be a permutation of 0..m-1")
        truth = self.truth
        if truth is not None:
            truth = np.asarray(truth, dtype=bool).reshape(-1)
            if truth.size != m:
                raise LengthMismatch(f"truth has length {truth.size}, expected {m}")
        values.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "truth", truth)

    def __len__(self) -> int:
        return self.values.size

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def m0(self) -> Optional[int]:
        return None if self.truth is None else int(self.truth.sum())


@dataclass(frozen=True)
class OrderedPValues:
    sorted_values: np.ndarray
    rank_to_id: np.ndarray

    @property
    def m(self) -> int:
        return self.sorted_values.size


@dataclass(frozen=True)
class CriticalConstants:
    """A critical-value schedule alpha_1..alpha_m.

    ``family`` is one of ``"MS"``, ``"BH"``, ``"PRDS"`` or ``"Custom"``;
    ``beta`` is recorded for the MS and PRDS families.
    """

    alphas: np.ndarray
    family: str = "Custom"
    q: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64).reshape(-1)
        alphas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)

    def __len__(self) -> int:
        return self.alphas.size

    @property
    def m(self) -> int:
        return self.alphas.size


@dataclass(frozen=True)
class RejectionSet:
    """Hypotheses rejected by a procedure.

    ``threshold`` is the largest rejected p-value (0 when nothing is
    rejected). ``alphas`` holds the effective constants by rank, when the
    procedure has them.
    """

    rejected_ids: frozenset
    k: int
    threshold: float
    alphas: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def mask(self, m: int) -> np.ndarray:
        out = np.zeros(m, dtype=bool)
        if self.rejected_ids:
            out[np.fromiter(self.rejected_ids, dtype=np.int64)] = True
        return out


@dataclass(frozen=True)
class ConfusionCounts:
    V: int
    S: int
    R: int
    m0: int
    m1: int

    @property
    def fdp(self) -> float:
        return self.V / self.R if self.R > 0 else 0.0

    @property
    def power(self) -> float:
        # NaN marks "undefined" when there are no false nulls
        return self.S / self.m1 if self.m1 > 0 else float("nan")


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def sort_pvalues(pv: PValueVector) -> OrderedPValues:
    """Nondecreasing rearrangement of ``pv``; ties are broken by ascending id."""
    if not isinstance(pv, PValueVector):
        pv = PValueVector(pv)
    order = np.lexsort((pv.ids, pv.values))
    return OrderedPValues(pv.values[order], pv.ids[order])


def validate_constants(c: CriticalConstants | Sequence[float]) -> ValidationReport:
    alphas = c.alphas if isinstance(c, CriticalConstants) else np.asarray(c, dtype=float)
    report = ValidationReport()
    for i, a in enumerate(alphas, start=1):
        if not (np.isfinite(a) and 0.0 < a < 1.0):
            report.violations.append(f"α_{i} not in (0,1)")
    for i in range(1, alphas.size):
        if alphas[i] < alphas[i - 1]:
            report.violations.append(f"not nondecreasing at index {i + 1}")
    return report


def confusion_counts(pv: PValueVector, rs: RejectionSet) -> ConfusionCounts:
    if pv.truth is None:
        raise DomainError("confusion counts need truth labels")
    rejected = rs.mask(pv.m)
    V = int(np.count_nonzero(rejected & pv.truth))
    S = int(np.count_nonzero(rejected & ~pv.truth))
    m0 = int(pv.truth.sum())
    return ConfusionCounts(V=V, S=S, R=V + S, m0=m0, m1=pv.m - m0)
