"""Adaptive step-down FDR control: the multiple-stage step-down procedure,
its competitors, exact small-m references, and a Monte Carlo harness."""

from .core import (
    ConfusionCounts,
    CriticalConstants,
    DomainError,
    InvalidPValue,
    LengthMismatch,
    OrderedPValues,
    PValueVector,
    RejectionSet,
    SizeGuard,
    ToleranceFailure,
    ValidationReport,
    sort_pvalues,
    validate_constants,
)
from .procedures import (
    PROCEDURES,
    apply_procedure,
    bh_constants,
    bh_procedure,
    check_theorem1_condition,
    ms_constants,
    ms_procedure,
    oracle_bh,
    prds_constants,
    prds_procedure,
    step_down,
    step_up,
    sts_procedure,
    two_stage_bky,
)

__version__ = "0.1.0"
