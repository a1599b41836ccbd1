"""Exact weighted sums, compound Poisson approximants and smoothing bounds."""

from .approximants import (
    CPComponent,
    build_franken_second,
    build_g,
    build_pi,
    build_smoothing,
    build_theorem3,
    compound_poisson,
)
from .blocks import (
    GeneralJump,
    IIDLattice,
    LatentDriver,
    MomentSummary,
    TwoRuns,
    block_distribution,
    block_moments,
    weighted_sum_distribution,
)
from .bounds import (
    BoundReport,
    BoundShape,
    ConditionReport,
    ValidationRecord,
    bound_roos_hipp,
    bound_shape,
    check_conditions,
    compare,
    validate_charfn_bound,
    validate_lemma_ac,
    validate_presman,
)
from .errors import (
    CPSmoothError,
    DomainError,
    InputError,
    NumericError,
    PreconditionError,
    ResourceError,
)
from .measure import (
    SignedMeasure,
    cdf,
    charfn,
    concentration,
    convolve,
    convolve_power,
    dirac,
    exp_measure,
    from_atoms,
    kolmogorov_norm,
    scale_support,
    total_variation,
)

__version__ = "0.1.0"
