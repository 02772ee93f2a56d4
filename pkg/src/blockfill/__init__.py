"""Space utilization of B-tree leaves under batched random insertions.

Simulates block-splitting strategies (even, deferred even, two uneven
regimes), predicts the asymptotic fill of even splitting from the principal
eigenvector of its expected-count transition matrix, and cross-checks both
against exact closed forms and proven lower bounds.
"""

from .core import (
    BlockHistogram,
    ContractViolationError,
    FullnessSummary,
    InvariantViolationError,
    OutOfRangeError,
    ParameterError,
    SpectralAssumptionError,
    SplitParams,
    StateError,
    apply_outcome,
    fullness,
    make_rng,
    new_histogram,
    sample_hit,
)
from .strategies import (
    StrategyKind,
    deferred_even_outcome,
    even_split_outcome,
    recommended_strategy,
    target_split,
    uneven1_outcome,
    uneven2_outcome,
)
from .simulate import (
    KeyLevelSim,
    RunConfig,
    run_expected_recurrence,
    run_key_level,
    run_monte_carlo,
    run_single,
)
from .spectral import (
    EigenSolution,
    TransitionMatrix,
    build_matrix,
    intra_class_check,
    perron_margin,
    predicted_fullness,
    principal_eigenvector,
    restrict,
    spectral_projection,
    support_set,
)
from .bounds import (
    deferred_even_fill,
    even_split_lower_bound,
    guaranteed_fill,
    harmonic,
    pair_class_fill,
    pair_class_fill_scan,
)

__version__ = "0.1.0"
