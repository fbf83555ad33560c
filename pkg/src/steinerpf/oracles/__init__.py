"""Independent reference values: exact trees, recovery pairs, 1D profiles."""
from .recovery import (
    CornerField,
    GeometryError,
    RecoveryPair,
    UnsupportedRegimeError,
    build_recovery,
    corner_field,
    recovery_mesh,
    recovery_mollifier,
    segment_recovery_energy,
    transport_upper_bound,
    tube_parameters,
    weak_divergence_error,
)
from .steiner import (
    MAX_TERMINALS,
    SteinerSolution,
    TooManyTerminalsError,
    full_topologies,
    limit_energy_min_estimate,
    optimize_positions,
    steiner_exact,
    weighted_steiner_tree,
)
from .transition import (
    PARTIAL_TRANSITION_BOUND,
    optimal_profile,
    profile_energy,
    random_crossing_profile,
    transition_closed_form,
    transition_cost_check,
    transition_width,
)
