"""Phase-field approximation of Steiner and branched-transport networks."""
from .energy import (
    AlphaRegime,
    EnergyBreakdown,
    MeshMismatchError,
    Segment,
    SegmentNetwork,
    constraint_energy,
    dirichlet_energy,
    eta_default,
    limit_energy,
    modica_mortola_energy,
    total_energy,
    transport_mass,
    well_energy,
)
from .fem import (
    IncompatibleRHSError,
    InvalidWeightError,
    SolveReport,
    SolverFailure,
    assemble_lumped_mass,
    assemble_weighted_stiffness,
    lumped_mass_vector,
    solve_spd,
)
from .mesh import Mesh, MeshError, OutsideDomainError, build_disc_mesh, check_mesh, interpolate, locate
from .problem import (
    CompatibilityReport,
    Mollifier,
    PlacementError,
    ResolutionError,
    TerminalConfig,
    build_source_load,
    check_compatibility,
)
from .solver import (
    EnergyTrace,
    RunFailure,
    SolverConfig,
    SolverState,
    epsilon_schedule,
    network_length_estimates,
    run,
    shape_derivative,
    shape_step,
)

__version__ = "0.1.0"
