"""Two-timescale exponential dynamic energy networks: simulation, energy analysis, escape times and capacity."""

__version__ = "0.1.0"

from ._accel import get_backend, set_backend
from .analysis import (
    EscapeRecord,
    PhaseCell,
    analytic_escape_time,
    measure_escape_times,
    phase_diagram,
    slow_trajectory_analytic,
    transition_lambda,
)
from .capacity import (
    CapacityEstimate,
    CapacitySpec,
    analytic_capacity_eden,
    analytic_capacity_reference,
    eden_success_rate,
    empirical_capacity,
    gamma_base,
    gaussian_cdf_logistic,
    single_bit_error_probability,
)
from .dynamics import (
    DivergenceError,
    EdenParams,
    NetworkState,
    Trajectory,
    clamp_sigma,
    cue_state,
    eden_derivative,
    hidden_activation,
    integrate,
    reference_derivative,
    softmax,
)
from .energy import (
    EnergyBreakdown,
    FixedPointResult,
    energy,
    energy_rate_decomposition,
    find_fixed_point,
    principal_component_1,
    track_fixed_points,
)
from .patterns import (
    MemorySequence,
    argmax_memory,
    generate_orthogonal_memories,
    generate_rademacher_memories,
    overlap,
)
