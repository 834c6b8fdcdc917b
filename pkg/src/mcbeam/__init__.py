"""Multi-group multicast transmit beamforming solvers and benchmarks."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DimensionMismatch,
    Infeasible,
    InfeasibleStart,
    McbeamError,
    NotPositiveDefinite,
    ParseError,
    RandomizationFailed,
    TooFewAntennas,
    UnequalTargets,
    ZeroMatrix,
)
from .scenario import (  # noqa: F401
    ChannelSet,
    Scenario,
    SystemConfig,
    default_scenario,
    gen_normalized_channels,
    gen_pathloss_channels,
    load_scenario,
    make_config,
    save_scenario,
)
from .qos import (  # noqa: F401
    GroupWeights,
    StructuredSolution,
    assemble_beamformer,
    build_R,
    build_R_minus,
    duality_check,
    min_sinr_ratio,
    power_identity,
    sinr,
    structure_residual,
    total_power,
    unicast_reference,
)
from .multipliers import (  # noqa: F401
    asymptotic_R,
    asymptotic_lambda,
    fixed_point_lambda,
)
from .weights import (  # noqa: F401
    ReducedProblem,
    build_reduced_problem,
    randomize_and_scale,
    solve_qos,
    solve_weights_sca,
    solve_weights_sdr,
)
from .direct import direct_sca_qos, direct_sdr_qos, qos_sdr_lower_bound  # noqa: F401
from .mmf import (  # noqa: F401
    asym_mmf_sca,
    assemble_mmf,
    cf_asym_mmf,
    mmf_upper_bound,
    solve_mmf_bisection,
)
from .report import SolverReport  # noqa: F401

