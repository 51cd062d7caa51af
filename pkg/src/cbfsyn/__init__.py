"""Co-design of quadratic control barrier functions and linear feedback for
discrete-time linear systems, via semidefinite programming.

The package synthesizes a barrier b(x) = 1 - x'Omega^{-1}x together with a
feedback u = Kx from convex programs, bounds finite-horizon exit
probabilities through a supermartingale argument, runs an online safety
filter, and validates every certificate analytically and by simulation.
"""

from .model import (
    CertMode,
    Certificate,
    FreeInput,
    NoiseKind,
    NoiseModel,
    NormBallInput,
    Plant,
    PolytopeInput,
    SafetySpec,
    SolverStatus,
    ValidationReport,
    barrier_value,
    controller,
    validate_problem,
)
from .conic import (
    ConicProgram,
    LinearConstraint,
    LmiBlock,
    MatrixVar,
    Objective,
    ScalarVar,
    Solution,
    SolverSettings,
    bisect_lambda,
    lmi_residuals,
    solve,
)
from .synth import (
    FiniteHorizonSpec,
    FrobeniusSpec,
    GelbrichSpec,
    InfiniteHorizonSpec,
    bisect_infinite_horizon,
    build_finite_horizon,
    build_finite_horizon_robust,
    build_gelbrich_robust,
    build_infinite_horizon,
    extract_certificate,
    synthesize_finite_horizon,
    synthesize_infinite_horizon,
)
from .risk import (
    BoundCase,
    DeltaBranch,
    MartingaleTrace,
    RiskBound,
    exit_bound,
    inflate_support,
    select_delta,
    zeta,
)
from .safety_filter import (
    FilterParams,
    FilterResult,
    Trajectory,
    filter_params,
    run_closed_loop,
    solve_filter,
)
from .verify import (
    ContainmentMargins,
    MCResult,
    VerificationReport,
    check_containment,
    expected_decrease_oracle,
    full_report,
    invariance_oracle,
    monte_carlo_exit,
    noise_sampler,
    run_generator,
)

__version__ = "0.1.0"
