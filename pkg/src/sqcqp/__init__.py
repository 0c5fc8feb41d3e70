"""Global solutions and certificates for QCQPs with scalar-identity quadratic parts."""
from .barrier import SmoothConvexProgram, SolverResult, Status
from .certify import (
    FritzJohnCertificate,
    KktCertificate,
    Verdict,
    check_assumption2,
    check_h_condition_m2,
    check_slater,
    find_multipliers,
    verify_fritz_john,
    verify_kkt,
)
from .model import (
    DimensionError,
    ProblemFormatError,
    QuadForm,
    SQcqpProblem,
    aggregate,
    eval_quad,
    global_min_scalar_quadratic,
    grad,
    load_problem,
    save_problem,
)
from .msolve import NoCandidate, P1Instance, load_p1, solve_p1
from .relax import (
    RelaxSolution,
    RelaxationInfeasible,
    build_sdp2,
    build_socp,
    cone_member,
    export_shor_sdp,
    recover_and_check,
    solve_and_certify,
    solve_relaxation,
)
from .slemma import (
    OmegaWitness,
    StructuralError,
    build_omega_witness,
    check_multiplier_alternative,
    omega_convexity_probe,
    search_strict_point,
)

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "FritzJohnCertificate",
    "KktCertificate",
    "NoCandidate",
    "OmegaWitness",
    "P1Instance",
    "ProblemFormatError",
    "QuadForm",
    "RelaxSolution",
    "RelaxationInfeasible",
    "SQcqpProblem",
    "SmoothConvexProgram",
    "SolverResult",
    "Status",
    "StructuralError",
    "Verdict",
    "aggregate",
    "build_omega_witness",
    "build_sdp2",
    "build_socp",
    "check_assumption2",
    "check_h_condition_m2",
    "check_multiplier_alternative",
    "check_slater",
    "cone_member",
    "eval_quad",
    "export_shor_sdp",
    "find_multipliers",
    "global_min_scalar_quadratic",
    "grad",
    "load_p1",
    "load_problem",
    "omega_convexity_probe",
    "recover_and_check",
    "save_problem",
    "search_strict_point",
    "solve_and_certify",
    "solve_p1",
    "solve_relaxation",
    "verify_fritz_john",
    "verify_kkt",
]
