"""Proximal point algorithm with tan-sin resolvents on spheres and CAT(kappa) rescalings."""
from .diagnostics import (
    AsymptoticCenterResult,
    GFunction,
    asymptotic_center,
    g_concavity_check,
    g_evaluate,
    g_maximize,
    monotone_limit_check,
)
from .estimator import ProximalPointEstimator
from .functionals import ConvexFunctional, FunctionalDomainError, certify_convexity
from .geometry import (
    Geodesic,
    GeometryError,
    ModelSpace,
    SpherePoint,
    angle,
    comparison_inequality_oracle,
    convex_combination,
    distance,
    geodesic_point,
)
from .oracle import GridSpec, geodesic_golden_section, grid_argmin, reference_minimizer
from .ppa import (
    PpaError,
    PpaTrace,
    RunConfig,
    StepSchedule,
    existence_certificate,
    iterated_resolvent_run,
    rate_bound,
    run_ppa,
)
from .resolvent import InnerSolverConfig, ResolventError, ResolventResult, resolve

__version__ = "0.1.0"

__all__ = [
    "AsymptoticCenterResult", "ConvexFunctional", "FunctionalDomainError", "GFunction", "Geodesic",
    "GeometryError", "GridSpec", "InnerSolverConfig", "ModelSpace", "PpaError", "PpaTrace",
    "ProximalPointEstimator", "ResolventError", "ResolventResult", "RunConfig", "SpherePoint",
    "StepSchedule", "angle", "asymptotic_center", "certify_convexity", "comparison_inequality_oracle",
    "convex_combination", "distance", "existence_certificate", "g_concavity_check", "g_evaluate",
    "g_maximize", "geodesic_golden_section", "geodesic_point", "grid_argmin", "iterated_resolvent_run",
    "monotone_limit_check", "rate_bound", "reference_minimizer", "resolve", "run_ppa",
]
