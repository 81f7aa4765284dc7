"""Co-optimization of orbital depot placement and servicing routes."""

from .astro import (
    CanonicalScale,
    CircularOrbit,
    OrbitGradient,
    PropulsionParams,
    edelbaum_dv,
    edelbaum_dv_grad,
    emleo_factor,
    emleo_factor_grad,
    launch_deploy_dv,
    tilt_angle,
    tilt_angle_grad,
)
from .framework import (
    SolveConfig,
    SolveReport,
    alternate,
    kmeans_init,
    placement_distance,
)
from .instances import generate_instance, load_gps18, load_instance, save_instance
from .locate import (
    NlpResult,
    RouteConstants,
    minimize_placement,
    objective_and_grad,
    route_constants,
    total_emleo,
)
from .model import (
    DepotPlacement,
    Instance,
    IndexSets,
    Route,
    RoutingSolution,
    Satellite,
    build_index_sets,
    route_mass_profile,
    validate_solution,
)
from .oracle import OracleResult, enumerate_optimal
from .routing import BnbResult, BnbStatus, MilpModel, build_milp, solve_bnb

__version__ = "0.1.0"

__all__ = [
    "CanonicalScale",
    "CircularOrbit",
    "OrbitGradient",
    "PropulsionParams",
    "edelbaum_dv",
    "edelbaum_dv_grad",
    "emleo_factor",
    "emleo_factor_grad",
    "launch_deploy_dv",
    "tilt_angle",
    "tilt_angle_grad",
    "SolveConfig",
    "SolveReport",
    "alternate",
    "kmeans_init",
    "placement_distance",
    "generate_instance",
    "load_gps18",
    "load_instance",
    "save_instance",
    "NlpResult",
    "RouteConstants",
    "minimize_placement",
    "objective_and_grad",
    "route_constants",
    "total_emleo",
    "DepotPlacement",
    "Instance",
    "IndexSets",
    "Route",
    "RoutingSolution",
    "Satellite",
    "build_index_sets",
    "route_mass_profile",
    "validate_solution",
    "OracleResult",
    "enumerate_optimal",
    "BnbResult",
    "BnbStatus",
    "MilpModel",
    "build_milp",
    "solve_bnb",
    "__version__",
]
