"""Kantorovich potential sets of finite transport instances: certificates, diameters and rate experiments."""

from .core import (
    Box,
    CostConstants,
    CostSpec,
    DiscreteMeasure,
    Instance,
    SchemaError,
    c_transform,
    c_transform_bar,
    cost_eval,
    cost_grad_x,
    cost_matrix,
    dual_gap,
    estimate_cost_constants,
    load_instance,
)
from .errors import (
    DomainError,
    FeasibilityError,
    InvariantViolation,
    NegativeCycleError,
    PothullError,
    PreconditionError,
    SolverError,
    UnsupportedOperation,
)
from .geometry import GridPath, PolyCurve, convex_c_omega, curve_bound_rhs, curve_stats, grid_path, hausdorff
from .potentials import (
    ChainGraph,
    PotentialCertificate,
    build_chain_graph,
    certify,
    compute_lambda,
    diameter_linf,
    diameter_lq,
    is_member,
    uniqueness_predictor,
)
from .solver import OptimalFace, TransportPlan, optimal_face, solve, verify_optimal

__version__ = "0.1.0"
