"""Metric multi-cover: k-cover clients with server balls, minimizing the sum of radius^alpha."""

from .errors import (
    AvailabilityError,
    DemandRangeError,
    GuardError,
    HostingError,
    InfeasibleError,
    InputError,
    InvariantViolation,
    MMCError,
    SchemaError,
    SymmetryError,
    TriangleError,
)
from .metric import (
    DemandProfile,
    MetricInstance,
    NeighborhoodIndex,
    RadiusAssignment,
    build_neighborhood_index,
    coverage_count,
    coverage_counts,
    is_feasible,
    solution_cost,
)
from .onecover import OneCoverProblem, cover_bounded, cover_exact, cover_greedy
from .oracle import OracleResult, exact_mmc, exact_tmmc
from .outer import (
    OuterCover,
    OuterCoverBundle,
    bound_outer_cover_servers,
    extract_outer_covers,
    host_outer_cover,
    tmmc_outer_covers,
    validate_outer_cover,
)
from .partition import compute_server_subsets_nonuniform, compute_server_subsets_uniform
from .solvers import SolveReport, TmmcPlan, solve_mmc, solve_nonuniform, solve_tmmc

__version__ = "0.1.0"
