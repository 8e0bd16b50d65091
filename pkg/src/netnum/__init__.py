"""First-order solvers for smooth penalized network utility maximization."""

from .problem import (
    ProblemInstance,
    SmoothnessCert,
    UtilityParams,
    certify,
    evaluate,
    exact_penalty_residual,
    logistic,
    objective_grad,
    objective_value,
    softplus,
    utility_grad,
    utility_value,
)
from .solvers import (
    IterateTrace,
    NonFiniteError,
    Solution,
    SolverConfig,
    default_step,
    expnum_crossover,
    momentum_coeff,
    project_nonneg,
    restart_check,
    run_agm,
    run_agm_restart,
    run_expnum,
    run_pgd,
    solve,
)
from .topology import (
    Flow,
    Link,
    RoutingMatrix,
    Topology,
    build_routing_matrix,
    generate_flows,
    load_flows,
    load_routing_matrix,
    load_topology,
    scale_capacities,
    shortest_path,
    synthesize_topology,
)
from .oracle import (
    OracleResult,
    analytic_single_link,
    finite_diff_grad,
    grid_refine_optimum,
    vertex_lp_optimum,
)

__version__ = "0.1.0"
