"""
budgetmech: revenue-optimal auction machinery for budget-constrained bidders.

Bidders are additive over items and never pay more than their budget. The
package solves the budgeted-additive virtual welfare maximization problem
(BAVWM) exactly and 3-approximately, computes optimal mechanisms for small
discrete priors by linear programming, and runs the virtual welfare
mechanism that draws a virtual mapping and solves one BAVWM instance.

Main Components:
    - model: instances, allocations, normalization, objective and pricing rule
    - lp: exact/float simplex solver
    - gap: generalized assignment LP and its 2-approximate rounding
    - bavwm: exact search, LP relaxation, rounding and tripartition
    - mechanism: optimal mechanism LP, checkers, virtual welfare mechanism
    - harness: seeded generators, ratio benchmark, verification suite

Quick Start:
    >>> from budgetmech import BavwmInstance, solve_bavwm, SolveMethod
    >>> instance = BavwmInstance(2, 2, [[4, 1], [2, 3]], [3, 5], [1, 1], [[0, 0], [0, 0]])
    >>> result = solve_bavwm(instance, SolveMethod.EXACT)
    >>> result.objective_value
    6.0

    # Optimal mechanism for a one-bidder, one-item prior
    >>> from budgetmech import Prior, BidderPrior, TypeSpec, solve_optimal_mechanism
    >>> prior = Prior(1, [BidderPrior([TypeSpec([10], 2, 1)])])
    >>> solve_optimal_mechanism(prior, mode="exact").revenue
    Fraction(2, 1)
"""

from budgetmech.__version__ import __version__, __version_info__
from budgetmech.bavwm import (
    BavwmResult,
    BavwmSolver,
    SolveMethod,
    build_relaxation,
    partition_bins,
    round_to_split,
    solve_approx,
    solve_bavwm,
    solve_exact,
    solve_single_item,
    tripartition_select,
)
from budgetmech.config import SolverConfig, configure_solver, get_solver_config, solver_config
from budgetmech.exceptions import (
    BudgetMechError,
    GuaranteeViolationError,
    InfeasibleError,
    InstanceValidationError,
    SerializationError,
    SizeLimitError,
)
from budgetmech.gap import GapInstance, build_gap_from_bavwm, solve_gap_lp, st_round
from budgetmech.harness import (
    GeneratorConfig,
    bench_ratio,
    generate_instances,
    generate_priors,
    verify_suite,
)
from budgetmech.lp import LinearProgram, LpStatus, Sense, solve_lp
from budgetmech.mechanism import (
    BicMode,
    BidderPrior,
    MappingDistribution,
    Prior,
    TypeSpec,
    VirtualMapping,
    best_posted_price_revenue,
    check_bic,
    check_ex_post,
    run_virtual_welfare_mechanism,
    solve_optimal_mechanism,
)
from budgetmech.model import (
    UNASSIGNED,
    Allocation,
    BavwmInstance,
    PriceVector,
    SplitAllocation,
    normalize,
    objective,
    prices_from_allocation,
    split_objective,
    validate,
)
from budgetmech.numeric import ArithmeticMode

# scipy only backs optional cross-checks of the simplex solver
try:
    import scipy  # noqa: F401

    _ORACLE_AVAILABLE = True
except ImportError:
    _ORACLE_AVAILABLE = False

__all__ = [
    # Version info
    "__version__",
    "__version_info__",
    # Model
    "UNASSIGNED",
    "Allocation",
    "BavwmInstance",
    "PriceVector",
    "SplitAllocation",
    "normalize",
    "objective",
    "prices_from_allocation",
    "split_objective",
    "validate",
    "ArithmeticMode",
    # LP and GAP
    "LinearProgram",
    "LpStatus",
    "Sense",
    "solve_lp",
    "GapInstance",
    "build_gap_from_bavwm",
    "solve_gap_lp",
    "st_round",
    # BAVWM solvers
    "BavwmResult",
    "BavwmSolver",
    "SolveMethod",
    "build_relaxation",
    "partition_bins",
    "round_to_split",
    "solve_approx",
    "solve_bavwm",
    "solve_exact",
    "solve_single_item",
    "tripartition_select",
    # Mechanisms
    "BicMode",
    "BidderPrior",
    "MappingDistribution",
    "Prior",
    "TypeSpec",
    "VirtualMapping",
    "best_posted_price_revenue",
    "check_bic",
    "check_ex_post",
    "run_virtual_welfare_mechanism",
    "solve_optimal_mechanism",
    # Harness
    "GeneratorConfig",
    "bench_ratio",
    "generate_instances",
    "generate_priors",
    "verify_suite",
    # Configuration and errors
    "SolverConfig",
    "configure_solver",
    "get_solver_config",
    "solver_config",
    "BudgetMechError",
    "GuaranteeViolationError",
    "InfeasibleError",
    "InstanceValidationError",
    "SerializationError",
    "SizeLimitError",
]


def check_dependencies() -> dict:
    """
    Check availability of optional dependencies.

    Returns:
        Dictionary showing which optional features are available

    Examples:
        >>> deps = check_dependencies()
        >>> if not deps["oracle"]:
        ...     print("Install budgetmech[oracle] for scipy cross-checks")
    """
    return {
        "oracle": _ORACLE_AVAILABLE,
    }
