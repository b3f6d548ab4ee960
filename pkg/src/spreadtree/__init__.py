"""Transaction-cost markets on finite scenario trees.

Paths with two-sided jumps, pathwise Stieltjes ledgers, consistent price
systems via exact linear feasibility, superhedging duality, and worst-case
expected-utility optimisation over model families.
"""

from .analysis import (
    VariationReport,
    best_dual_cps,
    check_optional_strong_supermartingale,
    cps_polytope_vertices,
    deflated_value_process,
    dual_bound,
    shadow_value_process,
    superhedge_price,
    variation_bounds,
)
from .cps import ConsistentPriceSystem, find_cps, verify_cps
from .errors import (
    ContractViolation,
    DomainError,
    HypothesisUnmet,
    MarketSpecError,
    SpreadtreeError,
)
from .integration import StepPath, certified_integral, flatten_eps, integrate, step_approximation
from .market import (
    ModelFamily,
    ScenarioTree,
    Strategy,
    Violation,
    admissibility_checkpoints,
    bond_ledger,
    bond_value,
    check_self_financing,
    is_admissible,
    liquidation_value,
    trade_sites,
)
from .optimize import (
    ConvergenceTable,
    SolveReport,
    SolveResult,
    Utility,
    convergence_demo,
    komlos_stabilize,
    robust_value,
    solve_robust,
)
from .paths import LadlagPath, PathEvent

__version__ = "0.1.0"

__all__ = [
    "LadlagPath",
    "PathEvent",
    "integrate",
    "flatten_eps",
    "step_approximation",
    "certified_integral",
    "StepPath",
    "ScenarioTree",
    "ModelFamily",
    "Strategy",
    "Violation",
    "bond_ledger",
    "bond_value",
    "liquidation_value",
    "is_admissible",
    "check_self_financing",
    "admissibility_checkpoints",
    "trade_sites",
    "ConsistentPriceSystem",
    "find_cps",
    "verify_cps",
    "shadow_value_process",
    "deflated_value_process",
    "check_optional_strong_supermartingale",
    "variation_bounds",
    "VariationReport",
    "superhedge_price",
    "dual_bound",
    "best_dual_cps",
    "cps_polytope_vertices",
    "Utility",
    "robust_value",
    "solve_robust",
    "SolveResult",
    "SolveReport",
    "komlos_stabilize",
    "convergence_demo",
    "ConvergenceTable",
    "SpreadtreeError",
    "DomainError",
    "ContractViolation",
    "HypothesisUnmet",
    "MarketSpecError",
]
