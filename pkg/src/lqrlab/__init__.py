"""Sample-complexity laboratory for linear-quadratic control.

Exact Riccati solutions, least-squares identification with certainty
equivalence, approximate dynamic programming, and direct policy search,
all driven by one episodic sampling oracle so their sample counts are
comparable.
"""

from .errors import (
    LqrLabError,
    ContractViolationError,
    IllPosedCostError,
    BudgetExhaustedError,
    NoStabilizingSolutionError,
    InstabilityError,
    InsufficientExcitationError,
    InsufficientDataError,
    NonExtractablePolicyError,
    ConfigurationError,
)
from .lds import (
    LinearSystem,
    QuadraticCost,
    LqrInstance,
    LinearGain,
    TimeVaryingGains,
    GaussianLinear,
    Trajectory,
    EpisodeBudget,
    EpisodicOracle,
    step,
    rollout,
    trajectory_cost,
    load_instance,
    dump_instance,
)
from .riccati import (
    DareSolution,
    FiniteHorizonSolution,
    StabilityReport,
    dare_solve,
    finite_horizon_solve,
    gain_from_value,
    stability_report,
    discrete_lyapunov,
    closed_loop_average_cost,
    relative_suboptimality,
    rhc_action,
)

__version__ = "0.1.0"
