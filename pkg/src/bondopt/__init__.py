"""Optimal bond portfolios in a Gaussian Heath-Jarrow-Morton market.

Curves live on a uniform maturity grid; portfolios are linear functionals on
curves; the optimizer solves the budget multiplier by quadrature and builds
the replicating hedge step by step.
"""

from .curvespace import Curve, DualElement, MaturityGrid, h_inner, h_norm, pair, shift
from .errors import (
    BondOptError,
    BracketFailure,
    DegenerateFund,
    DomainViolation,
    FactorCountMismatch,
    GridExhausted,
    GridMismatch,
    NonAlignedShift,
    NonConvergence,
    NonFinite,
    NonPositiveCurve,
    ParseError,
    PositivityLost,
    SingularGram,
    StepTooLarge,
    UnsupportedKind,
    ValidationError,
)
from .market import (
    CappedLinearVolatility,
    FactorVolatility,
    HumpedVolatility,
    MarketModel,
    MarketPriceOfRisk,
    PolynomialVolatility,
    TimeGrid,
    build_model,
    flat_curve,
    nelson_siegel_curve,
    simulate_batch,
    simulate_euler,
    simulate_exact,
    tabulated_curve,
)
from .measure import RiskBudget, conditional_Q_expect, lognormal_expect, xi_path
from .optimizer import (
    Utility,
    custom_utility,
    exponential_utility,
    hedge_plan,
    log_utility,
    make_plan,
    make_utility,
    optimal_terminal_wealth,
    power_utility,
    quadratic_utility,
    solve_lambda,
)
from .portfolio import (
    StrategyPath,
    accumulate_gains,
    buy_and_hold,
    money_account,
    rollover_strategy,
    self_financing_residual,
)

__version__ = "0.1.0"
