"""Economic cost of AI bias in emergency resource allocation.

Evaluate how data-quality and fairness deficits distort resource allocation,
response times and health, price the resulting welfare loss, and solve for the
investment in bias reduction that maximises welfare net of costs.
"""

from .analysis import FrontierPoint, WelfareLossReport, elasticities, frontier, welfare_loss
from .economics import (
    CostBreakdown,
    GradientVector,
    bias_reduction_cost,
    finite_difference_check,
    gradient_check,
    objective,
    objective_gradient,
    total_cost,
    welfare_gradient,
)
from .model import (
    EPS_LB,
    BiasProfile,
    CostParams,
    DomainError,
    EvaluationReport,
    FunctionalForms,
    GroupParams,
    HealthVariant,
    ModelError,
    Scenario,
    ScenarioError,
    SolverSettings,
    bias_factor,
    evaluate,
    health_outcome,
    ideal_allocation,
    realized_allocation,
    realized_response_time,
    social_welfare,
    utility,
)
from .scenario_io import dumps_scenario, load_scenario, loads_scenario, write_report
from .solver import (
    OracleResult,
    SolutionReport,
    SolverError,
    grid_oracle,
    optimize,
    optimize_with_fairness,
)

__version__ = "0.1.0"
