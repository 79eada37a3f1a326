"""Welfare loss from bias, efficiency-equity frontiers and welfare elasticities."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .economics import welfare_gradient
from .model import BiasProfile, ModelError, Scenario, evaluate
from .solver import SolutionReport, optimize_with_fairness

__all__ = [
    "FrontierPoint",
    "GroupLoss",
    "WelfareLossReport",
    "elasticities",
    "frontier",
    "welfare_loss",
]


@dataclass(frozen=True)
class GroupLoss:
    group: str
    delta_ra: float
    delta_rt: float
    delta_bias_b: float
    delta_h: float
    delta_u: float


@dataclass(frozen=True)
class WelfareLossReport:
    """Unbiased minus biased values for welfare, costs and each group's outcomes.

    Every ``delta_*`` is ``value at D=A=1`` minus ``value at the baselines``, so
    ``delta_w >= 0`` is the welfare lost to bias and ``delta_rt <= 0`` is the
    delay it adds.  Bias-reduction investment is not charged on either side.
    """

    w_unbiased: float
    w_biased: float
    delta_w: float
    cost_total_unbiased: float
    cost_total_biased: float
    delta_cost_total: float
    per_group: tuple[GroupLoss, ...]


def welfare_loss(scenario: Scenario) -> WelfareLossReport:
    biased = evaluate(scenario, scenario.baseline_profile())
    unbiased = evaluate(scenario, scenario.unbiased_profile())
    per_group = tuple(
        GroupLoss(
            group=u.group,
            delta_ra=u.ra - b.ra,
            delta_rt=u.rt - b.rt,
            delta_bias_b=u.bias_b - b.bias_b,
            delta_h=u.health - b.health,
            delta_u=u.utility - b.utility,
        )
        for u, b in zip(unbiased.per_group, biased.per_group)
    )
    return WelfareLossReport(
        w_unbiased=unbiased.welfare,
        w_biased=biased.welfare,
        delta_w=unbiased.welfare - biased.welfare,
        cost_total_unbiased=unbiased.cost_total,
        cost_total_biased=biased.cost_total,
        delta_cost_total=unbiased.cost_total - biased.cost_total,
        per_group=per_group,
    )


@dataclass(frozen=True)
class FrontierPoint:
    disparity_cap: float | None
    objective: float
    realized_disparity: float
    converged: bool


def frontier(scenario: Scenario, caps: Sequence[float | None], *, workers: int = 1,
             solutions: list[SolutionReport] | None = None) -> list[FrontierPoint]:
    """Best objective under each health-disparity cap, in the order given.

    ``None`` (or ``inf``) is the uncapped point.  Caps must be ascending with the
    uncapped entry last.  Pass a list as ``solutions`` to collect the full reports.
    """
    keys = [math.inf if c is None else float(c) for c in caps]
    if any(k < 0 for k in keys):
        raise ValueError("caps: every disparity cap must be >= 0")
    if any(b < a for a, b in zip(keys, keys[1:])):
        raise ValueError(f"caps: must be sorted ascending, got {list(caps)}")

    def run(cap):
        return optimize_with_fairness(scenario, cap)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, caps))
    else:
        reports = [run(c) for c in caps]
    if solutions is not None:
        solutions.extend(reports)
    return [
        FrontierPoint(
            disparity_cap=rep.disparity_cap,
            objective=rep.best_objective,
            realized_disparity=rep.realized_disparity,
            converged=rep.converged,
        )
        for rep in reports
    ]


def elasticities(scenario: Scenario, profile: BiasProfile) -> tuple[np.ndarray, np.ndarray]:
    """Welfare elasticities with respect to each group's data quality and fairness."""
    w = evaluate(scenario, profile).welfare
    if abs(w) < 1e-12:
        raise ModelError(f"elasticities: welfare {w!r} is too close to zero to normalise by")
    wd, wa = welfare_gradient(scenario, profile)
    d, a = profile.as_arrays()
    return wd * d / w, wa * a / w
