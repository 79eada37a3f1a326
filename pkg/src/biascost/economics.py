"""Cost ledger, planner objective and its analytic gradient.

The objective is welfare minus ``lam`` times (operating costs + bias-reduction
investment).  Gradients are assembled by the chain rule through allocation and
response time; ``finite_difference_check`` is the independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import (
    BiasProfile,
    Chain,
    CostParams,
    Scenario,
    _check_profile,
    chain,
)

__all__ = [
    "CostBreakdown",
    "CostParams",
    "GradientCheckReport",
    "GradientVector",
    "bias_reduction_cost",
    "finite_difference_check",
    "gradient_check",
    "gradient_comparison",
    "objective",
    "objective_gradient",
    "total_cost",
    "welfare_gradient",
]


class CostBreakdown(NamedTuple):
    resource: float
    response: float
    health: float

    @property
    def total(self) -> float:
        return self.resource + self.response + self.health


@dataclass(frozen=True)
class GradientVector:
    d_grad: np.ndarray
    a_grad: np.ndarray
    welfare_d_grad: np.ndarray
    welfare_a_grad: np.ndarray


def cost_breakdown(scenario: Scenario, c: Chain) -> CostBreakdown:
    costs = scenario.costs
    shortfall = np.maximum(0.0, costs.h_ref - c.h)
    return CostBreakdown(
        resource=math.fsum((costs.c_ra * c.ra).tolist()),
        response=math.fsum((costs.c_rt * c.rt**2).tolist()),
        health=math.fsum((costs.c_h * shortfall).tolist()),
    )


def total_cost(scenario: Scenario, profile: BiasProfile) -> CostBreakdown:
    """Resource, response-delay and health-shortfall costs at ``profile``."""
    _check_profile(scenario, profile)
    return cost_breakdown(scenario, chain(scenario, *profile.as_arrays()))


def _improvement(scenario: Scenario, d: np.ndarray, a: np.ndarray):
    arr = scenario.arrays
    return np.maximum(0.0, d - arr.d0), np.maximum(0.0, a - arr.a0)


def bias_reduction_cost(scenario: Scenario, profile: BiasProfile) -> float:
    """Quadratic cost of raising data quality and fairness above their baselines.

    Moving below a baseline costs nothing, so degrading a system is never rewarded.
    """
    _check_profile(scenario, profile)
    up_d, up_a = _improvement(scenario, *profile.as_arrays())
    costs = scenario.costs
    return math.fsum((costs.kappa_d * up_d**2 + costs.kappa_a * up_a**2).tolist())


def objective(scenario: Scenario, profile: BiasProfile) -> float:
    from .model import evaluate

    return evaluate(scenario, profile).objective


def _welfare_partials(scenario: Scenario, c: Chain):
    arr = scenario.arrays
    d, a = c.d, c.a
    # dRA/dD = RA* A, dRT/dD = -RT* / (D^2 A); symmetric in A.
    dra_dd = arr.ra_star * a
    dra_da = arr.ra_star * d
    drt_dd = -arr.rt_star / (d * d * a)
    drt_da = -arr.rt_star / (a * a * d)
    w = arr.weight
    wd = w * (c.ura * dra_dd + c.urt * drt_dd)
    wa = w * (c.ura * dra_da + c.urt * drt_da)
    return wd, wa, (dra_dd, dra_da, drt_dd, drt_da)


def welfare_gradient(scenario: Scenario, profile: BiasProfile) -> tuple[np.ndarray, np.ndarray]:
    """Marginal welfare of data quality and of fairness, per group."""
    _check_profile(scenario, profile)
    c = chain(scenario, *profile.as_arrays())
    wd, wa, _ = _welfare_partials(scenario, c)
    return wd, wa


@dataclass(frozen=True)
class Point:
    """Objective value, gradient and constraint ingredients at one profile (solver use)."""

    value: float
    grad_d: np.ndarray
    grad_a: np.ndarray
    welfare_grad_d: np.ndarray
    welfare_grad_a: np.ndarray
    health: np.ndarray
    health_grad_d: np.ndarray
    health_grad_a: np.ndarray
    ra_sum: float
    ra_grad_d: np.ndarray
    ra_grad_a: np.ndarray


def point(scenario: Scenario, d: np.ndarray, a: np.ndarray, *, strict: bool = True,
          health_cost: bool = True) -> Point:
    """Objective, gradient and constraint ingredients at one profile.

    With ``health_cost=False`` the shortfall hinge is left out of value and
    gradient; the solver then carries it through slack variables instead.
    """
    c = chain(scenario, d, a, strict=strict)
    costs = scenario.costs
    lam = scenario.lam
    arr = scenario.arrays
    w = arr.weight

    wd, wa, (dra_dd, dra_da, drt_dd, drt_da) = _welfare_partials(scenario, c)
    hd = c.h_ra * dra_dd + c.h_rt * drt_dd
    ha = c.h_ra * dra_da + c.h_rt * drt_da

    welfare = math.fsum((w * c.u).tolist())
    ledger = cost_breakdown(scenario, c)
    if not health_cost:
        ledger = ledger._replace(health=0.0)
    up_d, up_a = _improvement(scenario, c.d, c.a)
    cost_br = math.fsum((costs.kappa_d * up_d**2 + costs.kappa_a * up_a**2).tolist())
    value = welfare - lam * (ledger.resource + ledger.response + ledger.health + cost_br)

    # Hinge subgradient: zero at and above the reference health level.
    short = (c.h < costs.h_ref).astype(float) if health_cost else np.zeros_like(c.h)
    cd = (costs.c_ra * dra_dd + 2.0 * costs.c_rt * c.rt * drt_dd
          - costs.c_h * short * hd + 2.0 * costs.kappa_d * up_d)
    ca = (costs.c_ra * dra_da + 2.0 * costs.c_rt * c.rt * drt_da
          - costs.c_h * short * ha + 2.0 * costs.kappa_a * up_a)
    return Point(
        value=value,
        grad_d=wd - lam * cd,
        grad_a=wa - lam * ca,
        welfare_grad_d=wd,
        welfare_grad_a=wa,
        health=c.h,
        health_grad_d=hd,
        health_grad_a=ha,
        ra_sum=math.fsum(c.ra.tolist()),
        ra_grad_d=dra_dd,
        ra_grad_a=dra_da,
    )


def objective_gradient(scenario: Scenario, profile: BiasProfile) -> GradientVector:
    _check_profile(scenario, profile)
    pt = point(scenario, *profile.as_arrays())
    return GradientVector(pt.grad_d, pt.grad_a, pt.welfare_grad_d, pt.welfare_grad_a)


def batch_evaluate(scenario: Scenario, d: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, Chain]:
    """Objective for a stack of profiles (rows) plus the chain behind it.

    Rows whose utility is undefined come back as ``-inf``.
    """
    c = chain(scenario, d, a, strict=False)
    costs = scenario.costs
    welfare = np.sum(scenario.arrays.weight * c.u, axis=-1)
    up_d, up_a = _improvement(scenario, c.d, c.a)
    total = (np.sum(costs.c_ra * c.ra, axis=-1)
             + np.sum(costs.c_rt * c.rt**2, axis=-1)
             + np.sum(costs.c_h * np.maximum(0.0, costs.h_ref - c.h), axis=-1)
             + np.sum(costs.kappa_d * up_d**2 + costs.kappa_a * up_a**2, axis=-1))
    with np.errstate(invalid="ignore"):
        value = welfare - scenario.lam * total
    return np.where(np.isfinite(value), value, -np.inf), c


def _central_differences(scenario: Scenario, d: np.ndarray, a: np.ndarray, step: float):
    x = np.concatenate([d, a])
    n = d.size
    out = np.empty_like(x)
    for k in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[k] += step
        lo[k] -= step
        f_hi = point(scenario, hi[:n], hi[n:]).value
        f_lo = point(scenario, lo[:n], lo[n:]).value
        out[k] = (f_hi - f_lo) / (2.0 * step)
    return out[:n], out[n:]


def gradient_comparison(scenario: Scenario, profile: BiasProfile, step: float = 1e-5):
    """Analytic and central-difference objective gradients, each as ``(d_part, a_part)``."""
    _check_profile(scenario, profile)
    d, a = profile.as_arrays()
    pt = point(scenario, d, a)
    return (pt.grad_d, pt.grad_a), _central_differences(scenario, d, a, step)


def finite_difference_check(scenario: Scenario, profile: BiasProfile, step: float = 1e-5) -> float:
    """Largest ``|analytic - central difference| / (1 + |analytic|)`` over all coordinates.

    ``profile`` should sit at least ``2 * step`` inside the box and away from the
    health-cost and bias-reduction kinks.
    """
    return gradient_check(scenario, profile, step).max_rel_error


@dataclass(frozen=True)
class GradientCheckReport:
    groups: tuple[str, ...]
    profile: BiasProfile
    step: float
    max_rel_error: float
    analytic_d: tuple[float, ...]
    analytic_a: tuple[float, ...]
    numeric_d: tuple[float, ...]
    numeric_a: tuple[float, ...]


def gradient_check(scenario: Scenario, profile: BiasProfile, step: float = 1e-5) -> GradientCheckReport:
    (ad, aa), (nd, na) = gradient_comparison(scenario, profile, step)
    analytic = np.concatenate([ad, aa])
    numeric = np.concatenate([nd, na])
    return GradientCheckReport(
        groups=tuple(g.name for g in scenario.groups),
        profile=profile,
        step=step,
        max_rel_error=float(np.max(np.abs(analytic - numeric) / (1.0 + np.abs(analytic)))),
        analytic_d=tuple(ad.tolist()),
        analytic_a=tuple(aa.tolist()),
        numeric_d=tuple(nd.tolist()),
        numeric_a=tuple(na.tolist()),
    )
