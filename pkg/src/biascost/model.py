"""Structural model linking AI bias to allocation, response time, health and welfare.

All scenario inputs live here as frozen dataclasses so that every other module
(costs, solver, analysis, I/O) shares one validated description of the world.
Math helpers accept numpy arrays whose trailing axis indexes groups, which lets
the grid oracle evaluate thousands of profiles in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

#: Lower bound of the admissible box for data quality and fairness levels.
EPS_LB = 1e-3


class ModelError(ValueError):
    """Base class for invalid inputs to the model."""


class DomainError(ModelError):
    """An argument lies outside the domain of a model equation."""


class ScenarioError(ModelError):
    """A scenario field violates its declared constraint."""


def _real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ScenarioError(f"{name}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(f"{name}: must be finite, got {value!r}")
    return value


def _positive(value, name: str) -> float:
    value = _real(value, name)
    if value <= 0:
        raise ScenarioError(f"{name}: must be > 0, got {value!r}")
    return value


def _nonneg(value, name: str) -> float:
    value = _real(value, name)
    if value < 0:
        raise ScenarioError(f"{name}: must be >= 0, got {value!r}")
    return value


def _unit_interval(value, name: str) -> float:
    value = _real(value, name)
    if not 0 < value <= 1:
        raise ScenarioError(f"{name}: must lie in (0, 1], got {value!r}")
    return value


class HealthVariant(str, Enum):
    MULTIPLICATIVE = "multiplicative"
    ADDITIVE = "additive"


@dataclass(frozen=True)
class GroupParams:
    """One population group and its baseline exposure to biased allocation."""

    name: str
    population: float
    eir: float
    severity: float
    rt_star: float
    d_baseline: float = 1.0
    a_baseline: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ScenarioError(f"name: expected a non-empty string, got {self.name!r}")
        where = f"groups[{self.name}]"
        for attr in ("population", "eir", "severity", "rt_star"):
            object.__setattr__(self, attr, _positive(getattr(self, attr), f"{where}.{attr}"))
        for attr in ("d_baseline", "a_baseline"):
            object.__setattr__(self, attr, _unit_interval(getattr(self, attr), f"{where}.{attr}"))
        object.__setattr__(self, "weight", _nonneg(self.weight, f"{where}.weight"))

    @property
    def need(self) -> float:
        return self.population * self.eir * self.severity


@dataclass(frozen=True)
class FunctionalForms:
    """Parameters of the health production and utility functions.

    ``theta`` may be a single scalar; a scenario broadcasts it to every group.
    """

    theta: tuple[float, ...] = (1.0,)
    beta: float = 0.5
    kappa: float = 0.1
    rho: float = 0.5
    h_variant: HealthVariant = HealthVariant.MULTIPLICATIVE

    def __post_init__(self):
        theta = self.theta
        if isinstance(theta, (int, float, np.floating)) and not isinstance(theta, bool):
            theta = (theta,)
        theta = tuple(_positive(t, f"forms.theta[{k}]") for k, t in enumerate(theta))
        if not theta:
            raise ScenarioError("forms.theta: must not be empty")
        object.__setattr__(self, "theta", theta)
        beta = _real(self.beta, "forms.beta")
        if not 0 < beta < 1:
            raise ScenarioError(f"forms.beta: must lie in (0, 1), got {beta!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "kappa", _positive(self.kappa, "forms.kappa"))
        object.__setattr__(self, "rho", _nonneg(self.rho, "forms.rho"))
        try:
            object.__setattr__(self, "h_variant", HealthVariant(self.h_variant))
        except ValueError:
            raise ScenarioError(
                f"forms.h_variant: must be one of "
                f"{[v.value for v in HealthVariant]}, got {self.h_variant!r}"
            ) from None


@dataclass(frozen=True)
class CostParams:
    """Coefficients of the cost ledger and of bias-reduction investments."""

    c_ra: float = 0.0
    c_rt: float = 0.0
    c_h: float = 0.0
    h_ref: float = 0.0
    kappa_d: float = 0.0
    kappa_a: float = 0.0

    def __post_init__(self):
        for attr in ("c_ra", "c_rt", "c_h", "h_ref", "kappa_d", "kappa_a"):
            object.__setattr__(self, attr, _nonneg(getattr(self, attr), f"costs.{attr}"))


@dataclass(frozen=True)
class SolverSettings:
    max_iters: int = 10000
    grad_tol: float = 1e-8
    n_starts: int = 5
    seed: int = 0
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    penalty_mu0: float = 10.0
    penalty_growth: float = 10.0
    penalty_mu_max: float = 1e8

    def __post_init__(self):
        for attr in ("max_iters", "n_starts", "seed"):
            value = getattr(self, attr)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ScenarioError(f"solver.{attr}: expected an integer, got {value!r}")
            object.__setattr__(self, attr, int(value))
        if self.max_iters < 1:
            raise ScenarioError(f"solver.max_iters: must be >= 1, got {self.max_iters}")
        if self.n_starts < 1:
            raise ScenarioError(f"solver.n_starts: must be >= 1, got {self.n_starts}")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError(f"solver.seed: must fit in an unsigned 64-bit integer, got {self.seed}")
        for attr in ("grad_tol", "penalty_mu0", "penalty_mu_max"):
            object.__setattr__(self, attr, _positive(getattr(self, attr), f"solver.{attr}"))
        for attr in ("armijo_c", "backtrack_factor"):
            value = _real(getattr(self, attr), f"solver.{attr}")
            if not 0 < value < 1:
                raise ScenarioError(f"solver.{attr}: must lie in (0, 1), got {value!r}")
            object.__setattr__(self, attr, value)
        growth = _real(self.penalty_growth, "solver.penalty_growth")
        if growth <= 1:
            raise ScenarioError(f"solver.penalty_growth: must be > 1, got {growth!r}")
        object.__setattr__(self, "penalty_growth", growth)
        if self.penalty_mu_max < self.penalty_mu0:
            raise ScenarioError("solver.penalty_mu_max: must be >= penalty_mu0")


@dataclass(frozen=True)
class _Arrays:
    ra_star: np.ndarray
    rt_star: np.ndarray
    theta: np.ndarray
    weight: np.ndarray
    d0: np.ndarray
    a0: np.ndarray


@dataclass(frozen=True)
class Scenario:
    """Complete, validated input to every computation in the package."""

    groups: tuple[GroupParams, ...]
    forms: FunctionalForms = field(default_factory=FunctionalForms)
    costs: CostParams = field(default_factory=CostParams)
    ra_total: float = 1.0
    ra_star_total: float | None = None
    lam: float = 0.0
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise ScenarioError("groups: at least one group is required")
        for g in groups:
            if not isinstance(g, GroupParams):
                raise ScenarioError(f"groups: expected GroupParams, got {type(g).__name__}")
        names = [g.name for g in groups]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ScenarioError(f"groups: names must be unique, duplicated {dupes}")
        object.__setattr__(self, "groups", groups)

        theta = self.forms.theta
        if len(theta) == 1 and len(groups) > 1:
            object.__setattr__(
                self, "forms", FunctionalForms(theta * len(groups), self.forms.beta,
                                               self.forms.kappa, self.forms.rho,
                                               self.forms.h_variant))
        elif len(theta) != len(groups):
            raise ScenarioError(
                f"forms.theta: expected 1 or {len(groups)} values, got {len(theta)}")

        ra_total = _positive(self.ra_total, "budget.ra_total")
        object.__setattr__(self, "ra_total", ra_total)
        ra_star_total = ra_total if self.ra_star_total is None else _positive(
            self.ra_star_total, "budget.ra_star_total")
        if ra_star_total > ra_total:
            raise ScenarioError(
                f"budget.ra_star_total: must be <= ra_total ({ra_total!r}), got {ra_star_total!r}")
        object.__setattr__(self, "ra_star_total", ra_star_total)
        object.__setattr__(self, "lam", _nonneg(self.lam, "lambda"))

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @cached_property
    def arrays(self) -> _Arrays:
        need = np.array([g.need for g in self.groups])
        out = _Arrays(
            ra_star=self.ra_star_total * need / need.sum(),
            rt_star=np.array([g.rt_star for g in self.groups]),
            theta=np.array(self.forms.theta),
            weight=np.array([g.weight for g in self.groups]),
            d0=np.array([g.d_baseline for g in self.groups]),
            a0=np.array([g.a_baseline for g in self.groups]),
        )
        for arr in vars(out).values():
            arr.flags.writeable = False
        return out

    def baseline_profile(self) -> BiasProfile:
        return BiasProfile(tuple(g.d_baseline for g in self.groups),
                           tuple(g.a_baseline for g in self.groups))

    def unbiased_profile(self) -> BiasProfile:
        return BiasProfile.uniform(self.n_groups, 1.0, 1.0)


@dataclass(frozen=True)
class BiasProfile:
    """Data-quality and algorithmic-fairness levels, one pair per group."""

    d: tuple[float, ...]
    a: tuple[float, ...]

    def __post_init__(self):
        d = tuple(float(x) for x in self.d)
        a = tuple(float(x) for x in self.a)
        if len(d) != len(a):
            raise DomainError(f"profile: d has {len(d)} entries but a has {len(a)}")
        for label, values in (("d", d), ("a", a)):
            for k, x in enumerate(values):
                if not EPS_LB <= x <= 1:
                    raise DomainError(f"profile.{label}[{k}]: must lie in [{EPS_LB}, 1], got {x!r}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "a", a)

    @classmethod
    def uniform(cls, n: int, d: float, a: float) -> BiasProfile:
        return cls((d,) * n, (a,) * n)

    @classmethod
    def from_arrays(cls, d, a) -> BiasProfile:
        return cls(tuple(np.asarray(d, dtype=float).tolist()),
                   tuple(np.asarray(a, dtype=float).tolist()))

    def __len__(self) -> int:
        return len(self.d)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.d), np.array(self.a)


def _check_profile(scenario: Scenario, profile: BiasProfile) -> None:
    if len(profile) != scenario.n_groups:
        raise DomainError(
            f"profile: expected {scenario.n_groups} groups, got {len(profile)}")


# --- scalar and vector equations ---------------------------------------------------


def bias_factor(d: float, a: float) -> float:
    """Multiplicative bias ``1 / (d * a)``; equals 1 only for perfect data and fairness."""
    for label, x in (("d", d), ("a", a)):
        if not 0 < x <= 1:
            raise DomainError(f"{label}: must lie in (0, 1], got {x!r}")
    return 1.0 / (d * a)


def ideal_allocation(scenario: Scenario) -> np.ndarray:
    """Need-proportional split of ``ra_star_total`` by population x incident rate x severity."""
    return np.array(scenario.arrays.ra_star)


def _lengths_match(vec: np.ndarray, profile: BiasProfile) -> None:
    if vec.shape != (len(profile),):
        raise DomainError(f"length mismatch: {vec.shape[0] if vec.ndim else 0} values "
                          f"for a profile of {len(profile)} groups")


def realized_allocation(ra_star: Sequence[float], profile: BiasProfile) -> np.ndarray:
    ra_star = np.asarray(ra_star, dtype=float)
    _lengths_match(ra_star, profile)
    d, a = profile.as_arrays()
    return ra_star * d * a


def realized_response_time(rt_star: Sequence[float], profile: BiasProfile) -> np.ndarray:
    rt_star = np.asarray(rt_star, dtype=float)
    _lengths_match(rt_star, profile)
    d, a = profile.as_arrays()
    return rt_star / (d * a)


def health_outcome(ra: float, rt: float, forms: FunctionalForms, group_index: int = 0) -> float:
    """Health level produced by ``ra`` resources arriving after ``rt`` minutes.

    The multiplicative form is ``theta * ra**beta * exp(-kappa * rt)``; the additive
    one is ``theta * ra**beta - kappa * rt`` and may go negative.
    """
    if ra <= 0 or rt <= 0:
        raise DomainError(f"health_outcome: ra and rt must be > 0, got ra={ra!r}, rt={rt!r}")
    theta = forms.theta[group_index]
    if forms.h_variant is HealthVariant.MULTIPLICATIVE:
        return theta * ra**forms.beta * math.exp(-forms.kappa * rt)
    return theta * ra**forms.beta - forms.kappa * rt


def health_partials(ra: float, rt: float, forms: FunctionalForms,
                    group_index: int = 0) -> tuple[float, float]:
    """Return ``(dh/dRA, dh/dRT)`` at ``(ra, rt)``."""
    h = health_outcome(ra, rt, forms, group_index)
    beta, kappa = forms.beta, forms.kappa
    if forms.h_variant is HealthVariant.MULTIPLICATIVE:
        return beta * h / ra, -kappa * h
    return forms.theta[group_index] * beta * ra ** (beta - 1.0), -kappa


def utility(h: float, forms: FunctionalForms) -> float:
    """CRRA utility of a health level (log utility at ``rho == 1``)."""
    rho = forms.rho
    if rho == 0:
        return float(h)
    if h <= 0:
        raise DomainError(f"utility: health must be > 0 when rho > 0, got {h!r}")
    if rho == 1:
        return math.log(h)
    return h ** (1.0 - rho) / (1.0 - rho)


def marginal_utility(h: float, forms: FunctionalForms) -> float:
    rho = forms.rho
    if rho == 0:
        return 1.0
    if h <= 0:
        raise DomainError(f"marginal_utility: health must be > 0 when rho > 0, got {h!r}")
    return h ** (-rho)


# --- vectorised chain ----------------------------------------------------------------


@dataclass(frozen=True)
class Chain:
    """Intermediate quantities of the bias -> welfare chain for one or many profiles.

    Arrays share the shape of the ``d``/``a`` inputs; the last axis indexes groups.
    ``ura`` and ``urt`` hold ``u'(H) * dh/dRA`` and ``u'(H) * dh/dRT`` computed
    in a form that stays finite when ``H`` underflows.
    """

    d: np.ndarray
    a: np.ndarray
    ra: np.ndarray
    rt: np.ndarray
    h: np.ndarray
    u: np.ndarray
    h_ra: np.ndarray
    h_rt: np.ndarray
    ura: np.ndarray
    urt: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.all(np.isfinite(self.u), axis=-1)


def chain(scenario: Scenario, d, a, *, strict: bool = True) -> Chain:
    """Evaluate allocation, response time, health and utility for profile arrays.

    With ``strict`` a non-positive health level under ``rho > 0`` raises
    ``DomainError``; otherwise the offending utilities are NaN.
    """
    arr = scenario.arrays
    forms = scenario.forms
    beta, kappa, rho = forms.beta, forms.kappa, forms.rho
    d = np.asarray(d, dtype=float)
    a = np.asarray(a, dtype=float)
    p = d * a
    ra = arr.ra_star * p
    rt = arr.rt_star / p

    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        if forms.h_variant is HealthVariant.MULTIPLICATIVE:
            log_h = np.log(arr.theta) + beta * np.log(ra) - kappa * rt
            h = np.exp(log_h)
            if rho == 0:
                u = h
                scaled = h
            elif rho == 1:
                u = log_h
                scaled = np.ones_like(h)
            else:
                scaled = np.exp((1.0 - rho) * log_h)
                u = scaled / (1.0 - rho)
            h_ra = beta * h / ra
            h_rt = -kappa * h
            ura = beta * scaled / ra
            urt = -kappa * scaled
        else:
            ra_pow = ra**beta
            h = arr.theta * ra_pow - kappa * rt
            h_ra = arr.theta * beta * ra_pow / ra
            h_rt = np.full_like(h, -kappa)
            if rho == 0:
                u = h
                up = np.ones_like(h)
            else:
                bad = h <= 0
                if strict and np.any(bad):
                    k = int(np.flatnonzero(bad.reshape(-1))[0]) % scenario.n_groups
                    raise DomainError(
                        f"group {scenario.groups[k].name!r}: additive health "
                        f"{float(h.reshape(-1)[np.flatnonzero(bad.reshape(-1))[0]])!r} "
                        "is not positive, utility undefined for rho > 0")
                hp = np.where(bad, np.nan, h)
                u = np.log(hp) if rho == 1 else hp ** (1.0 - rho) / (1.0 - rho)
                up = hp ** (-rho)
            ura = up * h_ra
            urt = up * h_rt
    return Chain(d=d, a=a, ra=ra, rt=rt, h=h, u=u, h_ra=h_ra, h_rt=h_rt, ura=ura, urt=urt)


def social_welfare(scenario: Scenario, profile: BiasProfile) -> float:
    """Weighted sum of group utilities."""
    _check_profile(scenario, profile)
    c = chain(scenario, *profile.as_arrays())
    return math.fsum((scenario.arrays.weight * c.u).tolist())


# --- reports -------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupOutcome:
    group: str
    ra: float
    rt: float
    bias_b: float
    health: float
    utility: float


@dataclass(frozen=True)
class EvaluationReport:
    profile: BiasProfile
    per_group: tuple[GroupOutcome, ...]
    welfare: float
    cost_resource: float
    cost_response: float
    cost_health: float
    cost_bias_reduction: float
    objective: float
    budget_used: float

    @property
    def cost_total(self) -> float:
        return self.cost_resource + self.cost_response + self.cost_health


def evaluate(scenario: Scenario, profile: BiasProfile) -> EvaluationReport:
    """Run the full chain for one profile and attach the cost ledger and objective."""
    from .economics import bias_reduction_cost, cost_breakdown

    _check_profile(scenario, profile)
    c = chain(scenario, *profile.as_arrays())
    weight = scenario.arrays.weight
    welfare = math.fsum((weight * c.u).tolist())
    costs = cost_breakdown(scenario, c)
    cost_br = bias_reduction_cost(scenario, profile)
    objective = welfare - scenario.lam * (costs.resource + costs.response + costs.health + cost_br)
    per_group = tuple(
        GroupOutcome(
            group=g.name,
            ra=float(c.ra[k]),
            rt=float(c.rt[k]),
            bias_b=bias_factor(profile.d[k], profile.a[k]),
            health=float(c.h[k]),
            utility=float(c.u[k]),
        )
        for k, g in enumerate(scenario.groups)
    )
    return EvaluationReport(
        profile=profile,
        per_group=per_group,
        welfare=welfare,
        cost_resource=costs.resource,
        cost_response=costs.response,
        cost_health=costs.health,
        cost_bias_reduction=cost_br,
        objective=objective,
        budget_used=math.fsum(c.ra.tolist()),
    )
