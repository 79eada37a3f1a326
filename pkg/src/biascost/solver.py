"""Constrained maximisation of the planner objective over data quality and fairness.

``optimize`` runs projected gradient ascent with Armijo backtracking from a fixed
set of starting profiles.  The budget row and the optional health-disparity cap
are handled by a quadratic exterior penalty whose weight escalates between
stages; multiplier estimates are carried between stages so the penalty weight
does not have to reach ill-conditioned values.  ``grid_oracle`` is the brute
force reference used to validate it on small instances.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from .economics import batch_evaluate, point
from .model import (
    EPS_LB,
    BiasProfile,
    DomainError,
    EvaluationReport,
    Scenario,
    SolverSettings,
    evaluate,
)

__all__ = [
    "OracleResult",
    "SolutionReport",
    "SolverError",
    "SolverSettings",
    "StartResult",
    "grid_oracle",
    "optimize",
    "optimize_with_fairness",
]

MAX_STAGES = 40
MAX_ORACLE_GROUPS = 3
TIE_RTOL = 1e-12
# Slack for the value test when the change in objective is below rounding noise.
_VALUE_NOISE = 64 * np.finfo(float).eps


class SolverError(RuntimeError):
    """No starting point produced a finite objective."""


@dataclass(frozen=True)
class StartResult:
    label: str
    d: tuple[float, ...]
    a: tuple[float, ...]
    objective: float
    iterations: int
    stages: int
    penalty_mu: float
    projected_grad_norm: float
    budget_violation: float
    disparity_excess: float
    feasible: bool
    converged: bool
    objective_trace: tuple[float, ...]


@dataclass(frozen=True)
class SolutionReport:
    best_profile: BiasProfile
    best_objective: float
    evaluation: EvaluationReport
    converged: bool
    best_start: str
    iterations_per_start: tuple[int, ...]
    projected_grad_norm: float
    budget_violation: float
    disparity_cap: float | None
    realized_disparity: float
    starts_summary: tuple[float, ...]
    starts: tuple[StartResult, ...]
    seed: int


@dataclass(frozen=True)
class OracleResult:
    best_profile: BiasProfile | None
    best_objective: float
    evaluation: EvaluationReport | None
    grid_step: float
    disparity_cap: float | None
    n_evaluated: int


def _normalise_cap(cap: float | None) -> float | None:
    if cap is None or math.isinf(cap):
        return None
    cap = float(cap)
    if not cap >= 0:
        raise ValueError(f"disparity_cap: must be >= 0, got {cap!r}")
    return cap


def max_disparity(health: np.ndarray) -> float:
    """Largest pairwise absolute gap in health across groups."""
    health = np.asarray(health)
    if health.size < 2:
        return 0.0
    return float(health.max() - health.min())


class _Problem:
    """Penalised merit function over ``x = [D, A, s]``.

    ``s`` holds one slack per group for the health shortfall when that cost is
    priced: the hinge ``max(0, h_ref - H)`` is replaced by ``s >= 0`` with the
    row ``h_ref - H - s <= 0``, which keeps the merit smooth at ``H = h_ref``.
    Constraint rows are, in order: budget, shortfall slacks, disparity pairs.
    """

    def __init__(self, scenario: Scenario, cap: float | None):
        self.scenario = scenario
        n = self.n = scenario.n_groups
        self.cap = cap
        costs = scenario.costs
        self.slack_weight = scenario.lam * costs.c_h
        self.k = n if self.slack_weight > 0 else 0
        self.pairs = [] if cap is None else list(combinations(range(n), 2))
        self.m = 1 + self.k + 2 * len(self.pairs)
        self.dim = 2 * n + self.k
        self.lo = np.concatenate([np.full(2 * n, EPS_LB), np.zeros(self.k)])
        self.hi = np.concatenate([np.ones(2 * n), np.full(self.k, np.inf)])
        self.budget_tol = 1e-9 * (1.0 + scenario.ra_total)
        self.slack_tol = 1e-9 * (1.0 + costs.h_ref)

    def split(self, x: np.ndarray):
        return x[: self.n], x[self.n : 2 * self.n]

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    def lift(self, da: np.ndarray) -> np.ndarray:
        """Append slacks sitting exactly on the hinge for a ``[D, A]`` vector."""
        da = np.clip(np.asarray(da, dtype=float), EPS_LB, 1.0)
        if not self.k:
            return da
        pt = point(self.scenario, *self.split(da), strict=False)
        s = np.maximum(0.0, self.scenario.costs.h_ref - pt.health)
        return np.concatenate([da, np.where(np.isfinite(s), s, 0.0)])

    def _point(self, x: np.ndarray):
        return point(self.scenario, *self.split(x), health_cost=not self.k)

    def constraints(self, pt, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n, k = self.n, self.k
        g = np.empty(self.m)
        jac = np.zeros((self.m, self.dim))
        g[0] = pt.ra_sum - self.scenario.ra_total
        jac[0, :n] = pt.ra_grad_d
        jac[0, n : 2 * n] = pt.ra_grad_a
        h = pt.health
        for i in range(k):
            g[1 + i] = self.scenario.costs.h_ref - h[i] - x[2 * n + i]
            jac[1 + i, i] = -pt.health_grad_d[i]
            jac[1 + i, n + i] = -pt.health_grad_a[i]
            jac[1 + i, 2 * n + i] = -1.0
        base = 1 + k
        for q, (i, j) in enumerate(self.pairs):
            row = np.zeros(self.dim)
            row[i], row[j] = pt.health_grad_d[i], -pt.health_grad_d[j]
            row[n + i], row[n + j] = pt.health_grad_a[i], -pt.health_grad_a[j]
            gap = h[i] - h[j]
            g[base + 2 * q] = gap - self.cap
            g[base + 2 * q + 1] = -gap - self.cap
            jac[base + 2 * q] = row
            jac[base + 2 * q + 1] = -row
        return g, jac

    def merit(self, x: np.ndarray, mu: float, y: np.ndarray):
        try:
            pt = self._point(x)
        except DomainError:
            return -math.inf, None
        if not math.isfinite(pt.value):
            return -math.inf, None
        g, jac = self.constraints(pt, x)
        t = np.maximum(0.0, y + mu * g)
        slack = x[2 * self.n :]
        value = pt.value - self.slack_weight * math.fsum(slack.tolist()) - (t @ t - y @ y) / (2.0 * mu)
        grad = np.concatenate([pt.grad_d, pt.grad_a, np.full(self.k, -self.slack_weight)]) - t @ jac
        if not (math.isfinite(value) and np.all(np.isfinite(grad))):
            return -math.inf, None
        return value, grad

    def residuals(self, x: np.ndarray) -> np.ndarray:
        pt = self._point(x)
        g, _ = self.constraints(pt, x)
        return g

    def violations(self, x: np.ndarray) -> tuple[float, float, float, float, float]:
        """Return ``(J, budget violation, slack violation, disparity excess, disparity tolerance)``.

        ``J`` is the true objective with the shortfall hinge, not the slack model.
        """
        pt = point(self.scenario, *self.split(x))
        budget = max(0.0, pt.ra_sum - self.scenario.ra_total)
        slack = 0.0
        if self.k:
            s = x[2 * self.n :]
            slack = float(np.max(np.maximum(0.0, self.scenario.costs.h_ref - pt.health - s)))
        if self.cap is None:
            return pt.value, budget, slack, 0.0, math.inf
        excess = max(0.0, max_disparity(pt.health) - self.cap)
        return pt.value, budget, slack, excess, 1e-9 * (1.0 + float(np.max(np.abs(pt.health))))

    def is_feasible(self, budget: float, slack: float, excess: float, excess_tol: float) -> bool:
        return budget <= self.budget_tol and slack <= self.slack_tol and excess <= excess_tol


def projected_gradient_norm(x: np.ndarray, grad: np.ndarray, lo=EPS_LB, hi=1.0) -> float:
    return float(np.max(np.abs(np.clip(x + grad, lo, hi) - x)))


@dataclass
class AscentResult:
    x: np.ndarray
    value: float
    iterations: int
    projected_grad_norm: float
    converged: bool
    stalled: bool
    trace: list[float]


def ascend(fun: Callable, x0: np.ndarray, settings: SolverSettings, max_iters: int,
           record: bool = False, lo=EPS_LB, hi=1.0) -> AscentResult:
    """Projected gradient ascent on the box ``[lo, hi]`` with Armijo backtracking.

    Trial steps come from the Barzilai-Borwein ratio.  When the value change is
    below rounding noise the sufficient-increase test falls back to the
    trapezoidal estimate built from the two gradients.
    """
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    f, g = fun(x)
    trace = [f] if record else []
    if g is None:
        return AscentResult(x, f, 0, math.inf, False, True, trace)
    c, shrink, tol = settings.armijo_c, settings.backtrack_factor, settings.grad_tol
    alpha = 1.0 / max(1.0, float(np.max(np.abs(g))))
    it = 0
    while True:
        pg = projected_gradient_norm(x, g, lo, hi)
        if pg <= tol:
            return AscentResult(x, f, it, pg, True, False, trace)
        if it >= max_iters:
            return AscentResult(x, f, it, pg, False, False, trace)
        t = alpha
        accepted = False
        while t * float(np.max(np.abs(g))) > 1e-20:
            xn = np.clip(x + t * g, lo, hi)
            s = xn - x
            if not np.any(s):
                break
            fn, gn = fun(xn)
            if gn is not None:
                slope = float(g @ s)
                if fn >= f + c * slope:
                    accepted = True
                elif fn >= f - _VALUE_NOISE * (1.0 + abs(f)) and 0.5 * float((g + gn) @ s) >= c * slope:
                    accepted = True
                if accepted:
                    break
            t *= shrink
        if not accepted:
            return AscentResult(x, f, it, pg, False, True, trace)
        it += 1
        sy = -float(s @ (gn - g))
        alpha = float(s @ s) / sy if sy > 0 else 10.0 * t
        alpha = min(max(alpha, 1e-12), 1e12)
        x, f, g = xn, fn, gn
        if record:
            trace.append(f)


def _solve_from(problem: _Problem, label: str, x0: np.ndarray, settings: SolverSettings) -> StartResult:
    mu = settings.penalty_mu0
    y = np.zeros(problem.m)
    x = problem.lift(x0)
    total = 0
    stages = 0
    trace: list[float] = []
    prev_scaled = math.inf
    converged = False
    pg = math.inf
    while stages < MAX_STAGES:
        stages += 1
        res = ascend(lambda z: problem.merit(z, mu, y), x, settings, settings.max_iters - total,
                     lo=problem.lo, hi=problem.hi)
        total += res.iterations
        pg = res.projected_grad_norm
        if not math.isfinite(res.value):
            d, a = problem.split(x)
            return StartResult(label, tuple(d.tolist()), tuple(a.tolist()), -math.inf, total,
                               stages, mu, math.inf, math.inf, math.inf, False, False, tuple(trace))
        x = res.x
        value, budget, slack, excess, excess_tol = problem.violations(x)
        trace.append(value)
        feasible = problem.is_feasible(budget, slack, excess, excess_tol)
        if res.converged and feasible:
            converged = True
            break
        if total >= settings.max_iters or (res.stalled and feasible):
            break
        y = np.maximum(0.0, y + mu * problem.residuals(x))
        scaled = max(budget / problem.budget_tol, slack / problem.slack_tol,
                     excess / excess_tol if excess_tol > 0 else 0.0)
        if scaled > 0.25 * prev_scaled:
            mu = min(mu * settings.penalty_growth, settings.penalty_mu_max)
        prev_scaled = scaled
    value, budget, slack, excess, excess_tol = problem.violations(x)
    feasible = problem.is_feasible(budget, slack, excess, excess_tol)
    d, a = problem.split(x)
    return StartResult(
        label=label,
        d=tuple(d.tolist()),
        a=tuple(a.tolist()),
        objective=value,
        iterations=total,
        stages=stages,
        penalty_mu=mu,
        projected_grad_norm=pg,
        budget_violation=budget,
        disparity_excess=excess,
        feasible=feasible,
        converged=converged and feasible,
        objective_trace=tuple(trace),
    )


def starting_points(scenario: Scenario, settings: SolverSettings) -> list[tuple[str, np.ndarray]]:
    """Deterministic start set: baseline, all ones, floor, centre, then seeded random draws."""
    n = scenario.n_groups
    arr = scenario.arrays
    fixed = [
        ("baseline", np.concatenate([arr.d0, arr.a0])),
        ("ones", np.ones(2 * n)),
        ("floor", np.full(2 * n, EPS_LB)),
        ("center", np.full(2 * n, 0.5 * (EPS_LB + 1.0))),
    ]
    starts = fixed[: settings.n_starts]
    rng = np.random.default_rng(settings.seed)
    for k in range(settings.n_starts - len(starts)):
        starts.append((f"random-{k}", rng.uniform(EPS_LB, 1.0, 2 * n)))
    return starts


def _lex_key(res: StartResult) -> tuple[float, ...]:
    return res.d + res.a


def _pick(results: list[StartResult]) -> StartResult:
    finite = [r for r in results if math.isfinite(r.objective)]
    if not finite:
        raise SolverError("no starting point produced a finite objective")
    pool = [r for r in finite if r.feasible] or finite
    top = max(r.objective for r in pool)
    tol = TIE_RTOL * max(1.0, abs(top))
    tied = [r for r in pool if r.objective >= top - tol]
    return min(tied, key=_lex_key)


def _solve(scenario: Scenario, cap: float | None, workers: int) -> SolutionReport:
    settings = scenario.solver
    problem = _Problem(scenario, cap)
    starts = starting_points(scenario, settings)

    def run(item):
        label, x0 = item
        return _solve_from(problem, label, x0, settings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(item) for item in starts]

    best = _pick(results)
    profile = BiasProfile(best.d, best.a)
    report = evaluate(scenario, profile)
    health = np.array([g.health for g in report.per_group])
    return SolutionReport(
        best_profile=profile,
        best_objective=best.objective,
        evaluation=report,
        converged=best.converged,
        best_start=best.label,
        iterations_per_start=tuple(r.iterations for r in results),
        projected_grad_norm=best.projected_grad_norm,
        budget_violation=max(0.0, report.budget_used - scenario.ra_total),
        disparity_cap=cap,
        realized_disparity=max_disparity(health),
        starts_summary=tuple(r.objective for r in results),
        starts=tuple(results),
        seed=settings.seed,
    )


def optimize(scenario: Scenario, *, workers: int = 1) -> SolutionReport:
    """Maximise the planner objective under the budget row.

    ``workers > 1`` runs the starts on a thread pool; the result does not depend
    on it.
    """
    return _solve(scenario, None, workers)


def optimize_with_fairness(scenario: Scenario, disparity_cap: float | None, *,
                           workers: int = 1) -> SolutionReport:
    """Same as ``optimize`` with every pairwise health gap held to ``disparity_cap``.

    ``None`` or ``inf`` disables the cap.  A cap that cannot be met inside the box
    shows up as non-converged starts with positive ``disparity_excess``.
    """
    return _solve(scenario, _normalise_cap(disparity_cap), workers)


# --- brute-force oracle ------------------------------------------------------------

_CHUNK = 65536


def _lattice(step: float) -> np.ndarray:
    k = int(math.floor((1.0 - EPS_LB) / step + 1e-9))
    axis = EPS_LB + step * np.arange(k + 1)
    axis = axis[axis < 1.0 - 1e-12]
    return np.append(axis, 1.0)


def _scan(scenario: Scenario, axes: list[np.ndarray], cap: float | None):
    n = scenario.n_groups
    shape = tuple(len(ax) for ax in axes)
    total = int(np.prod(shape))

    def values(lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.unravel_index(np.arange(lo, hi), shape)
        x = np.stack([ax[i] for ax, i in zip(axes, idx)], axis=-1)
        val, c = batch_evaluate(scenario, x[:, :n], x[:, n:])
        ok = np.sum(c.ra, axis=-1) <= scenario.ra_total
        if cap is not None and n > 1:
            ok &= (np.max(c.h, axis=-1) - np.min(c.h, axis=-1)) <= cap
        return np.where(ok, val, -np.inf), x

    top = -math.inf
    for lo in range(0, total, _CHUNK):
        val, _ = values(lo, min(lo + _CHUNK, total))
        top = max(top, float(val.max()))
    if top == -math.inf:
        return None, top, total
    tol = TIE_RTOL * max(1.0, abs(top))
    for lo in range(0, total, _CHUNK):
        val, x = values(lo, min(lo + _CHUNK, total))
        hits = np.flatnonzero(val >= top - tol)
        if hits.size:
            return x[hits[0]], float(val[hits[0]]), total
    raise AssertionError("unreachable: maximum not found on second pass")


def grid_oracle(scenario: Scenario, grid_step: float = 0.05, *,
                disparity_cap: float | None = None) -> OracleResult:
    """Exhaustive lattice search followed by one refinement pass at ``grid_step / 10``.

    Infeasible lattice points (budget or disparity cap) are discarded outright.
    Limited to three groups, since the lattice has ``(1/step)**(2n)`` points.
    """
    n = scenario.n_groups
    if n > MAX_ORACLE_GROUPS:
        raise ValueError(
            f"grid_oracle: exhaustive search is limited to {MAX_ORACLE_GROUPS} groups, got {n}")
    if not 0 < grid_step <= 1:
        raise ValueError(f"grid_step: must lie in (0, 1], got {grid_step!r}")
    cap = _normalise_cap(disparity_cap)
    coarse = _lattice(grid_step)
    x, best, count = _scan(scenario, [coarse] * (2 * n), cap)
    if x is None:
        return OracleResult(None, -math.inf, None, grid_step, cap, count)
    fine = grid_step / 10.0
    offsets = fine * np.arange(-10, 11)
    axes = [np.unique(np.clip(xk + offsets, EPS_LB, 1.0)) for xk in x]
    x_ref, best_ref, count_ref = _scan(scenario, axes, cap)
    if best_ref >= best:
        x, best = x_ref, best_ref
    profile = BiasProfile.from_arrays(x[:n], x[n:])
    return OracleResult(profile, best, evaluate(scenario, profile), grid_step, cap, count + count_ref)
