"""Seeded scenario generators shared by the property and acceptance tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from biascost import (
    BiasProfile,
    CostParams,
    FunctionalForms,
    GroupParams,
    Scenario,
    SolverSettings,
    load_scenario,
)
from biascost.economics import point
from biascost.model import chain, evaluate

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"


def scenario_file(name: str) -> Path:
    return SCENARIOS / f"{name}.json"


def load(name: str) -> Scenario:
    return load_scenario(scenario_file(name))


def random_groups(rng: np.random.Generator, n: int, *, baselines: float | None = None):
    groups = []
    for k in range(n):
        d0, a0 = (baselines, baselines) if baselines is not None else rng.uniform(0.2, 1.0, 2)
        groups.append(GroupParams(
            name=f"g{k}",
            population=float(rng.uniform(100, 1e5)),
            eir=float(rng.uniform(1e-3, 1e-2)),
            severity=float(rng.uniform(0.5, 3.0)),
            rt_star=float(rng.uniform(2.0, 15.0)),
            d_baseline=float(d0),
            a_baseline=float(a0),
            weight=float(rng.uniform(0.2, 2.0)),
        ))
    return tuple(groups)


def random_scenario(rng: np.random.Generator, n: int | None = None, *,
                    variant: str = "multiplicative", rho: float | None = None,
                    lam: float | None = None, baselines: float | None = None,
                    zero_costs: bool = False) -> Scenario:
    n = int(rng.integers(1, 5)) if n is None else n
    groups = random_groups(rng, n, baselines=baselines)
    forms = FunctionalForms(
        theta=tuple(rng.uniform(0.5, 2.0, n).tolist()),
        beta=float(rng.uniform(0.3, 0.8)),
        kappa=float(rng.uniform(0.02, 0.15)),
        rho=float(rng.choice([0.0, 0.5, 1.0, 2.0])) if rho is None else rho,
        h_variant=variant,
    )
    if zero_costs:
        costs = CostParams()
    else:
        costs = CostParams(
            c_ra=float(rng.uniform(0, 0.05)),
            c_rt=float(rng.uniform(0, 0.005)),
            c_h=float(rng.uniform(0, 1.0)),
            h_ref=float(rng.uniform(0, 3.0)),
            kappa_d=float(rng.uniform(0, 5.0)),
            kappa_a=float(rng.uniform(0, 5.0)),
        )
    ra_total = float(rng.uniform(10, 100))
    return Scenario(
        groups=groups,
        forms=forms,
        costs=costs,
        ra_total=ra_total,
        ra_star_total=ra_total * float(rng.uniform(0.5, 1.0)),
        lam=float(rng.uniform(0, 1.0)) if lam is None else lam,
        solver=SolverSettings(seed=int(rng.integers(0, 2**32))),
    )


def random_profile(rng: np.random.Generator, n: int, lo: float = 0.2, hi: float = 0.98) -> BiasProfile:
    return BiasProfile(tuple(rng.uniform(lo, hi, n).tolist()), tuple(rng.uniform(lo, hi, n).tolist()))


def smooth_interior_case(rng: np.random.Generator, step: float = 1e-5):
    """A random scenario and profile kept clear of the box edges and both cost kinks."""
    margin = 1e3 * step
    while True:
        sc = random_scenario(rng)
        prof = random_profile(rng, sc.n_groups)
        d, a = prof.as_arrays()
        arr = sc.arrays
        if np.any(np.abs(d - arr.d0) < margin) or np.any(np.abs(a - arr.a0) < margin):
            continue
        c = chain(sc, d, a)
        if np.any(np.abs(c.h - sc.costs.h_ref) < 1e-2 * (1.0 + sc.costs.h_ref)):
            continue
        if fd_noise_floor(sc, prof, step) > 1e-8:
            continue
        return sc, prof


def fd_noise_floor(scenario: Scenario, profile: BiasProfile, step: float) -> float:
    """Rounding error of a central difference of the objective, relative to ``1 + |grad|``.

    When one group's utility dwarfs another's gradient, the difference quotient
    cannot resolve that gradient no matter how exact it is.
    """
    pt = point(scenario, *profile.as_arrays())
    rep = evaluate(scenario, profile)
    scale = (sum(abs(g.weight * o.utility) for g, o in zip(scenario.groups, rep.per_group))
             + scenario.lam * (rep.cost_total + rep.cost_bias_reduction))
    noise = np.finfo(float).eps * scale / step
    grads = np.abs(np.concatenate([pt.grad_d, pt.grad_a]))
    return float(noise / (1.0 + grads.min()))


def desk_pair(seed: int) -> Scenario:
    """Two-group desk scenario with priced bias reduction, sized for the grid oracle."""
    rng = np.random.default_rng(10_000 + seed)
    groups = random_groups(rng, 2)
    forms = FunctionalForms(
        theta=tuple(rng.uniform(0.8, 1.5, 2).tolist()),
        beta=float(rng.uniform(0.3, 0.7)),
        kappa=float(rng.uniform(0.03, 0.12)),
        rho=float(rng.choice([0.0, 0.5, 1.0])),
    )
    costs = CostParams(
        c_ra=float(rng.uniform(0.0, 0.1)),
        c_rt=float(rng.uniform(0.0, 0.01)),
        c_h=float(rng.uniform(0.0, 0.5)),
        h_ref=float(rng.uniform(0.5, 2.5)),
        kappa_d=float(rng.uniform(1.0, 8.0)),
        kappa_a=float(rng.uniform(1.0, 8.0)),
    )
    ra_total = float(rng.uniform(20, 60))
    return Scenario(groups, forms, costs, ra_total=ra_total, lam=float(rng.uniform(0.2, 1.5)),
                    solver=SolverSettings(seed=seed))


def printed_welfare_d(scenario: Scenario, d: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Marginal welfare of data quality written term by term, delay channel as RT* A / (D A)^2.

    Built from raw parameters with plain numpy so it shares no code with the package.
    """
    f = scenario.forms
    need = np.array([g.population * g.eir * g.severity for g in scenario.groups])
    ra_star = scenario.ra_star_total * need / need.sum()
    rt_star = np.array([g.rt_star for g in scenario.groups])
    w = np.array([g.weight for g in scenario.groups])
    theta = np.array(f.theta)
    ra = ra_star * d * a
    rt = rt_star / (d * a)
    if f.h_variant.value == "multiplicative":
        h = theta * ra**f.beta * np.exp(-f.kappa * rt)
        dh_dra = f.beta * h / ra
        dh_drt = -f.kappa * h
    else:
        h = theta * ra**f.beta - f.kappa * rt
        dh_dra = theta * f.beta * ra ** (f.beta - 1.0)
        dh_drt = -f.kappa * np.ones_like(h)
    du = h ** (-f.rho)
    return w * du * (dh_dra * ra_star * a + dh_drt * (-rt_star * a / (d * a) ** 2))

