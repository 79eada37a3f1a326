import dataclasses
import math

import numpy as np
import pytest

from biascost import (
    BiasProfile,
    CostParams,
    FunctionalForms,
    GroupParams,
    Scenario,
    bias_reduction_cost,
    evaluate,
    finite_difference_check,
    objective,
    objective_gradient,
    social_welfare,
    total_cost,
    welfare_gradient,
)
from biascost.economics import batch_evaluate, gradient_check

from helpers import printed_welfare_d, random_profile, random_scenario, smooth_interior_case


def _single(costs=CostParams(), lam=0.0, d0=0.8, a0=0.5, rho=0.0):
    g = GroupParams("district", 1.0, 1.0, 1.0, 2.0, d0, a0)
    return Scenario((g,), FunctionalForms(1.0, 0.5, 0.1, rho), costs, ra_total=10.0, lam=lam)


def _permuted(sc: Scenario, order) -> Scenario:
    forms = dataclasses.replace(sc.forms, theta=tuple(sc.forms.theta[k] for k in order))
    return dataclasses.replace(sc, groups=tuple(sc.groups[k] for k in order), forms=forms)


def test_total_cost_zero_coefficients():
    sc = _single()
    assert tuple(total_cost(sc, sc.baseline_profile())) == (0.0, 0.0, 0.0)


def test_total_cost_hand_example():
    sc = _single(CostParams(c_ra=1.0, c_rt=0.1))
    got = total_cost(sc, sc.baseline_profile())  # RA = 4, RT = 5
    assert got.resource == pytest.approx(4.0, rel=1e-15)
    assert got.response == pytest.approx(2.5, rel=1e-15)
    assert got.health == 0.0


def test_health_cost_clamped_when_above_reference():
    sc = _single(CostParams(c_h=3.0, h_ref=1.0))
    assert total_cost(sc, sc.unbiased_profile()).health == 0.0  # H = 2.589 > 1
    short = _single(CostParams(c_h=3.0, h_ref=3.0))
    expected = 3.0 * (3.0 - math.sqrt(10.0) * math.exp(-0.2))
    assert total_cost(short, short.unbiased_profile()).health == pytest.approx(expected, rel=1e-14)


def test_bias_reduction_cost_examples():
    sc = _single(CostParams(kappa_d=10.0), d0=0.5, a0=0.5)
    assert bias_reduction_cost(sc, sc.baseline_profile()) == 0.0
    assert bias_reduction_cost(sc, BiasProfile((0.8,), (0.5,))) == pytest.approx(0.9, rel=1e-14)
    assert bias_reduction_cost(sc, BiasProfile((0.3,), (0.5,))) == 0.0


def test_bias_reduction_cost_non_decreasing_along_rays():
    rng = np.random.default_rng(21)
    for _ in range(300):
        sc = random_scenario(rng)
        d0, a0 = sc.arrays.d0, sc.arrays.a0
        dir_d, dir_a = rng.uniform(0, 1, sc.n_groups), rng.uniform(0, 1, sc.n_groups)
        ts = np.sort(rng.uniform(0, 1, 5))
        prev = 0.0
        for t in ts:
            d = np.minimum(1.0, d0 + t * dir_d * (1.0 - d0))
            a = np.minimum(1.0, a0 + t * dir_a * (1.0 - a0))
            cost = bias_reduction_cost(sc, BiasProfile.from_arrays(d, a))
            assert cost >= prev
            prev = cost


def test_objective_reduces_to_welfare_when_lambda_zero():
    rng = np.random.default_rng(22)
    for _ in range(100):
        sc = random_scenario(rng, lam=0.0)
        prof = random_profile(rng, sc.n_groups)
        assert objective(sc, prof) == social_welfare(sc, prof)


def test_objective_worked_example():
    sc = _single(CostParams(c_ra=1.0, c_rt=0.1, kappa_d=10.0), lam=1.0)
    w = 2.0 * math.exp(-0.5)
    assert objective(sc, sc.baseline_profile()) == pytest.approx(w - (4.0 + 2.5 + 0.0), rel=1e-14)
    # Raise D from 0.8 to 0.9: RA = 4.5, RT = 2/0.45, C_br = 10 * 0.01.
    rt = 2.0 / 0.45
    w2 = math.sqrt(4.5) * math.exp(-0.1 * rt)
    expected = w2 - (4.5 + 0.1 * rt**2 + 0.1)
    assert objective(sc, BiasProfile((0.9,), (0.5,))) == pytest.approx(expected, rel=1e-13)


def test_objective_invariant_to_group_order():
    rng = np.random.default_rng(23)
    for _ in range(100):
        sc = random_scenario(rng, n=3)
        prof = random_profile(rng, 3)
        order = rng.permutation(3)
        d, a = prof.as_arrays()
        perm = BiasProfile.from_arrays(d[order], a[order])
        assert objective(_permuted(sc, order), perm) == pytest.approx(objective(sc, prof), rel=1e-12)


def test_cost_decomposition_sums_to_total():
    rng = np.random.default_rng(24)
    for _ in range(300):
        sc = random_scenario(rng)
        prof = random_profile(rng, sc.n_groups)
        parts = total_cost(sc, prof)
        rep = evaluate(sc, prof)
        c_total = rep.cost_resource + rep.cost_response + rep.cost_health
        assert parts.total == pytest.approx(c_total, rel=1e-12, abs=1e-300)
        assert (parts.resource, parts.response, parts.health) == (
            rep.cost_resource, rep.cost_response, rep.cost_health)


def test_welfare_gradient_matches_printed_form():
    rng = np.random.default_rng(25)
    for _ in range(200):
        sc = random_scenario(rng, variant=str(rng.choice(["multiplicative", "additive"])),
                             rho=0.0 if rng.random() < 0.5 else None)
        if sc.forms.h_variant.value == "additive" and sc.forms.rho != 0.0:
            sc = dataclasses.replace(sc, forms=dataclasses.replace(sc.forms, rho=0.0))
        prof = random_profile(rng, sc.n_groups)
        wd, _ = welfare_gradient(sc, prof)
        np.testing.assert_allclose(wd, printed_welfare_d(sc, *prof.as_arrays()), rtol=1e-12)


def test_welfare_partials_positive_for_multiplicative_health():
    rng = np.random.default_rng(26)
    for _ in range(500):
        sc = random_scenario(rng)
        prof = random_profile(rng, sc.n_groups, lo=0.01, hi=1.0)
        wd, wa = welfare_gradient(sc, prof)
        assert np.all(wd > 0) and np.all(wa > 0)


def test_welfare_gradient_matches_finite_differences():
    rng = np.random.default_rng(27)
    for _ in range(50):
        sc = random_scenario(rng)
        prof = random_profile(rng, sc.n_groups)
        d, a = prof.as_arrays()
        wd, wa = welfare_gradient(sc, prof)
        step = 1e-5
        for k in range(sc.n_groups):
            e = np.zeros_like(d)
            e[k] = step
            fd_d = (social_welfare(sc, BiasProfile.from_arrays(d + e, a))
                    - social_welfare(sc, BiasProfile.from_arrays(d - e, a))) / (2 * step)
            fd_a = (social_welfare(sc, BiasProfile.from_arrays(d, a + e))
                    - social_welfare(sc, BiasProfile.from_arrays(d, a - e))) / (2 * step)
            assert abs(wd[k] - fd_d) / (1 + abs(wd[k])) <= 1e-6
            assert abs(wa[k] - fd_a) / (1 + abs(wa[k])) <= 1e-6


def test_symmetric_groups_have_equal_gradients():
    g = GroupParams("x", 100.0, 0.01, 1.0, 5.0, 0.6, 0.7)
    sc = Scenario((g, dataclasses.replace(g, name="y")), costs=CostParams(0.01, 0.001, 0.5, 1.0, 2, 2),
                  ra_total=20.0, lam=0.5)
    wd, wa = welfare_gradient(sc, BiasProfile.uniform(2, 0.8, 0.9))
    assert wd[0] == wd[1] and wa[0] == wa[1]


def test_zero_weight_group_has_zero_welfare_gradient():
    g = GroupParams("x", 100.0, 0.01, 1.0, 5.0)
    sc = Scenario((g, GroupParams("y", 50.0, 0.02, 2.0, 3.0, weight=0.0)), ra_total=20.0)
    wd, wa = welfare_gradient(sc, BiasProfile.uniform(2, 0.7, 0.7))
    assert wd[1] == 0.0 and wa[1] == 0.0
    assert wd[0] > 0


def test_objective_gradient_reductions():
    rng = np.random.default_rng(28)
    for _ in range(100):
        sc = random_scenario(rng, lam=0.0)
        prof = random_profile(rng, sc.n_groups)
        g = objective_gradient(sc, prof)
        wd, wa = welfare_gradient(sc, prof)
        np.testing.assert_array_equal(g.d_grad, wd)
        np.testing.assert_array_equal(g.a_grad, wa)

        free = dataclasses.replace(sc, lam=1.0, costs=CostParams())
        g = objective_gradient(free, prof)
        np.testing.assert_array_equal(g.d_grad, wd)
        np.testing.assert_array_equal(g.a_grad, wa)


def test_objective_gradient_matches_hand_derivative():
    sc = _single(CostParams(c_ra=1.0, c_rt=0.1, kappa_d=10.0), lam=1.0)
    d, a = 0.9, 0.5
    ra, rt = 10 * d * a, 2 / (d * a)
    h = math.sqrt(ra) * math.exp(-0.1 * rt)
    dra, drt = 10 * a, -2 / (d * d * a)
    dw = (0.5 * h / ra) * dra + (-0.1 * h) * drt
    dc = 1.0 * dra + 2 * 0.1 * rt * drt + 2 * 10.0 * (d - 0.8)
    g = objective_gradient(sc, BiasProfile((d,), (a,)))
    assert g.d_grad[0] == pytest.approx(dw - dc, rel=1e-13)
    assert g.welfare_d_grad[0] == pytest.approx(dw, rel=1e-13)


def test_health_cost_subgradient_is_zero_at_kink():
    sc = _single(CostParams(c_h=2.0), lam=1.0, d0=1.0, a0=1.0)
    prof = BiasProfile((0.7,), (0.6,))
    h = evaluate(sc, prof).per_group[0].health
    at_kink = dataclasses.replace(sc, costs=CostParams(c_h=2.0, h_ref=h))
    g = objective_gradient(at_kink, prof)
    wd, wa = welfare_gradient(at_kink, prof)
    np.testing.assert_array_equal(g.d_grad, wd)
    np.testing.assert_array_equal(g.a_grad, wa)


def test_finite_difference_check_smooth_cases():
    rng = np.random.default_rng(29)
    for _ in range(50):
        sc, prof = smooth_interior_case(rng)
        assert finite_difference_check(sc, prof, 1e-5) <= 1e-6


def test_finite_difference_check_welfare_only():
    rng = np.random.default_rng(30)
    for _ in range(30):
        sc = random_scenario(rng, lam=0.0)
        assert finite_difference_check(sc, random_profile(rng, sc.n_groups)) <= 1e-6


def test_coarse_step_is_less_accurate():
    rng = np.random.default_rng(31)
    for _ in range(20):
        sc = random_scenario(rng, lam=0.0, baselines=1.0)
        prof = random_profile(rng, sc.n_groups, lo=0.3, hi=0.9)
        assert finite_difference_check(sc, prof, 1e-2) > finite_difference_check(sc, prof, 1e-5)


def test_gradient_check_report_fields():
    rng = np.random.default_rng(32)
    sc, prof = smooth_interior_case(rng)
    rep = gradient_check(sc, prof)
    assert rep.groups == tuple(g.name for g in sc.groups)
    assert len(rep.analytic_d) == len(rep.numeric_a) == sc.n_groups
    assert rep.max_rel_error == finite_difference_check(sc, prof)


def test_batch_evaluate_matches_scalar_objective():
    rng = np.random.default_rng(33)
    sc = random_scenario(rng, n=2)
    d = rng.uniform(0.1, 1.0, (40, 2))
    a = rng.uniform(0.1, 1.0, (40, 2))
    values, _ = batch_evaluate(sc, d, a)
    for k in range(40):
        assert values[k] == pytest.approx(objective(sc, BiasProfile.from_arrays(d[k], a[k])),
                                          rel=1e-12, abs=1e-12)


def test_batch_evaluate_marks_undefined_rows():
    g = GroupParams("x", 1.0, 1.0, 1.0, 30.0)
    sc = Scenario((g,), FunctionalForms(1.0, 0.5, 1.0, 0.5, "additive"), ra_total=1.0)
    values, _ = batch_evaluate(sc, np.array([[1.0], [0.5]]), np.array([[1.0], [1.0]]))
    assert np.all(values == -np.inf)
