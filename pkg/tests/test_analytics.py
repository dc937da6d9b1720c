import math

import numpy as np
import pytest

from carvesim.analytics import (CarvePlan, cf_infidelity, f_infidelity,
                                f_infidelity_transmission, ghz_asymptote,
                                ghz_infidelity, ghz_rates,
                                level_decay_rates, multi_tone_infidelity,
                                plan_dicke_carve, transmission)
from carvesim.model import (DriveTone, LevelModel, PhysicalParams,
                            balanced_params, exact_resonances)

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# two-level closed forms
# ---------------------------------------------------------------------------

def test_cf_limits_and_value():
    assert cf_infidelity(0.0, 3) == pytest.approx(0.5)
    assert cf_infidelity(60.0, 4) == pytest.approx(3.0590e-7, rel=1e-4)
    xs = np.linspace(1, 30, 50)
    ratio = [cf_infidelity(x, 1) / math.exp(-x) for x in xs]
    assert np.all(np.diff(ratio) > 0)         # approaches the asymptote
    assert ratio[-1] == pytest.approx(1.0, rel=1e-10)


def test_f_limits_and_value():
    assert f_infidelity(0.0, 5) == pytest.approx(0.5)
    assert f_infidelity(98.0, 1) == pytest.approx(0.01)
    # exponential advantage: (eps_f / eps_cf) / (e^x / x) -> 1
    x = 200.0
    adv = (f_infidelity(x, 1) / cf_infidelity(x, 1)) / (math.exp(x) / x)
    assert adv == pytest.approx(1.0, rel=0.02)


def test_infidelities_strictly_decreasing():
    xs = np.linspace(0.5, 60, 120)
    for fn in (cf_infidelity, f_infidelity):
        vals = [fn(x, 1) for x in xs]
        assert np.all(np.diff(vals) < 0)


def test_transmission_shape():
    params = balanced_params(60.0, 2, TWO_PI * 0.2, TWO_PI * 6.0)
    d = params.dispersive_shift
    assert transmission(2 * d, 2, params) == pytest.approx(0.5)
    # neighbor one pulled-resonance spacing away under balanced detuning
    n = 2
    t_off = transmission(n * d, n + 1, params)
    assert abs(t_off) ** 2 == pytest.approx(
        0.25 / (1 + params.cooperativity / n), rel=1e-9)
    for x in (0.3, 1.7, 4.2):
        assert abs(transmission(2 * d + x, 2, params)) == pytest.approx(
            abs(transmission(2 * d - x, 2, params)), rel=1e-12)


def test_transmission_route_equals_rate_route():
    rng = np.random.default_rng(42)
    for _ in range(100):
        c = float(rng.uniform(0.1, 5000.0))
        n = int(rng.integers(1, 40))
        a, b = f_infidelity(c, n), f_infidelity_transmission(c, n)
        assert abs(a - b) <= 1e-14 * a


def test_f_transmission_asymptote():
    assert f_infidelity_transmission(98.0, 1) == pytest.approx(0.01)
    assert f_infidelity_transmission(1e6, 1) == pytest.approx(1e-6, rel=1e-3)


# ---------------------------------------------------------------------------
# GHZ ladder
# ---------------------------------------------------------------------------

def test_ghz_rate_asymptotes():
    n = 8
    x = 100.0
    rates = ghz_rates(x * n, n, j_max=10_000)
    assert rates.gamma_even_over_res == pytest.approx(
        math.pi ** 2 / 8 / x, rel=0.05)
    assert rates.gamma_odd_over_res == pytest.approx(
        1 + math.pi ** 2 / 24 / x, rel=0.01)
    assert rates.gamma_odd_over_res > 1 > rates.gamma_even_over_res


def test_ghz_sums_monotone_in_jmax():
    vals = [ghz_rates(80.0, 8, j).gamma_even_over_res
            for j in (1, 3, 10, 100, 1000)]
    assert np.all(np.diff(vals) > 0)
    odds = [ghz_rates(80.0, 8, j).gamma_odd_over_res
            for j in (1, 3, 10, 100, 1000)]
    assert np.all(np.diff(odds) > 0)


def test_ghz_truncation_stability():
    for x in (1.0, 4.0, 10.0, 100.0):
        a = ghz_rates(x * 8, 8, 1000)
        b = ghz_rates(x * 8, 8, 10_000)
        assert abs(a.gamma_odd_over_res / b.gamma_odd_over_res - 1) < 1e-3
        assert abs(a.gamma_even_over_res / b.gamma_even_over_res - 1) < 1e-3
        assert a.tail_bound_even >= (b.gamma_even_over_res
                                     - a.gamma_even_over_res) / 2


def test_ghz_infidelity_limits():
    # equal decay rates in the dense-ladder limit give 1/2
    assert ghz_infidelity(1e-9 * 8, 8, "counterfactual",
                          j_max=200) == pytest.approx(0.5, abs=1e-3)
    assert ghz_infidelity(1e-9 * 8, 8, "factual",
                          j_max=200) == pytest.approx(0.5, abs=1e-3)


def test_ghz_exponent_coefficient():
    # large-C/N slope of ln(eps_cf) against C/N approaches -8/pi^2
    n = 8
    xs = np.array([60.0, 90.0])
    ys = [math.log(ghz_infidelity(x * n, n, "counterfactual")) for x in xs]
    slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
    assert slope == pytest.approx(-8 / math.pi ** 2, rel=1e-3)
    assert ghz_asymptote(10 * n, n, "factual") == pytest.approx(
        math.pi ** 2 / 80, rel=1e-12)


def test_ghz_full_vs_corrected_asymptotes():
    # the exact sums give R = (8/pi^2) x + 2/3 + O(1/x): the counterfactual
    # curve converges to e^{1/3} e^{-8x/pi^2}, a factor e^{-1/3} below the
    # e^{2/3} form, and the factual curve to 1/(1 + R)
    n = 8
    for x, want_cf, want_f in [(10.0, 4.17590411e-04, 1.02243302e-01),
                               (20.0, 1.26571683e-07, 5.59207275e-02),
                               (40.0, 1.15493346e-14, 2.93322669e-02)]:
        cf = ghz_infidelity(x * n, n, "counterfactual")
        f = ghz_infidelity(x * n, n, "factual")
        assert cf == pytest.approx(want_cf, rel=1e-6)
        assert f == pytest.approx(want_f, rel=1e-6)
        corrected = math.exp(1 / 3) * math.exp(-8 / math.pi ** 2 * x)
        assert cf / corrected == pytest.approx(1.0, abs=0.01)
        r2 = 8 / math.pi ** 2 * x + 2 / 3
        assert f * (1 + r2) == pytest.approx(1.0, abs=0.001)
        # the printed e^{2/3} form stays a constant factor e^{-1/3} away
        assert cf / ghz_asymptote(x * n, n, "counterfactual") == pytest.approx(
            math.exp(-1 / 3), abs=0.01)


# ---------------------------------------------------------------------------
# multi-tone carve planning
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig2():
    return PhysicalParams.from_mhz(8.5, 0.2, 6.0, 66.0)


def test_plan_layout_fig2(fig2):
    plan = plan_dicke_carve(4, 2, fig2)
    assert len(plan.tones) == 4
    assert plan.tone_levels() == [0, 1, 3, 4]
    res = exact_resonances(fig2, 4)
    for tone, m in zip(plan.tones, plan.tone_levels()):
        assert tone.delta == pytest.approx(res[m])
    # common perturbative drive: w = kappa_min / 20
    kmin = float(plan.level_model.widths.min())
    assert plan.w == pytest.approx(kmin / 20)
    assert plan.duration == pytest.approx(1 / plan.predicted_keep_rate)


def test_plan_dispersive_placement(fig2):
    plan = plan_dicke_carve(4, 2, fig2, placement="dispersive")
    d = fig2.dispersive_shift
    assert plan.tones[0].delta == pytest.approx(d)
    assert plan.tones[-1].delta == pytest.approx(5 * d)


def test_plan_empty_for_single_level(fig2):
    plan = plan_dicke_carve(0, 0, fig2)
    assert plan.tones == ()
    assert plan.duration == 0.0


def test_plan_keep_m_range(fig2):
    with pytest.raises(ValueError):
        plan_dicke_carve(4, 5, fig2)


def test_plan_target_suppression(fig2):
    base = plan_dicke_carve(4, 2, fig2)
    deep = plan_dicke_carve(4, 2, fig2, target_suppression=1e-6)
    assert deep.duration > base.duration
    with pytest.raises(ValueError, match="needs t="):
        plan_dicke_carve(4, 2, fig2, target_suppression=1e-6,
                         max_duration=base.duration)


def test_neighbor_suppression_factor(fig2):
    # at the 1/e heralding time the nearest neighbor of the kept level is
    # suppressed by roughly exp(-(1 + (2d/kappa_n)^2)) relative to it
    n = 2
    params = balanced_params(20.0, n, TWO_PI * 0.2, TWO_PI * 6.0)
    lm = LevelModel.uniform(20.0 / n, 1, kappa_bar=2 * params.kappa)
    w = lm.widths.min() / 20
    tone = DriveTone(float(lm.resonances[0]), w)  # uniform model: w == omega
    plan = CarvePlan(1, 1, (tone,), 0.0, lm, w, 0.0)
    rates = level_decay_rates(plan.tones, params, lm)
    # absolute suppression of the carved level at t = 1/Gamma_keep
    supp = math.exp(-rates[0] / rates[1])
    assert supp == pytest.approx(math.exp(-(1 + 20.0 / n)), rel=0.05)


def test_two_level_reduction_matches_cf():
    # one tone, one neighbor, idealized equal widths: the analytic
    # multi-tone infidelity collapses to the closed form exactly
    c, n = 36.0, 2
    kappa_bar = 1.0
    d = 0.5 * kappa_bar * math.sqrt(c / n)
    lm = LevelModel(np.array([0.0, d]), np.array([kappa_bar, kappa_bar]))
    w = kappa_bar / 50
    tone = DriveTone(0.0, w)
    params = PhysicalParams(1.0, 1.0, 1.0, 1.0)  # w bypasses params here
    rates = (w ** 2) * kappa_bar / ((kappa_bar / 2) ** 2
                                    + (tone.delta - lm.resonances) ** 2)
    plan = CarvePlan(1, 1, (tone,), float(1 / rates[1]), lm, w, float(rates[1]))
    eps = multi_tone_infidelity(plan, params)
    assert eps == pytest.approx(cf_infidelity(c, n), rel=1e-9)


def test_multi_tone_monotone_in_c(fig2):
    eps = []
    for c in (40.0, 80.0, 160.0):
        p = balanced_params(c, 2, TWO_PI * 0.2, TWO_PI * 6.0)
        eps.append(multi_tone_infidelity(plan_dicke_carve(4, 2, p), p))
    assert eps[0] > eps[1] > eps[2]


def test_analytic_n8_curve_matches_reported_fit():
    # the summed-rate prediction for N = 8 reproduces the reported
    # asymptotic fit 1.9 exp(-0.41 C/N) within its quoted windows
    xs = np.array([4.0, 7.0, 10.0, 13.0, 16.0, 20.0])
    eps = []
    for x in xs:
        p = balanced_params(8 * x, 4, TWO_PI * 0.2, TWO_PI * 6.0)
        eps.append(multi_tone_infidelity(plan_dicke_carve(8, 4, p), p))
    slope, intercept = np.polyfit(xs, np.log(eps), 1)
    assert -slope == pytest.approx(0.41, rel=0.25)
    assert math.exp(intercept) == pytest.approx(1.9, rel=0.50)
