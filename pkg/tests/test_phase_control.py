import math

import numpy as np
import pytest

from carvesim.model import LevelModel
from carvesim.phase_control import (CorrectionLedger, NonConvergentRegimeError,
                                    PulseSpec, amplitude_pulse,
                                    contraction_factor, disturbance,
                                    iterate_corrections, log_sum_constant,
                                    materialize_durations, required_c_over_n,
                                    schedule_from_json, schedule_to_json,
                                    stark_pulse, success_bound,
                                    verify_schedule_numerically)


# ---------------------------------------------------------------------------
# single pulses
# ---------------------------------------------------------------------------

def test_stark_pulse_decay_ratio():
    kappa, w = 2.0, 0.05
    for phi in (0.3, -1.2, math.pi):
        for b in (1.0, 3.0, 7.5):
            p = stark_pulse(phi, b, kappa, w)
            # exact ratio ell/phi = kappa_m/delta_m = 1/b in this placement
            assert p.self_decay == pytest.approx(abs(phi) / b, rel=1e-12)
            # duration reproduces the phase through the Stark formula
            delta = b * kappa
            back = w ** 2 * delta * p.duration / ((kappa / 2) ** 2 + delta ** 2)
            assert back == pytest.approx(abs(phi), rel=1e-12)


def test_stark_pulse_zero_phase():
    p = stark_pulse(0.0, 3.0, 2.0, 0.05)
    assert p.duration == 0.0
    assert p.self_decay == 0.0


def test_stark_pulse_worst_case_success():
    p = stark_pulse(math.pi, 3.0, 2.0, 0.05)
    assert math.exp(-p.self_decay) == pytest.approx(math.exp(-math.pi / 3))


def test_stark_pulse_rejections():
    with pytest.raises(ValueError):
        stark_pulse(3.2, 3.0, 2.0, 0.05)
    with pytest.raises(ValueError):
        stark_pulse(1.0, 0.5, 2.0, 0.05)
    with pytest.raises(ValueError):
        amplitude_pulse(-0.1, 2.0, 0.05)


def test_amplitude_pulse_duration():
    kappa, w = 2.0, 0.05
    p = amplitude_pulse(0.8, kappa, w)
    assert 4 * w ** 2 * p.duration / kappa == pytest.approx(0.8, rel=1e-12)


# ---------------------------------------------------------------------------
# neighbor disturbances (worst-case table)
# ---------------------------------------------------------------------------

def test_disturbance_table_symbolic():
    c, n, b = 400.0, 4, 3.0
    ratio, root = n / c, math.sqrt(n / c)
    ell_m, phi_m = 0.6, 1.1
    amp = PulseSpec(m=2, kind="amplitude", magnitude=ell_m)
    ph = PulseSpec(m=2, kind="phase", magnitude=phi_m, b=b)
    for k in (0, 1, 3, 4):
        sep = k - 2
        ell_a, phi_a = disturbance(amp, k, c, n)
        assert ell_a == pytest.approx(ell_m / sep ** 2 * ratio, rel=1e-12)
        assert phi_a == pytest.approx(ell_m / (2 * sep) * root, rel=1e-12)
        ell_p, phi_p = disturbance(ph, k, c, n)
        assert ell_p == pytest.approx(4 * phi_m * b / sep ** 2 * ratio,
                                      rel=1e-12)
        assert phi_p == pytest.approx(2 * phi_m * b / sep * root, rel=1e-12)


def test_disturbance_signs_and_scaling():
    pulse = PulseSpec(m=3, kind="phase", magnitude=1.0, b=2.0)
    _, phi_above = disturbance(pulse, 4, 100.0, 8)
    _, phi_below = disturbance(pulse, 2, 100.0, 8)
    assert phi_above == -phi_below            # odd in (k - m)
    _, phi_far = disturbance(pulse, 5, 100.0, 8)
    assert abs(phi_above / phi_far) == pytest.approx(2.0, rel=1e-12)
    # vanishes with growing cooperativity
    _, phi_big_c = disturbance(pulse, 4, 1e10, 8)
    assert abs(phi_big_c) < 1e-3 * abs(phi_above)
    with pytest.raises(ValueError):
        disturbance(pulse, 3, 100.0, 8)


# ---------------------------------------------------------------------------
# convergence bookkeeping
# ---------------------------------------------------------------------------

def test_contraction_factor_example():
    # N=8, C=1e5, b=3: A = 2(1+ln 8) ~ 6.159, branches ~0.3397 / 0.0032
    assert log_sum_constant(8) == pytest.approx(6.1589, abs=1e-4)
    x = contraction_factor(1e5, 8, 3.0)
    assert x == pytest.approx(0.3397, abs=1e-4)
    ratio = 8 / 1e5
    second = ratio * (math.pi ** 2 / 3) * (12 + 1 / 3)
    assert second == pytest.approx(0.0032, abs=1e-4)
    assert 2 * x == pytest.approx(0.679, abs=1e-3)


def test_iterate_zero_targets():
    schedule, ledger = iterate_corrections(np.zeros(5), np.zeros(5),
                                           1e5, 4, b=3.0)
    assert schedule == []
    assert ledger.phi_max[0] == 0.0 and ledger.ell_max[0] == 0.0
    bound = success_bound(ledger)
    assert bound.limit == pytest.approx(1.0)


def test_iterate_refuses_divergent_regime():
    with pytest.raises(NonConvergentRegimeError) as err:
        iterate_corrections(np.full(5, 0.5), np.zeros(5), 40.0, 4, b=3.0)
    assert err.value.required_c_over_n > 40.0 / 4


def test_iterate_round0_applies_targets():
    phi = np.array([0.5, -1.0, 0.0, 0.3, 0.9])
    ell = np.array([0.0, 0.2, 0.1, 0.0, 0.0])
    schedule, _ = iterate_corrections(phi, ell, 1e6, 4, b=3.0, max_rounds=1)
    phase_mags = {p.m: p.magnitude for p in schedule[0] if p.kind == "phase"}
    assert phase_mags == {0: pytest.approx(0.5), 1: pytest.approx(-1.0),
                          3: pytest.approx(0.3), 4: pytest.approx(0.9)}
    amp_mags = {p.m: p.magnitude for p in schedule[0] if p.kind == "amplitude"}
    # amplitude pulses fold the targets together with phase-decay leveling
    assert amp_mags[1] >= 0.2 and amp_mags[2] >= 0.1


def test_target_validation():
    with pytest.raises(ValueError):
        iterate_corrections(np.full(3, 4.0), np.zeros(3), 1e6, 2)
    with pytest.raises(ValueError):
        iterate_corrections(np.zeros(3), np.full(3, -0.1), 1e6, 2)
    with pytest.raises(ValueError):
        iterate_corrections(np.zeros(4), np.zeros(3), 1e6, 2)


def test_ledger_envelope_on_random_targets():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        c_over_n = float(rng.uniform(required_c_over_n(n, 3.0) * 1.2, 5e4))
        phi = rng.uniform(-math.pi, math.pi, n + 1)
        ell = rng.uniform(0.0, 0.5, n + 1)
        _, ledger = iterate_corrections(phi, ell, c_over_n * n, n, b=3.0,
                                        max_rounds=6)
        for t in range(len(ledger.phi_max)):
            total = ledger.phi_max[t] + ledger.ell_max[t]
            assert total <= ledger.envelope(t) * (1 + 1e-12)


def test_success_bound_limits():
    # negligible neighbor coupling: bound reduces to the direct phase cost
    phi = np.array([0.5, 1.0, 0.25])
    _, ledger = iterate_corrections(phi, np.zeros(3), 1e12, 2, b=3.0)
    bound = success_bound(ledger)
    assert bound.limit == pytest.approx(math.exp(-1.0 / 3.0), rel=1e-4)
    # partial products decrease monotonically onto the limit
    assert np.all(np.diff(bound.partials) <= 1e-15)
    assert bound.partials[-1] == pytest.approx(bound.limit, abs=1e-12)
    assert np.all(bound.partials >= bound.limit - 1e-15)


def test_success_bound_engineered_unit_exponent():
    # pick targets with (2x/(1-2x)) (phi0 + ell0) = 1: the neighbor cost is
    # exactly one extra factor of 1/e
    n, b = 4, 3.0
    ledger = CorrectionLedger(n_qubits=n, c=0.0, b=b,
                              a_const=log_sum_constant(n),
                              b_const=math.pi ** 2 / 3, x=0.2,
                              phi_max=[1.5], ell_max=[(0.6 / 0.4) ** -1 * 1.0
                                                      - 1.5 + 1.0])
    # 2x = 0.4 -> 2x/(1-2x) = 2/3; choose phi0 + ell0 = 3/2
    ledger.phi_max = [1.2]
    ledger.ell_max = [0.3]
    bound = success_bound(ledger)
    assert bound.limit == pytest.approx(math.exp(-1.2 / b) * math.exp(-1.0),
                                        rel=1e-12)


# ---------------------------------------------------------------------------
# numeric verification
# ---------------------------------------------------------------------------

def test_verify_empty_schedule_zero_residuals():
    lm = LevelModel.uniform(1e5, 4)
    init = np.full(5, 1 / math.sqrt(5), dtype=complex)
    res = verify_schedule_numerically([], lm, init, np.zeros(5), np.zeros(5))
    assert np.max(np.abs(res.residual_phi)) == 0.0
    assert np.max(np.abs(res.residual_ell)) == 0.0


def test_verify_single_level_phase_accuracy():
    # pulse on a level with no populated neighbors reproduces the Stark
    # phase within 5% at w = kappa/50 (absolute phase, before removing the
    # common offset)
    lm = LevelModel.uniform(1e6, 4)
    init = np.zeros(5, dtype=complex)
    init[2] = 1.0
    phi = np.zeros(5)
    phi[2] = 1.1
    schedule = [[PulseSpec(m=2, kind="phase", magnitude=1.1, b=3.0)]]
    res = verify_schedule_numerically(schedule, lm, init, phi, np.zeros(5),
                                      w_fraction=1 / 50)
    got = math.atan2(res.final_amplitudes[2].imag,
                     res.final_amplitudes[2].real)
    assert got == pytest.approx(1.1, rel=0.05)
    # and its amplitude paid close to the phi/b decay toll
    ell_got = -2 * math.log(abs(res.final_amplitudes[2]))
    assert ell_got == pytest.approx(1.1 / 3.0, rel=0.05)


def test_verify_residuals_shrink_round_over_round():
    rng = np.random.default_rng(5)
    n = 4
    c = 1e4 * n
    shrank = 0
    total = 0
    for _ in range(20):
        phi = rng.uniform(-1.0, 1.0, n + 1)
        ell = rng.uniform(0.0, 0.3, n + 1)
        lm = LevelModel.uniform(c, n)
        init = np.full(n + 1, 1 / math.sqrt(n + 1), dtype=complex)
        sizes = []
        for rounds in (1, 2, 3):
            schedule, _ = iterate_corrections(phi, ell, c, n, b=3.0,
                                              max_rounds=rounds,
                                              level_model=lm)
            res = verify_schedule_numerically(schedule, lm, init, phi, ell)
            sizes.append(np.max(np.abs(res.residual_phi))
                         + np.max(np.abs(res.residual_ell)))
        for a, b2 in zip(sizes, sizes[1:]):
            total += 1
            if b2 < a:
                shrank += 1
    assert shrank / total >= 0.9


def test_verify_residuals_within_envelope():
    rng = np.random.default_rng(3)
    n = 4
    c = 2e4 * n
    for _ in range(5):
        phi = rng.uniform(-0.8, 0.8, n + 1)
        ell = rng.uniform(0.0, 0.2, n + 1)
        lm = LevelModel.uniform(c, n)
        init = np.full(n + 1, 1 / math.sqrt(n + 1), dtype=complex)
        for rounds in (1, 2, 3):
            schedule, ledger = iterate_corrections(phi, ell, c, n, b=3.0,
                                                   max_rounds=rounds,
                                                   level_model=lm)
            res = verify_schedule_numerically(schedule, lm, init, phi, ell)
            size = (np.max(np.abs(res.residual_phi))
                    + np.max(np.abs(res.residual_ell)))
            assert size <= ledger.envelope(rounds) + 1e-9


def test_schedule_json_round_trip():
    schedule, _ = iterate_corrections(np.array([0.4, -0.6, 0.2]),
                                      np.array([0.0, 0.1, 0.0]),
                                      2e5, 2, b=3.0, max_rounds=2)
    lm = LevelModel.uniform(2e5, 2)
    timed = materialize_durations(schedule, lm, w=0.02)
    back = schedule_from_json(schedule_to_json(timed))
    assert len(back) == len(timed)
    for r1, r2 in zip(timed, back):
        for p1, p2 in zip(r1, r2):
            assert (p1.m, p1.kind) == (p2.m, p2.kind)
            assert p1.magnitude == pytest.approx(p2.magnitude, rel=1e-12)
            assert p1.duration == pytest.approx(p2.duration, rel=1e-12)
