import math

import numpy as np
import pytest

from topoclock.interferometer import (MPP_PRESETS, P0, P1, P2, Imperfections, MPPSpec, PumpCycle,
                                      TPPSpec, extract_phase, ideal_phase_mpp, ideal_phase_tpp,
                                      interferometer_signal, operating_tilt, protocol_runner,
                                      pump_transport, recovery_fidelity_experiment, run_mpp, run_tpp,
                                      tpp_phase_sum)
from topoclock.noise import NoiseRealization, NoiseSpec


def test_presets():
    for spec in MPP_PRESETS.values():
        assert spec.t_d == pytest.approx(spec.n_pulses * 2 * math.pi / spec.omega)
        assert ideal_phase_mpp(spec, 1.0) == pytest.approx(2 * spec.n_pulses * (spec.t_f - 2 * spec.t_d))
    with pytest.raises(ValueError):
        MPPSpec(1.0, 0, 1.0)


def test_ideal_phases_agree_for_p0_and_tpp12():
    tpp = TPPSpec(1 / 12, 24)
    assert ideal_phase_mpp(P0, 0.1) == pytest.approx(9.6)
    assert ideal_phase_tpp(tpp, 0.1) == pytest.approx(9.6)
    assert tpp_phase_sum(tpp, 0.1) / ideal_phase_tpp(tpp, 0.1) == pytest.approx(25 / 24)


def test_pump_cycle_geometry():
    c = PumpCycle(0.2)
    assert c.encloses_origin and c.minimum_gap > 0
    assert not PumpCycle(0.2, offset=2 * c.m).encloses_origin
    p0, p1 = c.point(0.0), c.point(c.tau)
    assert p0 == pytest.approx(p1)


def test_pump_transport_quantized_and_reversible():
    c = PumpCycle(0.2)
    moved = pump_transport(c, 2, 64)
    np.testing.assert_allclose(np.abs(moved[:, 0]), [1, 2], atol=0.01)
    # g and e arms move in opposite directions
    assert np.sign(moved[-1, 0]) == -np.sign(moved[-1, 1])
    back = pump_transport(PumpCycle(0.2, reversed=True), 1, 64)
    assert back[0, 0] == pytest.approx(-moved[0, 0], abs=0.01)
    still = pump_transport(PumpCycle(0.2, offset=2 * c.m), 1, 64)
    assert abs(still[0, 0]) < 0.05


def test_mpp_separation_and_recovery():
    res = run_mpp(MPPSpec(2 * math.pi * 24, 4, 0.5))
    np.testing.assert_allclose(res.separation, [2, 4, 6, 8], atol=1e-9)
    assert res.recovery == pytest.approx(1, abs=1e-10)
    assert res.separation_ratio == pytest.approx(1)


def test_tpp_separation_and_recovery():
    res = run_tpp(TPPSpec(1 / 5, 3))
    np.testing.assert_allclose(res.separation, [2, 4, 6], atol=2e-3)
    assert res.recovery == pytest.approx(1, abs=1e-8)


def test_pure_amplitude_noise_is_reversed_exactly():
    imp = Imperfections(NoiseRealization(eps_a=0.05))
    assert run_mpp(MPPSpec(2 * math.pi * 24, 3, 0.5), imperfections=imp).recovery == pytest.approx(1, abs=1e-10)


def test_stark_noise_reduces_mpp_recovery():
    imp = Imperfections(NoiseRealization(eps_a=0.05), ac_stark=True)
    assert imp.stark_delta(2 * math.pi * 24, 2 * math.pi * 24) != 0
    assert Imperfections(ac_stark=True).stark_delta(1.0, 1.0) == 0
    assert run_mpp(MPPSpec(2 * math.pi * 24, 3, 0.5), imperfections=imp).recovery < 1 - 1e-6


def test_mpp_phase_ideal_pulses():
    spec = MPPSpec(2 * math.pi * 24, 4, 0.5)
    runner = protocol_runner(spec, finite=False)
    rate = ideal_phase_mpp(spec, 1.0)
    assert extract_phase(runner, 0.3, expected_rate=rate) == pytest.approx(ideal_phase_mpp(spec, 0.3), rel=1e-9)


def test_tpp_phase():
    spec = TPPSpec(1 / 5, 3)
    rate = ideal_phase_tpp(spec, 1.0)
    phi = extract_phase(protocol_runner(spec), 0.1, expected_rate=rate)
    assert phi == pytest.approx(ideal_phase_tpp(spec, 0.1), rel=1e-3)


def test_operating_tilt_gives_quarter_phase():
    spec = MPPSpec(2 * math.pi * 24, 2, 0.5)
    d = operating_tilt(spec)
    assert ideal_phase_mpp(spec, d) == pytest.approx(math.pi / 2)
    # S_y ~ cos(phi): zero crossing, steepest point
    assert abs(interferometer_signal(spec, 0.0, finite=False)) == pytest.approx(0.5, abs=1e-9)
    assert interferometer_signal(spec, d, finite=False) == pytest.approx(0, abs=1e-9)


def test_ensemble_is_seeded():
    spec = MPPSpec(2 * math.pi * 24, 2, 0.5)
    noise = NoiseSpec(0.02, seed=4)
    a = recovery_fidelity_experiment(spec, noise, 4, ac_stark=True)
    b = recovery_fidelity_experiment(spec, noise, 4, ac_stark=True)
    np.testing.assert_array_equal(a.recovery, b.recovery)
    assert set(a.summary()) == {"separation_ratio", "recovery", "signal"}
