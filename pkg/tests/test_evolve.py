import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from topoclock.evolve import (EdgeLeakageError, Propagator, Pulse, Schedule, apply_pulse, check_edges,
                              evolve_const, evolve_schedule, prepare_bond_superposition, pulse_duration,
                              rm_schedule, step_amplitudes, validate_stark_shift)
from topoclock.model import RMParameters, build_rm_hamiltonian
from topoclock.state import QuantumState, fidelity, localized_state, measure


def _random_state(n, seed, clear_edges=True):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2 * n) + 1j * rng.normal(size=2 * n)
    if clear_edges:
        # (0,g) and (L-1,e) have no sideband partner
        amps[0] = amps[-1] = 0
    return QuantumState.normalized(amps)


@given(st.floats(0, 20), st.floats(0, 20), st.floats(-10, 10), st.floats(-2, 2),
       st.floats(0, 2 * math.pi), st.floats(0, 0.5))
@settings(max_examples=40, deadline=None)
def test_matches_dense_expm(a, b, d, dt, phase, t):
    h = build_rm_hamiltonian(RMParameters(a, b, d, dt, phase), 6)
    psi = _random_state(6, 1, clear_edges=False)
    ref = expm(-1j * h.matrix * t) @ psi.amplitudes
    np.testing.assert_allclose(evolve_const(h, psi, t).amplitudes, ref, atol=1e-10)
    np.testing.assert_allclose(Propagator(h).evolve_amplitudes(psi.amplitudes, t), ref, atol=1e-10)


@pytest.mark.parametrize("params", [RMParameters(3.0, 0.0, 1.0, 0.2), RMParameters(0.0, 3.0, -1.0, 0.2)])
def test_block_path_matches_dense(params):
    h = build_rm_hamiltonian(params, 5)
    psi = _random_state(5, 2, clear_edges=False)
    np.testing.assert_allclose(step_amplitudes(h, psi.amplitudes, 0.37),
                               expm(-0.37j * h.matrix) @ psi.amplitudes, atol=1e-12)


def test_series_matches_single_evolutions():
    h = build_rm_hamiltonian(RMParameters(1.0, 2.0, 0.3, 0.1), 8)
    psi = localized_state(8, 4)
    times = [0.0, 0.5, 1.3]
    prop = Propagator(h)
    series = prop.series(psi, times)
    for row, t in zip(series, times):
        np.testing.assert_allclose(row, prop.evolve(psi, t).amplitudes, atol=1e-12)


def test_negative_time_and_nonfinite_rejected():
    h = build_rm_hamiltonian(RMParameters(1, 1), 3)
    with pytest.raises(ValueError):
        evolve_const(h, localized_state(3, 1), -1.0)
    h.diag[0] = np.nan
    with pytest.raises(ValueError):
        evolve_const(h, localized_state(3, 1), 1.0)


def test_edge_guard():
    with pytest.raises(EdgeLeakageError, match="site_count"):
        check_edges(localized_state(10, 0))
    check_edges(localized_state(10, 5))


def test_schedule_reversal_and_norm():
    ob = 2 * math.pi * 10
    sched = rm_schedule(lambda t: RMParameters(ob * (1 + math.sin(5 * t)) / 2, ob, ob * math.cos(t), 0.3),
                        40, 0.0, 0.4, 2e-3)
    psi0 = localized_state(40, 20)
    fwd = evolve_schedule(sched, psi0)
    assert abs(fwd.norm - 1) < 1e-12
    back = evolve_schedule(sched.reversed(), fwd)
    assert 1 - fidelity(psi0, back) < 1e-8


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(lambda t: None, 1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        Schedule(lambda t: None, 0.0, 1.0, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_measurement_pulse_contracts(seed):
    psi = _random_state(8, seed)
    before = measure(psi)
    assert measure(apply_pulse(Pulse.M1, psi)).S_z == pytest.approx(before.I_y, abs=1e-12)
    assert measure(apply_pulse(Pulse.M2, psi)).S_z == pytest.approx(before.I_x, abs=1e-12)
    assert measure(apply_pulse(Pulse.CARRIER_HALF, psi)).S_z == pytest.approx(before.S_y, abs=1e-12)


@pytest.mark.parametrize("pulse", list(Pulse))
def test_finite_pulse_equals_ideal_rotation(pulse):
    psi = _random_state(6, 9)
    omega = 2 * math.pi * 40
    ideal = apply_pulse(pulse, psi)
    finite = apply_pulse(pulse, psi, omega, finite=True)
    assert fidelity(ideal, finite) == pytest.approx(1, abs=1e-12)
    assert pulse_duration(pulse, omega) > 0


def test_pi_phase_undoes_pulse():
    psi = _random_state(6, 4)
    out = apply_pulse(Pulse.SIDEBAND_PI, apply_pulse(Pulse.SIDEBAND_PI, psi, amplitude_scale=1.03),
                      amplitude_scale=1.03, drive_phase=math.pi)
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-12)


def test_composite_pulse_moves_arms():
    psi = apply_pulse(Pulse.CARRIER_HALF, localized_state(9, 4))
    for _ in range(2):
        psi = apply_pulse(Pulse.CARRIER_PI, apply_pulse(Pulse.SIDEBAND_PI, psi))
    assert measure(psi).d_eg == pytest.approx(4)


def test_bond_superposition():
    psi = prepare_bond_superposition(10, 5)
    o = measure(psi)
    assert o.I_x == pytest.approx(0.5) and o.S_z == pytest.approx(0)
    slow = prepare_bond_superposition(10, 5, adiabatic=True, omega=2 * math.pi * 10)
    assert fidelity(psi, slow) > 1 - 1e-6
    with pytest.raises(IndexError):
        prepare_bond_superposition(10, 0)


def test_detuning_needs_finite_pulse():
    with pytest.raises(ValueError):
        apply_pulse(Pulse.M1, localized_state(4, 1), delta=1.0)
    with pytest.raises(ValueError):
        apply_pulse(Pulse.M1, localized_state(4, 1), finite=True)


def test_stark_validation_small_drive():
    v = validate_stark_shift("carrier", 0.01, periods=10)
    assert v.worst_deficit < 1e-4 and v.relative_error < 0.01
