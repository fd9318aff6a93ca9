import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from topoclock.model import (CALIBRATION_RATIO_5ER, BareDrives, InvalidLatticeError, LatticeParams,
                             RMParameters, ac_stark_shift, bessel_addition_closed,
                             bessel_addition_sum, bessel_ratio_root, build_counterrotating_hamiltonian,
                             build_rm_hamiltonian, calibrated_lattice, derive_effective_drives,
                             level_shift, stark_detunings, ws_coupling_matrix)

finite = st.floats(-50, 50, allow_nan=False)
positive = st.floats(0, 50, allow_nan=False)


def test_rm_hamiltonian_elements():
    p = RMParameters(2.0, 3.0, delta=0.4, delta_t=0.1, phase=0.3)
    h = build_rm_hamiltonian(p, 4).matrix
    # (l,e),(l,g) carrier and (l+1,g),(l,e) sideband
    assert h[1, 0] == pytest.approx(1.0 * np.exp(0.3j))
    assert h[2, 1] == pytest.approx(1.5 * np.exp(-0.3j))
    assert h[0, 0] == pytest.approx(0.2)
    assert h[1, 1] == pytest.approx(-0.2)
    assert h[6, 6] - h[0, 0] == pytest.approx(0.3)
    assert h[0, 2] == 0


@given(positive, positive, finite, finite, st.floats(0, 2 * math.pi), st.integers(2, 12))
@settings(max_examples=60, deadline=None)
def test_hermitian_and_shape(a, b, d, dt, phase, n):
    h = build_rm_hamiltonian(RMParameters(a, b, d, dt, phase), n).matrix
    assert h.shape == (2 * n, 2 * n)
    np.testing.assert_allclose(h, h.conj().T, atol=0)


def test_dimerized_spectrum_is_flat():
    h = build_rm_hamiltonian(RMParameters(0.0, 2.0), 6)
    ev = np.sort(h.eigvalsh())
    # two unpaired edge levels at zero, bulk at +-1
    np.testing.assert_allclose(ev, [-1] * 5 + [0, 0] + [1] * 5, atol=1e-12)


def test_tilt_shifts_levels_linearly():
    h = build_rm_hamiltonian(RMParameters(0.0, 0.0, 0.0, 0.7), 5)
    np.testing.assert_allclose(np.diag(h.matrix).real, np.repeat(0.7 * np.arange(5), 2))


def test_rejects_negative_amplitude_and_tiny_lattice():
    with pytest.raises(ValueError):
        RMParameters(-1.0, 1.0)
    with pytest.raises(InvalidLatticeError):
        build_rm_hamiltonian(RMParameters(1, 1), 1)
    with pytest.raises(InvalidLatticeError):
        LatticeParams(site_count=4, tilt=0.0)


def test_effective_drives_bessel_weights():
    lat = LatticeParams(site_count=4)
    x = lat.bessel_argument
    eff = derive_effective_drives(BareDrives(10.0, 20.0), lat)
    assert eff.omega_a == pytest.approx(10 * abs(special.j0(x)))
    assert eff.omega_b == pytest.approx(20 * abs(special.j1(x)))


def test_calibration_ratio():
    x = bessel_ratio_root()
    assert special.j0(x) / special.j1(x) == pytest.approx(CALIBRATION_RATIO_5ER, rel=1e-12)
    lat = calibrated_lattice(8)
    assert lat.bessel_argument == pytest.approx(x)


def test_stark_scaling():
    lat = LatticeParams(site_count=4)
    c1, s1 = ac_stark_shift(BareDrives(10.0, 10.0), lat)
    c2, s2 = ac_stark_shift(BareDrives(20.0, 30.0), lat)
    assert c1 > 0 > s1
    assert c2 / c1 == pytest.approx(4)
    assert s2 / s1 == pytest.approx(9)
    c3, _ = ac_stark_shift(BareDrives(10.0, 10.0), LatticeParams(site_count=4, tilt=2 * lat.tilt,
                                                                 tunneling=2 * lat.tunneling))
    assert c3 == pytest.approx(c1 / 2)


def test_stark_detunings_match_bare_form():
    lat = LatticeParams(site_count=4)
    bare = BareDrives(50.0, 70.0)
    eff = derive_effective_drives(bare, lat)
    assert stark_detunings(eff.omega_a, eff.omega_b, lat) == pytest.approx(ac_stark_shift(bare, lat))


def test_level_shift_convention():
    h = level_shift(0.25, 3)
    np.testing.assert_allclose(h.diag, [0.25, -0.25] * 3)


def test_ws_rows_normalized():
    m = ws_coupling_matrix(2 * math.pi * 224, 2 * math.pi * 866, 20)
    mid = m[20]
    assert np.sum(mid ** 2) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.01, 3), st.floats(0, 2 * math.pi), st.integers(-3, 3))
@settings(max_examples=40, deadline=None)
def test_bessel_addition_identity(u, alpha, nu):
    assert bessel_addition_sum(u, alpha, nu) == pytest.approx(bessel_addition_closed(u, alpha, nu), abs=1e-10)


def test_counterrotating_effective_has_shift():
    lat = LatticeParams(site_count=6)
    cr = build_counterrotating_hamiltonian(BareDrives(0.0, 0.02 * lat.tilt), lat, "sideband")
    h0 = cr(0.0)
    assert h0.offdiag[0] != 0 and h0.offdiag[1] != 0
    eff = cr.effective()
    assert np.all(eff.offdiag[0::2] == 0)
    assert eff.diag[0] < 0 < eff.diag[1]
    with pytest.raises(ValueError):
        build_counterrotating_hamiltonian(BareDrives(1, 1), lat, "both")
