import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from topoclock.analytics import (CriticalPointError, _brute_force_ix, analytic_Iy,
                                 analytic_mean_displacement, band_energy, delta_response,
                                 linear_response_Ix, secular_mean_displacement, s_function,
                                 winding_number, winding_number_raw, zak_phase)
from topoclock.model import RMParameters
from topoclock.spectroscopy import md_time_grid, run_md_protocol

OB = 2 * math.pi * 10


@given(st.floats(0.05, 20), st.floats(0.05, 20))
@settings(max_examples=60, deadline=None)
def test_winding_is_quantized(a, b):
    assume(abs(a / b - 1) > 0.02)
    w, raw = winding_number(a, b)
    assert w == (1 if b > a else 0)
    assert abs(raw - w) < 1e-6
    assert zak_phase(a, b) == pytest.approx(-math.pi * w, abs=1e-5)


def test_critical_point_rejected():
    with pytest.raises(CriticalPointError):
        winding_number(OB, OB)


def test_band_energy_gap():
    k = np.linspace(-math.pi, math.pi, 101)
    e = band_energy(1.0, 3.0, k)
    assert e.min() == pytest.approx(1.0)
    assert e.max() == pytest.approx(2.0)


def test_secular_displacement_is_half_winding():
    assert secular_mean_displacement(OB / 3, OB) == pytest.approx(0.5, abs=1e-9)
    assert secular_mean_displacement(OB / 0.3, OB) == pytest.approx(0.0, abs=1e-9)
    assert secular_mean_displacement(OB, OB) == pytest.approx(0.25, abs=1e-3)


@pytest.mark.parametrize("r", [0.3, 1.0, 3.0])
def test_Iy_and_displacement_match_chain(r):
    t = md_time_grid(OB, 6 * math.pi / OB)
    tr = run_md_protocol(RMParameters(OB / r, OB), t, 96)
    np.testing.assert_allclose(tr.I_y, analytic_Iy(OB / r, OB, t), atol=1e-6)
    # trapezoid error on a 0.5% grid
    np.testing.assert_allclose(tr.x_over_aL, analytic_mean_displacement(OB / r, OB, t), atol=2e-4)


def test_mean_displacement_is_derivative_of_Iy():
    t = np.linspace(0, 5 / OB, 2001)
    x = analytic_mean_displacement(OB / 2, OB, t)
    dx = np.gradient(x, t)
    np.testing.assert_allclose(dx[5:-5], OB * analytic_Iy(OB / 2, OB, t)[5:-5], atol=1e-3 * OB)


@pytest.mark.parametrize("r", [0.5, 3.0])
def test_delta_slope_matches_finite_difference(r):
    t = math.pi / OB
    h = 1e-4 * OB
    fd = (_brute_force_ix(OB / r, OB, h, 0, t) - _brute_force_ix(OB / r, OB, -h, 0, t)) / (2 * h) * OB
    assert delta_response(OB / r, OB, t) == pytest.approx(fd, rel=1e-5)


def test_s_function_and_linear_response():
    t = math.pi / OB
    s = s_function(OB / 3, OB, t)
    assert s_function(OB / 3, OB, 0.0) == 0
    d, dt = 1e-3 * OB, 2e-3 * OB
    lin = linear_response_Ix(OB / 3, OB, d, dt, t)
    assert lin == pytest.approx(_brute_force_ix(OB / 3, OB, d, dt, t), rel=1e-3)
    assert np.isfinite(s)
