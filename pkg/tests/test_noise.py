import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topoclock.noise import (COVERAGE, NoiseSpec, central_derivative, clock_sensitivity,
                             ensemble_run, median_and_interval, sample_realization,
                             statistical_noise_sigma2)


def _protocol(r):
    return {"a": r.eps_a, "t": r.eps_t}


def test_seeded_draws_are_reproducible_and_independent_of_n():
    spec = NoiseSpec(0.01, 0.02, 0.003, seed=5)
    a = ensemble_run(_protocol, spec, 10).values("a")
    b = ensemble_run(_protocol, spec, 20).values("a")[:10]
    np.testing.assert_array_equal(a, b)
    assert sample_realization(spec, 3) == sample_realization(spec, 3)
    assert sample_realization(spec, 3) != sample_realization(NoiseSpec(0.01, seed=6), 3)


def test_phase_in_units_of_pi_and_shared_noise():
    draws = [sample_realization(NoiseSpec(sigma_phi=0.1, seed=1), i) for i in range(4000)]
    assert np.std([d.eps_phi for d in draws]) == pytest.approx(0.1 * math.pi, rel=0.05)
    assert draws[0].amp_a == draws[0].amp_b
    tone = sample_realization(NoiseSpec(0.1, 0.1, per_tone=True), 0)
    assert tone.amp_a != tone.amp_b


def test_rejects_bad_sigma():
    with pytest.raises(ValueError):
        NoiseSpec(sigma_a=-0.1)
    with pytest.raises(ValueError):
        NoiseSpec(sigma_t=float("nan"))
    with pytest.raises(ValueError):
        ensemble_run(_protocol, NoiseSpec(), 1)


def test_interval_of_gaussian():
    x = np.random.default_rng(0).standard_normal(200_000)
    med, lo, hi = median_and_interval(x)
    assert abs(med) < 0.01
    half = hi - med
    # 95.6% of a normal lies within about 2.014 sigma
    from scipy.stats import norm
    assert half == pytest.approx(norm.ppf(0.5 + COVERAGE / 2), rel=0.02)


def test_failures_are_recorded():
    def bad(r):
        if r.index == 2:
            raise RuntimeError("boom")
        return 1.0

    res = ensemble_run(bad, NoiseSpec(), 5)
    assert res.count == 4 and res.failures[0][0] == 2


def test_parallel_matches_serial():
    spec = NoiseSpec(0.01, seed=9)
    a = ensemble_run(_protocol, spec, 8).values("a")
    b = ensemble_run(_protocol, spec, 8, workers=2).values("a")
    np.testing.assert_array_equal(a, b)


@given(st.floats(-3, 3), st.floats(0.1, 2))
@settings(max_examples=30)
def test_central_derivative(x0, c):
    assert central_derivative(lambda x: c * math.sin(x), x0) == pytest.approx(c * math.cos(x0), abs=1e-6)


@given(st.integers(2, 10_000))
def test_sigma2_scales_as_N_N_minus_1(n):
    s1 = statistical_noise_sigma2(lambda a: 3 * a, {"a": 1.0}, {"a": 0.1}, 2)
    sn = statistical_noise_sigma2(lambda a: 3 * a, {"a": 1.0}, {"a": 0.1}, n)
    assert sn / s1 == pytest.approx(n * (n - 1) / 2)
    assert s1 == pytest.approx(0.09 * 2)


def test_clock_sensitivity():
    assert clock_sensitivity(0.5, 0.0, 100, 2.0) == pytest.approx(25 / (4 * 0.25))
    with pytest.raises(ZeroDivisionError):
        clock_sensitivity(0.0, 1.0, 10, 1.0)
