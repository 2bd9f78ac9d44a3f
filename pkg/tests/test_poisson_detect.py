import math

import numpy as np
import pytest

from microsense.errors import DomainError
from microsense.hydro import Position
from microsense.poisson_detect import (
    background_counts,
    capture_rate,
    detection_hazard,
    expected_counts,
    last_count_fraction,
    poisson_pmf,
    tail_prob,
    window_tail_probability,
)


def _series_tail(mu: float, E: int) -> float:
    if mu == 0.0:
        return 0.0 if E > 0 else 1.0
    head = sum(math.exp(n * math.log(mu) - mu - math.lgamma(n + 1)) for n in range(E))
    return 1.0 - head


def test_capture_rate():
    assert capture_rate(100.0, 1.0, 6.0e-3) == pytest.approx(7.54, rel=1e-3)
    assert capture_rate(100.0, 1.0, 1.8) == pytest.approx(2262.0, rel=1e-3)
    assert capture_rate(100.0, 1.0, 0.0) == 0.0


def test_poisson_pmf():
    assert poisson_pmf(0.0, 0) == 1.0
    assert poisson_pmf(2.0, 0) == pytest.approx(math.exp(-2.0))
    assert poisson_pmf(0.0, 3) == 0.0
    with pytest.raises(ValueError):
        poisson_pmf(-1.0, 0)


@pytest.mark.parametrize("mu", [0.0, 0.08, 1.0, 7.5, 22.6, 50.0])
def test_poisson_pmf_is_normalised(mu):
    assert sum(poisson_pmf(mu, n) for n in range(200)) == pytest.approx(1.0, abs=1e-12)


def test_tail_prob_examples():
    assert tail_prob(0.08, 0) == 1.0
    assert tail_prob(0.08, 1) == pytest.approx(1.0 - math.exp(-0.08))
    assert tail_prob(0.08, 2) == pytest.approx(3.03e-3, rel=5e-3)


def test_tail_prob_matches_the_series():
    for mu in np.linspace(0.0, 50.0, 21):
        for E in range(0, 101, 5):
            assert tail_prob(float(mu), E) == pytest.approx(_series_tail(float(mu), E), abs=1e-10)


def test_tail_prob_accepts_arrays():
    values = tail_prob(np.array([0.0, 0.08, 50.0]), 1)
    np.testing.assert_allclose(values, [0.0, 1.0 - math.exp(-0.08), 1.0])


def test_background_counts(params):
    assert background_counts(params) == pytest.approx(0.0754, rel=1e-3)
    assert background_counts(params.replace(c_background=0.0)) == 0.0
    assert background_counts(params.replace(measure_time=0.02)) == pytest.approx(
        2.0 * background_counts(params))
    assert window_tail_probability(params, 1) == pytest.approx(1.0 - math.exp(-background_counts(params)))


def test_expected_counts_zero_field(params, uniform_field):
    assert expected_counts(uniform_field(0.0, params), Position(2.0, 100.0), params) == 0.0


def test_expected_counts_uniform_field(params, uniform_field):
    f = uniform_field(1.8, params)
    assert expected_counts(f, Position(0.0, 300.0), params) == pytest.approx(22.6, rel=2e-3)


def test_expected_counts_at_the_inflow(field, params):
    assert expected_counts(field, Position(2.0, params.numerics.x_min), params) == pytest.approx(0.0, abs=1e-12)


def test_expected_counts_outside_vessel(field, params):
    with pytest.raises(DomainError):
        expected_counts(field, Position(5.5, 10.0), params)


def test_expected_counts_step_insensitivity(field, params):
    pos = Position(3.0, 25.0)
    coarse = expected_counts(field, pos, params)
    fine = expected_counts(field, pos, params.replace(quadrature_step=0.5 * params.numerics.quadrature_step))
    assert coarse > 0.0
    assert fine == pytest.approx(coarse, rel=0.005)


def test_hazard_at_threshold_one_is_the_capture_rate(params):
    assert detection_hazard(0.5, 3.0, params, threshold=1) == pytest.approx(
        params.capture_coefficient * (0.5 + params.c_background))


def test_hazard_vanishes_without_counts(params):
    assert detection_hazard(0.0, 0.0, params, threshold=2, k=0.0) == 0.0


def test_hazard_closed_form_at_threshold_two(params):
    assert detection_hazard(0.0, 0.0, params, threshold=2, k=0.08) == pytest.approx(
        7.54 * 0.08 / 1.08, rel=1e-3)


def test_hazard_is_non_increasing_in_threshold(params):
    for C_here, K in [(0.0, 0.0), (0.7, 5.0), (1.8, 22.6)]:
        rates = [detection_hazard(C_here, K, params, threshold=m) for m in range(1, 41)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(rates, rates[1:]))


def test_hazard_is_vectorised(params):
    C_here = np.array([0.0, 0.5, 1.0])
    K = np.array([0.0, 4.0, 9.0])
    rates = detection_hazard(C_here, K, params)
    assert rates.shape == (3,)
    for c, k, rate in zip(C_here, K, rates):
        assert detection_hazard(float(c), float(k), params) == pytest.approx(rate)


def test_hazard_needs_a_positive_threshold(params):
    with pytest.raises(ValueError):
        detection_hazard(0.0, 0.0, params, threshold=0)


def test_last_count_fraction_closed_form():
    mu = np.array([0.08, 1.0, 3.0])
    np.testing.assert_allclose(last_count_fraction(mu, 2), mu / (1.0 + mu))
