import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from microsense import montecarlo
from microsense.continuum import entry_radii, per_robot_detection_prob, transit_paths
from microsense.hydro import velocity_profile
from microsense.montecarlo import (
    COMPARE_COLUMNS,
    SIMULATE_COLUMNS,
    SlidingWindowCounter,
    TrialConfig,
    compare_with_continuum,
    estimate_detection_curve,
    estimate_detection_prob,
    estimates_frame,
    run_trials,
    sample_entry_radius,
    scan_counts,
    scan_events,
    simulate_transit,
    trial_rng,
    wilson_interval,
)


def _background(p, **changes):
    return TrialConfig.from_params(p, with_source=False, **changes)


def test_config_follows_the_scenario(params):
    cfg = TrialConfig.from_params(params)
    assert cfg.dt == params.numerics.mc_dt
    assert cfg.master_seed == params.numerics.seed
    assert cfg.with_source and not cfg.brownian


def test_config_checks(params):
    with pytest.raises(ValueError):
        montecarlo.check_config(_background(params, dt=0.005), params)
    with pytest.raises(ValueError):
        montecarlo.check_config(_background(params, n_trials=0), params)


def test_trial_streams_are_reproducible_and_distinct():
    a = trial_rng(11, 5).random(4)
    np.testing.assert_array_equal(a, trial_rng(11, 5).random(4))
    assert not np.array_equal(a, trial_rng(11, 6).random(4))
    assert not np.array_equal(a, trial_rng(12, 5).random(4))


def test_entry_radius_sampling(params):
    assert sample_entry_radius(0.0, params) == 0.0
    assert sample_entry_radius(1.0, params) == pytest.approx(params.robot_max_radius)
    draws = [sample_entry_radius(u, params) for u in np.linspace(0.0, 1.0, 11)]
    assert draws == sorted(draws)


def test_entry_radius_matches_the_flux_weighting(params):
    rng = np.random.default_rng(5)
    draws = np.array([sample_entry_radius(u, params) for u in rng.random(50_000)])
    radii, weights = entry_radii(params)
    expected = float(np.dot(weights, radii))
    assert draws.mean() == pytest.approx(expected, abs=4.0 * draws.std() / math.sqrt(draws.size))


def test_sliding_window_counter():
    window = SlidingWindowCounter(3)
    sums = [window.push(c) for c in [1, 0, 2, 4, 0, 0, 0]]
    assert sums == [1, 1, 3, 6, 6, 4, 0]
    assert window.peak == 6


def test_count_scan_and_event_scan_agree():
    rng = np.random.default_rng(1)
    for _ in range(200):
        counts = rng.poisson(0.3, size=400)
        events = np.repeat(np.arange(counts.size), counts)
        for threshold in (1, 3, 6):
            assert scan_counts(counts, 25, threshold) == scan_events(events, 25, threshold)


def test_event_scan_first_detection_bin():
    events = np.array([2, 10, 11, 11, 40])
    assert scan_events(events, 5, 3) == (11, 3)
    assert scan_events(events, 5, 4) == (None, 3)
    assert scan_events(np.array([], dtype=int), 5, 1) == (None, 0)


def test_no_signal_never_detects(params):
    p = params.replace(c_background=0.0)
    cfg = _background(p, threshold=1)
    for trial in range(20):
        outcome = simulate_transit(None, p, cfg, trial)
        assert not outcome.detected
        assert outcome.total_counts == 0
        assert outcome.position is None


def test_transit_is_deterministic(field, params):
    cfg = TrialConfig.from_params(params, n_trials=1)
    assert simulate_transit(field, params, cfg, 3) == simulate_transit(field, params, cfg, 3)


def test_detection_position_lies_inside_the_vessel(field, params):
    cfg = TrialConfig.from_params(params)
    outcome = next(o for o in (simulate_transit(field, params, cfg, i) for i in range(50)) if o.detected)
    assert 0.0 <= outcome.position.r <= params.robot_max_radius
    x_min = params.numerics.x_min
    assert x_min <= outcome.position.x <= x_min + params.vessel_length + 1.0
    assert outcome.peak_window_count >= params.threshold


def test_source_field_is_required(params):
    with pytest.raises(ValueError):
        simulate_transit(None, params, TrialConfig.from_params(params), 0)


def test_brownian_transits(field, params):
    cfg = TrialConfig.from_params(params, brownian=True)
    outcomes = [simulate_transit(field, params, cfg, i) for i in range(5)]
    assert outcomes == [simulate_transit(field, params, cfg, i) for i in range(5)]
    for o in outcomes:
        assert o.total_counts > 0
        if o.detected:
            assert 0.0 <= o.position.r <= params.robot_max_radius


def test_wilson_interval():
    low, high = wilson_interval(50, 100)
    assert low == pytest.approx(0.4038, abs=1e-4)
    assert high == pytest.approx(0.5962, abs=1e-4)
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(0, 100)[1] == pytest.approx(3.8415 / 103.8415, rel=1e-4)
    assert wilson_interval(100, 100)[1] == 1.0


def test_all_trials_detect(params):
    p = params.replace(c_background=1.0)
    estimate = estimate_detection_prob(None, p, _background(p, threshold=1, n_trials=200))
    assert estimate.p_hat == 1.0
    assert estimate.ci_high == 1.0
    assert estimate.ci_low <= estimate.p_hat
    assert estimate.n_detections == 200


def test_same_seed_gives_identical_estimates(params):
    cfg = _background(params, n_trials=2_000)
    first = estimate_detection_curve(None, params, cfg, [1, 2, 3])
    second = estimate_detection_curve(None, params, cfg, [1, 2, 3])
    assert first == second
    assert estimates_frame(first).columns.tolist() == SIMULATE_COLUMNS


def test_worker_count_does_not_change_results(params, monkeypatch):
    monkeypatch.setattr(montecarlo, "CHUNK_SIZE", 250)
    cfg = _background(params, n_trials=1_000)
    serial = run_trials(None, params, cfg)
    parallel = run_trials(None, params, TrialConfig(**{**cfg.__dict__, "workers": 2}))
    np.testing.assert_array_equal(serial.peaks, parallel.peaks)
    np.testing.assert_array_equal(serial.totals, parallel.totals)


def test_curve_thresholds_follow_peak_counts(params):
    cfg = _background(params, n_trials=3_000)
    curve = estimate_detection_curve(None, params, cfg, [1, 2, 3, 4])
    hits = [e.n_detections for e in curve]
    assert hits == sorted(hits, reverse=True)
    for e in curve:
        assert e.ci_low <= e.p_hat <= e.ci_high


def test_background_threshold_one_matches_the_closed_form(params):
    n = 20_000
    estimate = estimate_detection_prob(None, params, _background(params, threshold=1, n_trials=n))
    analytic = per_robot_detection_prob(None, params, False, threshold=1)
    se = math.sqrt(analytic * (1.0 - analytic) / n)
    assert estimate.p_hat == pytest.approx(analytic, abs=4.0 * se + 1e-3)


def test_background_total_counts(params):
    batch = run_trials(None, params, _background(params, n_trials=20_000))
    radii, weights = entry_radii(params)
    gamma = params.capture_coefficient * params.c_background
    expected = float(np.dot(weights, gamma * params.vessel_length / velocity_profile(radii, params)))
    se = batch.totals.std() / math.sqrt(batch.totals.size)
    assert batch.totals.mean() == pytest.approx(expected, abs=4.0 * se + gamma * 1.0e-4)


@pytest.mark.slow
def test_source_total_counts(field, params):
    batch = run_trials(field, params, TrialConfig.from_params(params, n_trials=3_000))
    paths = transit_paths(field, params)
    gamma = params.capture_coefficient * params.c_background
    per_path = [params.capture_coefficient * trapezoid(c, t) + gamma * t[-1]
                for t, c in zip(paths.times, paths.conc)]
    expected = float(np.dot(paths.weights, per_path))
    se = batch.totals.std() / math.sqrt(batch.totals.size)
    assert batch.totals.mean() == pytest.approx(expected, abs=4.0 * se + 0.01 * expected)


@pytest.mark.slow
def test_halving_the_time_bin(params):
    n = 40_000
    coarse = estimate_detection_prob(None, params, _background(params, threshold=2, n_trials=n))
    fine = estimate_detection_prob(None, params, _background(params, threshold=2, n_trials=n, dt=5.0e-5))
    se = math.sqrt(2.0 * coarse.p_hat * (1.0 - coarse.p_hat) / n)
    assert fine.p_hat == pytest.approx(coarse.p_hat, abs=4.0 * se)


def test_empty_comparison(params):
    frame = compare_with_continuum(params, [])
    assert frame.empty
    assert frame.columns.tolist() == COMPARE_COLUMNS


@pytest.mark.slow
def test_comparison_with_the_continuum(field, params):
    frame = compare_with_continuum(params, [1, 5, 10], field, source_trials=3_000,
                                   background_trials=30_000)
    assert frame.columns.tolist() == COMPARE_COLUMNS
    assert len(frame) == 6

    background = frame[(frame["case"] == "background") & (frame["threshold"] == 1)].iloc[0]
    se = math.sqrt(background.p_analytic * (1.0 - background.p_analytic) / 30_000)
    assert abs(background.p_mc - background.p_analytic) < 4.0 * se + 1e-3

    source = frame[(frame["case"] == "source") & (frame["threshold"].isin([5, 10]))]
    for row in source.itertuples():
        assert row.analytic_in_ci or abs(row.ratio - 1.0) < 0.25


@pytest.mark.slow
def test_simulation_tracks_the_continuum_over_the_threshold_range(field, params):
    frame = compare_with_continuum(params, range(2, 16), field, source_trials=10_000,
                                   background_trials=1_000_000)
    assert len(frame) == 28
    assert set(frame["case"]) == {"source", "background"}
    for row in frame.itertuples():
        assert row.analytic_in_ci or abs(row.ratio - 1.0) < 0.25, row
