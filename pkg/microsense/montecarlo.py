"""
montecarlo.py

Discrete-event simulation of single robots transiting a vessel.

Each transit draws an entry radius (flux weighted), walks the robot through
the vessel in time bins of Δt, draws Poisson captures per bin with mean
4πDa(C + c)Δt and applies the exact trailing-window rule: detection fires in
the first bin where the counts of the last ⌈T_measure/Δt⌉ bins reach
C_threshold.

Every transit owns a random stream derived from (master_seed, trial_index),
so results do not depend on how trials are split between worker processes.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from microsense.chemfield import ScalarField, solve_source_field
from microsense.continuum import per_robot_detection_prob, transit_paths
from microsense.hydro import Position, radial_walk, velocity_profile
from microsense.params import ScenarioParams

logger = logging.getLogger(__name__)

CHUNK_SIZE = 10_000
SIMULATE_COLUMNS = ["threshold", "p_hat", "ci_low", "ci_high", "n_trials", "seed"]
COMPARE_COLUMNS = ["case", "threshold", "p_mc", "ci_low", "ci_high", "p_analytic", "ratio",
                   "analytic_in_ci"]


# ───────────── 1) TYPES ─────────────────────────────────────────────────────────
@dataclass(frozen=True)
class TrialConfig:
    with_source: bool = True
    dt: float = 1.0e-4                 # s
    brownian: bool = False
    n_trials: int = 100_000
    master_seed: int = 20_070_401
    threshold: int | None = None       # None: the scenario's C_threshold
    workers: int = 1

    @classmethod
    def from_params(cls, p: ScenarioParams, with_source: bool = True, **overrides) -> "TrialConfig":
        n = p.numerics
        cfg = cls(with_source=with_source, dt=n.mc_dt, brownian=n.brownian, n_trials=n.mc_trials,
                  master_seed=n.seed, workers=n.workers)
        return replace(cfg, **overrides)


@dataclass(frozen=True)
class TransitOutcome:
    detected: bool
    position: Position | None          # where the first detection fired
    time: float | None                 # seconds after entry
    peak_window_count: int
    total_counts: int


@dataclass(frozen=True)
class TrialEstimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n_trials: int
    n_detections: int
    threshold: int
    seed: int


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """Per-transit peak window counts and total counts, ordered by trial index."""

    peaks: np.ndarray
    totals: np.ndarray

    def detections(self, threshold: int) -> int:
        return int(np.count_nonzero(self.peaks >= threshold))


def check_config(cfg: TrialConfig, p: ScenarioParams) -> None:
    if not 0 < cfg.dt <= p.measure_time / 10.0 * (1 + 1e-12):
        raise ValueError("Δt must lie in (0, T_measure/10]")
    if cfg.n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if cfg.workers < 1:
        raise ValueError("workers must be at least 1")


# ───────────── 2) RANDOM STREAMS ────────────────────────────────────────────────
def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by (master_seed, trial_index)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))
    return np.random.Generator(np.random.Philox(seq))


def sample_entry_radius(u: float, p: ScenarioParams) -> float:
    """
    Inverse-CDF draw of the entry radius on [0, R − a] with density ∝ v(r)·r.
    """
    R2 = p.vessel_radius ** 2
    r_max = p.robot_max_radius
    cdf_max = r_max ** 2 / 2.0 - r_max ** 4 / (4.0 * R2)
    disc = max(R2 * R2 - 4.0 * R2 * u * cdf_max, 0.0)
    return math.sqrt(max(R2 - math.sqrt(disc), 0.0))


# ───────────── 3) WINDOW RULE ───────────────────────────────────────────────────
class SlidingWindowCounter:
    """Running sum of the last ``width`` per-bin counts, kept in a ring buffer."""

    def __init__(self, width: int):
        self._ring = [0] * width
        self._head = 0
        self.total = 0
        self.peak = 0

    def push(self, count: int) -> int:
        self.total += count - self._ring[self._head]
        self._ring[self._head] = count
        self._head = (self._head + 1) % len(self._ring)
        if self.total > self.peak:
            self.peak = self.total
        return self.total


def scan_counts(counts, width: int, threshold: int) -> tuple[int | None, int]:
    """Bin-by-bin scan: (first firing bin or None, peak window count)."""
    window = SlidingWindowCounter(width)
    first = None
    for b, c in enumerate(counts):
        if window.push(int(c)) >= threshold and first is None:
            first = b
    return first, window.peak


def scan_events(event_bins: np.ndarray, width: int, threshold: int) -> tuple[int | None, int]:
    """
    Same rule applied to the sorted bin indices of individual captures.

    The window ending at the bin of capture j holds every capture i ≤ j whose
    bin is within ``width − 1`` bins of it.
    """
    if event_bins.size == 0:
        return None, 0
    starts = np.searchsorted(event_bins, event_bins - (width - 1), side="left")
    in_window = np.arange(event_bins.size) - starts + 1
    hits = np.flatnonzero(in_window >= threshold)
    first = int(event_bins[hits[0]]) if hits.size else None
    return first, int(in_window.max())


# ───────────── 4) SINGLE TRANSIT ────────────────────────────────────────────────
def _window_bins(p: ScenarioParams, dt: float) -> int:
    return int(math.ceil(p.measure_time / dt - 1e-9))


def _deterministic_transit(f, p, cfg, rng, threshold, width, x_entry):
    r0 = sample_entry_radius(rng.random(), p)
    v = velocity_profile(r0, p)
    n_bins = int(math.ceil(p.vessel_length / v / cfg.dt - 1e-9))
    if cfg.with_source:
        x_mid = x_entry + v * cfg.dt * (np.arange(n_bins) + 0.5)
        conc = f.along_streamline(r0, x_mid)
    else:
        conc = np.zeros(n_bins)
    per_bin = p.capture_coefficient * (conc + p.effective_background) * cfg.dt

    # Poisson counts per bin, drawn as a Poisson total spread over the bins in
    # proportion to their means
    cumulative = np.cumsum(per_bin)
    total = int(rng.poisson(cumulative[-1])) if cumulative[-1] > 0 else 0
    bins = np.searchsorted(cumulative, np.sort(rng.random(total)) * cumulative[-1], side="right")
    bins = np.minimum(bins, n_bins - 1)

    first, peak = scan_events(bins, width, threshold)
    if first is None:
        return TransitOutcome(False, None, None, peak, total)
    t = (first + 1) * cfg.dt
    return TransitOutcome(True, Position(r0, x_entry + v * t), t, peak, total)


def _brownian_transit(f, p, cfg, rng, threshold, width, x_entry):
    r0 = sample_entry_radius(rng.random(), p)
    r_max = p.robot_max_radius
    # slowest allowed streamline bounds the number of bins
    max_bins = int(math.ceil(p.vessel_length / velocity_profile(r_max, p) / cfg.dt)) + 1
    radii = radial_walk(r0, max_bins, cfg.dt, p.robot_diffusion, r_max, rng)
    x_end = x_entry + np.cumsum(velocity_profile(radii, p) * cfg.dt)
    n_bins = int(np.searchsorted(x_end, x_entry + p.vessel_length, side="left")) + 1
    n_bins = min(n_bins, max_bins)
    radii, x_end = radii[:n_bins], x_end[:n_bins]
    x_mid = x_end - 0.5 * velocity_profile(radii, p) * cfg.dt

    if cfg.with_source:
        conc = f.sample(radii, x_mid)
    else:
        conc = np.zeros(n_bins)
    counts = rng.poisson(p.capture_coefficient * (conc + p.effective_background) * cfg.dt)

    first, peak = scan_counts(counts, width, threshold)
    total = int(counts.sum())
    if first is None:
        return TransitOutcome(False, None, None, peak, total)
    return TransitOutcome(True, Position(float(radii[first]), float(x_end[first])),
                          (first + 1) * cfg.dt, peak, total)


def simulate_transit(f: ScalarField | None, p: ScenarioParams, cfg: TrialConfig,
                     trial_index: int) -> TransitOutcome:
    """One robot from x_min to x_min + L; reproducible from (master_seed, trial_index)."""
    if cfg.with_source and f is None:
        raise ValueError("a solved field is needed when with_source is set")
    rng = trial_rng(cfg.master_seed, trial_index)
    threshold = p.threshold if cfg.threshold is None else cfg.threshold
    width = _window_bins(p, cfg.dt)
    x_entry = f.grid.x_min if f is not None else p.numerics.x_min
    engine = _brownian_transit if cfg.brownian else _deterministic_transit
    return engine(f if cfg.with_source else None, p, cfg, rng, threshold, width, x_entry)


# ───────────── 5) BATCHES ───────────────────────────────────────────────────────
def _run_chunk(args) -> tuple[np.ndarray, np.ndarray]:
    f, p, cfg, start, stop = args
    peaks = np.empty(stop - start, dtype=np.int32)
    totals = np.empty(stop - start, dtype=np.int32)
    for i, trial in enumerate(range(start, stop)):
        outcome = simulate_transit(f, p, cfg, trial)
        peaks[i] = outcome.peak_window_count
        totals[i] = outcome.total_counts
    return peaks, totals


def run_trials(f: ScalarField | None, p: ScenarioParams, cfg: TrialConfig,
               progress: bool = False) -> TrialBatch:
    """All transits of ``cfg``, split in fixed chunks and reduced in trial order."""
    check_config(cfg, p)
    f = f if cfg.with_source else None
    chunks = [(f, p, cfg, start, min(start + CHUNK_SIZE, cfg.n_trials))
              for start in range(0, cfg.n_trials, CHUNK_SIZE)]
    case = "source" if cfg.with_source else "background"
    logger.info("▶️  simulating %d %s transits on %d worker(s)", cfg.n_trials, case, cfg.workers)

    bar = tqdm(total=cfg.n_trials, desc=f"Transits ({case})", disable=not progress)
    results = []
    if cfg.workers == 1 or len(chunks) == 1:
        for chunk in chunks:
            results.append(_run_chunk(chunk))
            bar.update(chunk[4] - chunk[3])
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for chunk, result in zip(chunks, pool.map(_run_chunk, chunks)):
                results.append(result)
                bar.update(chunk[4] - chunk[3])
    bar.close()

    batch = TrialBatch(np.concatenate([r[0] for r in results]),
                       np.concatenate([r[1] for r in results]))
    logger.info("✅ %s transits done", case)
    return batch


def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for k successes out of n."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p_hat = k / n
    denom = 1.0 + z * z / n
    centre = (p_hat + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)) / denom
    low = 0.0 if k == 0 else min(max(centre - half, 0.0), p_hat)
    high = 1.0 if k == n else max(min(centre + half, 1.0), p_hat)
    return low, high


def _estimate(batch: TrialBatch, threshold: int, cfg: TrialConfig) -> TrialEstimate:
    n = batch.peaks.size
    k = batch.detections(threshold)
    low, high = wilson_interval(k, n)
    return TrialEstimate(k / n, low, high, n, k, int(threshold), cfg.master_seed)


def estimate_detection_curve(f: ScalarField | None, p: ScenarioParams, cfg: TrialConfig,
                             thresholds, progress: bool = False) -> list[TrialEstimate]:
    """
    Detection probability for several thresholds from one batch of transits.

    A transit detects at threshold θ exactly when its peak window count is ≥ θ.
    """
    batch = run_trials(f, p, cfg, progress)
    return [_estimate(batch, int(m), cfg) for m in thresholds]


def estimate_detection_prob(f: ScalarField | None, p: ScenarioParams, cfg: TrialConfig,
                            progress: bool = False) -> TrialEstimate:
    threshold = p.threshold if cfg.threshold is None else cfg.threshold
    return estimate_detection_curve(f, p, cfg, [threshold], progress)[0]


def estimates_frame(estimates: list[TrialEstimate]) -> pd.DataFrame:
    return pd.DataFrame(
        [(e.threshold, e.p_hat, e.ci_low, e.ci_high, e.n_trials, e.seed) for e in estimates],
        columns=SIMULATE_COLUMNS,
    )


# ───────────── 6) CONTINUUM CROSS-CHECK ─────────────────────────────────────────
def compare_with_continuum(p: ScenarioParams, thresholds, f: ScalarField | None = None,
                           source_trials: int | None = None,
                           background_trials: int | None = None,
                           progress: bool = False) -> pd.DataFrame:
    """
    Monte Carlo and continuum per-transit detection probabilities side by side,
    for a robot in the source vessel and one in a source-free vessel.

    ``analytic_in_ci`` flags whether the continuum value falls inside the
    Monte Carlo 95% interval.
    """
    thresholds = [int(m) for m in thresholds]
    if not thresholds:
        return pd.DataFrame(columns=COMPARE_COLUMNS)

    f = f if f is not None else solve_source_field(p)
    paths = transit_paths(f, p)
    source_cfg = TrialConfig.from_params(p, True)
    if source_trials is not None:
        source_cfg = replace(source_cfg, n_trials=source_trials)
    background_cfg = TrialConfig.from_params(p, False, n_trials=background_trials or 100 * source_cfg.n_trials)

    rows = []
    for case, cfg in (("source", source_cfg), ("background", background_cfg)):
        estimates = estimate_detection_curve(f, p, cfg, thresholds, progress)
        for est in estimates:
            analytic = per_robot_detection_prob(f, p, cfg.with_source, est.threshold, paths)
            ratio = analytic / est.p_hat if est.p_hat > 0 else math.nan
            rows.append((case, est.threshold, est.p_hat, est.ci_low, est.ci_high, analytic, ratio,
                         bool(est.ci_low <= analytic <= est.ci_high)))
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)
