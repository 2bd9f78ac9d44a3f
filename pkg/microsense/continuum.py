"""
continuum.py

Fleet-level detection analysis built on the continuum description of the
robots.

Robots in the MONITOR state obey a steady advection–reaction balance in which
the detection hazard drains them into the DETECT state.  Robot diffusion is
negligible next to advection (Péclet ≈ 7×10⁴), so the balance is solved
exactly along streamlines: a robot entering at radius r keeps r, and its
chance to still be monitoring after the transit is exp(−∫α dt).

From the per-robot transit probabilities follow the true-positive rate of the
one vessel with the source, the false-positive rate of all the other vessels
in the tissue, and the mission ROC points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid

from microsense.chemfield import ScalarField
from microsense.errors import FieldSolveError
from microsense.hydro import velocity_profile
from microsense.params import UM3_PER_LITER, UM3_PER_M3, ScenarioParams
from microsense.poisson_detect import detection_hazard, tail_prob, window_tail_probability

logger = logging.getLogger(__name__)

RATES_COLUMNS = ["threshold", "sigma_source_per_s", "sigma_background_per_s"]
ROC_COLUMNS = ["threshold", "p_true", "p_false"]


@dataclass(frozen=True)
class DetectionRates:
    threshold: int
    sigma_source: float          # detections/s from the source vessel
    sigma_background: float      # false detections/s over all other vessels
    p_transit_source: float
    p_transit_background: float


@dataclass(frozen=True)
class RocPoint:
    threshold: int
    p_true: float
    p_false: float


# ───────────── 1) ENTRY RATES ───────────────────────────────────────────────────
def vessel_entry_rate(p: ScenarioParams) -> float:
    """σ₁ = ρ_robot·πR²·v_avg, robots entering one vessel per second."""
    return p.robot_density_um3 * math.pi * p.vessel_radius ** 2 * p.avg_velocity


def tissue_entry_rate(p: ScenarioParams) -> float:
    """σ = ρ_vessel·V_tissue·σ₁, robots entering any small vessel per second."""
    return p.vessel_count * vessel_entry_rate(p)


def scaled_fleet(p: ScenarioParams, factor: float) -> ScenarioParams:
    """Same scenario with the robot density multiplied by ``factor``."""
    return p.replace(robot_density=p.robot_density * factor)


# ───────────── 2) TRANSIT PATHS ─────────────────────────────────────────────────
@dataclass(frozen=True, eq=False)
class TransitPaths:
    """
    Source concentration C(t) and window counts K(t) along each entry streamline.

    Built once per field and reused for every threshold of a sweep.
    """

    radii: np.ndarray
    weights: np.ndarray          # flux weights, sum to 1
    times: tuple
    conc: tuple
    counts: tuple


def entry_radii(p: ScenarioParams, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss–Legendre radii on [0, R − a] with flux weights v(r)·2πr, normalised.
    """
    n = n or p.numerics.entry_radii
    xi, w = np.polynomial.legendre.leggauss(n)
    r_max = p.robot_max_radius
    radii = 0.5 * r_max * (xi + 1.0)
    weights = 0.5 * r_max * w * velocity_profile(radii, p) * 2.0 * math.pi * radii
    return radii, weights / weights.sum()


def _streamline(f: ScalarField, p: ScenarioParams, r: float):
    v = velocity_profile(r, p)
    transit = p.vessel_length / v
    h = p.numerics.quadrature_step
    n = max(2, int(math.ceil(transit / h)))
    t = np.linspace(0.0, transit, n + 1)
    x = f.grid.x_min + v * t
    conc = f.along_streamline(r, x)
    # cumulative source exposure; before entry the robot saw no source chemical
    exposure = cumulative_trapezoid(conc, t, initial=0.0)
    trailing = np.interp(t - p.measure_time, t, exposure, left=0.0)
    counts = p.capture_coefficient * (exposure - trailing)
    return t, conc, counts


def _check_field(f: ScalarField) -> None:
    if not np.all(np.isfinite(f.values)) or f.residual > 10.0 * f.grid.tolerance:
        raise FieldSolveError("field is not converged", f.residual)


def transit_paths(f: ScalarField, p: ScenarioParams) -> TransitPaths:
    _check_field(f)
    radii, weights = entry_radii(p)
    paths = [_streamline(f, p, float(r)) for r in radii]
    logger.debug("   • traced %d entry streamlines", len(paths))
    return TransitPaths(
        radii=radii,
        weights=weights,
        times=tuple(t for t, _, _ in paths),
        conc=tuple(c for _, c, _ in paths),
        counts=tuple(k for _, _, k in paths),
    )


# ───────────── 3) PER-ROBOT DETECTION ───────────────────────────────────────────
def streamline_detection_prob(p: ScenarioParams, r: float, hazard_t=None, times=None,
                              threshold: int | None = None) -> float:
    """
    1 − exp(−∫α dt) for one transit at entry radius ``r``.

    Without a hazard profile the background-only hazard is used, which is
    constant along the whole transit.
    """
    if hazard_t is None:
        alpha = detection_hazard(0.0, 0.0, p, threshold)
        return float(-math.expm1(-alpha * p.vessel_length / velocity_profile(r, p)))
    return float(-math.expm1(-trapezoid(hazard_t, times)))


def per_robot_detection_prob(f: ScalarField | None, p: ScenarioParams, with_source: bool,
                             threshold: int | None = None,
                             paths: TransitPaths | None = None) -> float:
    """Flux-weighted chance that a robot detects during one vessel transit."""
    if not with_source:
        radii, weights = entry_radii(p)
        probs = [streamline_detection_prob(p, float(r), threshold=threshold) for r in radii]
        return float(np.dot(weights, probs))
    if f is None and paths is None:
        raise ValueError("a solved field is needed when with_source is set")

    paths = paths or transit_paths(f, p)
    probs = []
    for t, conc, counts in zip(paths.times, paths.conc, paths.counts):
        alpha = detection_hazard(conc, counts, p, threshold)
        probs.append(streamline_detection_prob(p, 0.0, alpha, t))
    return float(np.clip(np.dot(paths.weights, probs), 0.0, 1.0))


def source_detection_rate(f: ScalarField, p: ScenarioParams, threshold: int | None = None,
                          paths: TransitPaths | None = None) -> float:
    """σ_source = σ₁ × per-robot detection probability in the source vessel."""
    return vessel_entry_rate(p) * per_robot_detection_prob(f, p, True, threshold, paths)


def false_positive_rate(p: ScenarioParams, threshold: int | None = None) -> float:
    """
    σ_background ≈ (L / (v_avg·T_measure)) · σ · Pr(k, C_threshold).

    A transit holds about L/(v_avg·T_measure) independent measurement windows.
    """
    m = p.threshold if threshold is None else threshold
    windows = p.vessel_length / (p.avg_velocity * p.measure_time)
    return windows * tissue_entry_rate(p) * window_tail_probability(p, m)


def detection_rates(f: ScalarField, p: ScenarioParams, thresholds) -> list[DetectionRates]:
    """True/false positive rates for each threshold, sharing one set of paths."""
    logger.info("▶️  detection rates for %d thresholds", len(thresholds))
    paths = transit_paths(f, p)
    sigma1 = vessel_entry_rate(p)
    rates = []
    for m in thresholds:
        p_src = per_robot_detection_prob(f, p, True, m, paths)
        p_bg = per_robot_detection_prob(None, p, False, m)
        rates.append(DetectionRates(
            threshold=int(m),
            sigma_source=sigma1 * p_src,
            sigma_background=false_positive_rate(p, m),
            p_transit_source=p_src,
            p_transit_background=p_bg,
        ))
        logger.debug("   • threshold %d: σ_source=%.4g/s σ_background=%.4g/s",
                     m, rates[-1].sigma_source, rates[-1].sigma_background)
    logger.info("✅ detection rates done")
    return rates


# ───────────── 4) MISSION ROC ───────────────────────────────────────────────────
def roc_from_rates(rates: list[DetectionRates], task_time: float, n: int, n_false: int = 1,
                   n_sources: int = 1) -> list[RocPoint]:
    points = []
    for rate in rates:
        true_mean = (n_sources * rate.sigma_source + rate.sigma_background) * task_time
        false_mean = rate.sigma_background * task_time
        points.append(RocPoint(rate.threshold, tail_prob(true_mean, n), tail_prob(false_mean, n_false)))
    return points


def mission_roc(f: ScalarField, p: ScenarioParams, thresholds, n: int | None = None,
                n_false: int | None = None, task_time: float | None = None,
                n_sources: int = 1) -> list[RocPoint]:
    """
    Probability of at least n source detections vs at least n_false false
    detections within T_task, one point per threshold.

    ``n_sources`` counts independent sources in the tissue, each adding its
    own σ_source.
    """
    rates = detection_rates(f, p, thresholds)
    return roc_from_rates(
        rates,
        p.task_time if task_time is None else task_time,
        p.required_detections if n is None else n,
        p.false_detections if n_false is None else n_false,
        n_sources,
    )


def best_roc_point(points: list[RocPoint]) -> RocPoint:
    """Point with the largest p_true − p_false (ties go to the lower threshold)."""
    return max(points, key=lambda pt: (pt.p_true - pt.p_false, -pt.threshold))


# ───────────── 5) BLOOD SAMPLE ──────────────────────────────────────────────────
def blood_sample_comparison(p: ScenarioParams, duration: float,
                            blood_volume: float = 5.0) -> tuple[float, float]:
    """
    Concentration added to the whole blood volume by the source over ``duration``
    seconds, in molecule/m^3, and its ratio to the background concentration.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if not blood_volume > 0:
        raise ValueError("blood volume must be positive")
    per_um3 = p.source_production_rate * duration / (blood_volume * UM3_PER_LITER)
    ratio = per_um3 / p.c_background if p.c_background > 0 else math.inf
    return per_um3 * UM3_PER_M3, ratio


# ───────────── 6) TABLES ────────────────────────────────────────────────────────
def rates_frame(rates: list[DetectionRates]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.threshold, r.sigma_source, r.sigma_background) for r in rates],
        columns=RATES_COLUMNS,
    )


def roc_frame(points: list[RocPoint]) -> pd.DataFrame:
    return pd.DataFrame([(pt.threshold, pt.p_true, pt.p_false) for pt in points],
                        columns=ROC_COLUMNS)
