"""
poisson_detect.py

Counting statistics of diffusive molecule capture by a robot.

A robot is an ideal absorbing sphere of radius a that samples the undisturbed
concentration at its centre: it captures molecules at rate 4πDaC and the
number captured in any interval is Poisson distributed.  A robot declares a
detection once it has seen at least C_threshold counts within the trailing
T_measure window.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special
from scipy.integrate import trapezoid

from microsense.chemfield import ScalarField
from microsense.errors import DomainError
from microsense.hydro import Position, velocity_profile
from microsense.params import ScenarioParams


def capture_rate(D, a, C):
    """Diffusive capture rate 4πDaC of an absorbing sphere, counts/s."""
    return 4.0 * math.pi * D * a * C


def _log_pmf(mu, n):
    # xlogy(0, 0) == 0 keeps Po(0, 0) == 1
    return special.xlogy(n, mu) - mu - special.gammaln(np.asarray(n, dtype=float) + 1.0)


def poisson_pmf(mu: float, n: int) -> float:
    """Po(μ, n) = e^{−μ} μⁿ / n!, evaluated in log space."""
    if mu < 0 or n < 0:
        raise ValueError("poisson_pmf needs μ ≥ 0 and n ≥ 0")
    return float(np.exp(_log_pmf(float(mu), int(n))))


def tail_prob(mu, E: int):
    """Pr(μ, E): probability of at least E events when μ are expected."""
    if E <= 0:
        return 1.0 if np.ndim(mu) == 0 else np.ones_like(np.asarray(mu, dtype=float))
    value = np.clip(special.pdtrc(E - 1, np.asarray(mu, dtype=float)), 0.0, 1.0)
    return float(value) if np.ndim(value) == 0 else value


def background_counts(p: ScenarioParams) -> float:
    """k = 4πDa·c·T_measure, expected background counts per window."""
    return p.capture_coefficient * p.effective_background * p.measure_time


def window_tail_probability(p: ScenarioParams, threshold: int | None = None) -> float:
    """Chance that background alone fills one measurement window."""
    return tail_prob(background_counts(p), p.threshold if threshold is None else threshold)


def expected_counts(f: ScalarField, pos: Position, p: ScenarioParams) -> float:
    """
    K at ``pos``: source counts expected over the trailing T_measure window.

    The robot is carried back along its streamline (r fixed, x − v(r)τ) and
    the concentration is integrated with the trapezoid rule.
    """
    if not 0.0 <= pos.r <= p.vessel_radius:
        raise DomainError(f"r={pos.r} μm lies outside the vessel")
    step = p.numerics.quadrature_step
    n = max(1, int(math.ceil(p.measure_time / step - 1e-9)))
    tau = np.linspace(0.0, p.measure_time, n + 1)
    past_x = pos.x - velocity_profile(pos.r, p) * tau
    conc = f.along_streamline(pos.r, past_x)
    return float(p.capture_coefficient * trapezoid(conc, tau))


def last_count_fraction(mu, threshold: int):
    """
    Po(μ, m−1) / Σ_{n<m} Po(μ, n) with m = threshold.

    The probability a monitoring robot sits exactly one count below the
    threshold, given it has not reached it yet.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    n = np.arange(threshold, dtype=float)
    log_terms = _log_pmf(mu[:, None], n[None, :])
    with np.errstate(invalid="ignore"):
        frac = np.exp(log_terms[:, -1] - special.logsumexp(log_terms, axis=1))
    return np.nan_to_num(frac, nan=0.0)


def detection_hazard(C_here, K, p: ScenarioParams, threshold: int | None = None,
                     k: float | None = None):
    """
    Rate (1/s) at which a monitoring robot first crosses the count threshold.

    4πDa(C + c) · Po(K + k, m − 1) / Σ_{n<m} Po(K + k, n); with C = K = 0 it
    is the false-positive hazard in a source-free vessel.
    """
    m = p.threshold if threshold is None else threshold
    if m < 1:
        raise ValueError("threshold must be at least 1")
    k = background_counts(p) if k is None else k
    scalar = np.ndim(C_here) == 0 and np.ndim(K) == 0
    C_here, K = np.broadcast_arrays(np.asarray(C_here, dtype=float), np.asarray(K, dtype=float))

    gamma = p.capture_coefficient * (C_here + p.effective_background)
    frac = last_count_fraction((K + k).ravel(), m).reshape(K.shape)
    hazard = gamma * frac
    return float(hazard) if scalar else hazard
