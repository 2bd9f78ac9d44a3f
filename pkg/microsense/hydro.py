"""
hydro.py

Low-Reynolds-number flow primitives for a straight cylindrical vessel:
dimensionless numbers, the Poiseuille profile, Stokes drag, Brownian
displacement and passive advection of a robot along its streamline.

Positions are (r, x) pairs: radial distance from the axis and axial
coordinate, both in μm, with the flow running towards +x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants, integrate

from microsense.errors import DomainError
from microsense.params import ScenarioParams

CM_PER_UM = 1.0e-4
NEWTON_PER_DYNE = 1.0e-5
PA_S_PER_POISE = 0.1          # 1 g/(cm s) = 0.1 Pa s

# drag on a 1 μm sphere near the axis of a 5 μm pipe relative to the free value
CONFINED_DRAG_FACTOR = 3.0


@dataclass(frozen=True)
class Position:
    r: float   # μm from the axis
    x: float   # μm, downstream positive


def reynolds(size: float, speed: float, density: float, viscosity: float) -> float:
    """Re = s·ρ·v/η; the caller supplies consistent (e.g. cgs) units."""
    if not viscosity > 0:
        raise ValueError("viscosity must be positive")
    return size * density * speed / viscosity


def robot_reynolds(p: ScenarioParams, speed: float | None = None) -> float:
    """Reynolds number of a robot moving at ``speed`` μm/s (default v_avg)."""
    speed = p.avg_velocity if speed is None else speed
    return reynolds(p.robot_radius * CM_PER_UM, speed * CM_PER_UM, p.fluid_density, p.viscosity)


def _poiseuille(r, radius: float, avg_velocity: float):
    return 2.0 * avg_velocity * (1.0 - (np.asarray(r, dtype=float) / radius) ** 2)


def velocity_profile(r, p: ScenarioParams):
    """Axial fluid speed (μm/s) at distance ``r`` from the axis."""
    radius = p.vessel_radius
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > radius * (1 + 1e-12)):
        raise DomainError(f"r must lie in [0, {radius}] μm")
    speed = np.clip(_poiseuille(r_arr, radius, p.avg_velocity), 0.0, None)
    return float(speed) if speed.ndim == 0 else speed


def annulus_mean_velocity(r_lo, r_hi, p: ScenarioParams):
    """Flux-weighted mean of the Poiseuille speed over the annulus [r_lo, r_hi]."""
    radius, vavg = p.vessel_radius, p.avg_velocity
    r_lo = np.asarray(r_lo, dtype=float)
    r_hi = np.asarray(r_hi, dtype=float)
    # ∫ 2 v_avg (1 - r²/R²) r dr = v_avg (r² - r⁴/(2R²))
    antideriv = lambda r: vavg * (r ** 2 - r ** 4 / (2.0 * radius ** 2))
    return 2.0 * (antideriv(r_hi) - antideriv(r_lo)) / (r_hi ** 2 - r_lo ** 2)


def volumetric_flow(p: ScenarioParams) -> float:
    """∫₀ᴿ v(r)·2πr dr by adaptive quadrature, μm^3/s."""
    value, _ = integrate.quad(
        lambda r: _poiseuille(r, p.vessel_radius, p.avg_velocity) * 2.0 * math.pi * r,
        0.0, p.vessel_radius, epsabs=0.0, epsrel=1e-12,
    )
    return float(value)


def stokes_drag(a: float, v: float, viscosity: float) -> float:
    """Drag 6πaηv in newtons for a sphere of radius ``a`` μm at ``v`` μm/s."""
    dynes = 6.0 * math.pi * (a * CM_PER_UM) * viscosity * (v * CM_PER_UM)
    return dynes * NEWTON_PER_DYNE


def confined_drag(a: float, v: float, viscosity: float) -> float:
    return CONFINED_DRAG_FACTOR * stokes_drag(a, v, viscosity)


def stokes_einstein_diffusion(a: float, viscosity: float, temperature: float) -> float:
    """Free-sphere diffusion coefficient kT/(6πηa) in μm^2/s."""
    eta = viscosity * PA_S_PER_POISE
    d_m2 = constants.Boltzmann * temperature / (6.0 * math.pi * eta * a * 1.0e-6)
    return d_m2 * 1.0e12


def brownian_rms(diffusion: float, t: float) -> float:
    """Root-mean-square 3-D displacement √(6Dt), μm."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return math.sqrt(6.0 * diffusion * t)


def advect(pos: Position, tau: float, p: ScenarioParams) -> Position:
    """Where a passively carried robot now at ``pos`` was ``tau`` seconds ago."""
    return Position(pos.r, pos.x - velocity_profile(pos.r, p) * tau)


def radial_walk(r0: float, n_steps: int, dt: float, diffusion: float, r_max: float,
                rng: np.random.Generator) -> np.ndarray:
    """
    Radial positions after each of ``n_steps`` Brownian steps of length dt.

    Steps are N(0, 2·D·dt); the walk is reflected at the axis and at r_max.
    """
    steps = rng.normal(0.0, math.sqrt(2.0 * diffusion * dt), size=n_steps)
    path = r0 + np.cumsum(steps)
    # fold onto [0, r_max]: reflect at 0 and at r_max with period 2 r_max
    period = 2.0 * r_max
    path = np.mod(np.abs(path), period)
    return np.where(path > r_max, period - path, path)
