import math

import numpy as np
import pytest

from microsense.errors import DomainError
from microsense.hydro import (
    CONFINED_DRAG_FACTOR,
    Position,
    advect,
    brownian_rms,
    confined_drag,
    radial_walk,
    reynolds,
    robot_reynolds,
    stokes_drag,
    stokes_einstein_diffusion,
    velocity_profile,
    volumetric_flow,
)


def test_robot_reynolds_number(params):
    assert robot_reynolds(params) == pytest.approx(1.0e-3)
    assert robot_reynolds(params, speed=0.0) == 0.0


def test_large_object_reynolds_number_is_a_billion_times_larger(params):
    # 1 m at 1 m/s in water, cgs units
    large = reynolds(100.0, 100.0, 1.0, 1.0e-2)
    assert large == pytest.approx(1.0e6)
    assert large / robot_reynolds(params) == pytest.approx(1.0e9)


def test_reynolds_needs_positive_viscosity():
    with pytest.raises(ValueError):
        reynolds(1.0, 1.0, 1.0, 0.0)


def test_velocity_profile(params):
    assert velocity_profile(0.0, params) == pytest.approx(2000.0)
    assert velocity_profile(5.0, params) == pytest.approx(0.0)
    assert velocity_profile(2.5, params) == pytest.approx(1500.0)
    np.testing.assert_allclose(velocity_profile(np.array([0.0, 2.5]), params), [2000.0, 1500.0])


@pytest.mark.parametrize("r", [-0.1, 5.01])
def test_velocity_profile_outside_vessel(params, r):
    with pytest.raises(DomainError):
        velocity_profile(r, params)


def test_flux_identity(params):
    expected = math.pi * params.vessel_radius ** 2 * params.avg_velocity
    assert volumetric_flow(params) == pytest.approx(expected, rel=1e-6)


def test_stokes_drag(params):
    assert stokes_drag(1.0, 1000.0, params.viscosity) == pytest.approx(1.885e-11, rel=1e-3)
    assert stokes_drag(1.0, 0.0, params.viscosity) == 0.0
    assert stokes_drag(1.0, 2000.0, params.viscosity) == pytest.approx(
        2.0 * stokes_drag(1.0, 1000.0, params.viscosity))
    assert confined_drag(1.0, 1000.0, params.viscosity) == pytest.approx(
        CONFINED_DRAG_FACTOR * stokes_drag(1.0, 1000.0, params.viscosity))


def test_stokes_einstein_estimate_is_close_to_the_table_value(params):
    d = stokes_einstein_diffusion(params.robot_radius, params.viscosity, params.temperature)
    assert d == pytest.approx(0.227, rel=0.01)


def test_brownian_rms():
    assert brownian_rms(0.076, 1.0) == pytest.approx(0.675, rel=1e-3)
    assert brownian_rms(0.076, 0.0) == 0.0
    assert brownian_rms(100.0, 0.01) == pytest.approx(math.sqrt(6.0))
    with pytest.raises(ValueError):
        brownian_rms(1.0, -1.0)


def test_advect(params):
    assert advect(Position(2.0, 50.0), 0.0, params) == Position(2.0, 50.0)
    back = advect(Position(0.0, 50.0), 0.01, params)
    assert back.r == 0.0
    assert back.x == pytest.approx(30.0)
    assert advect(Position(5.0, 12.0), 3.0, params) == Position(5.0, 12.0)


def test_advect_composes(params):
    pos = Position(1.5, 200.0)
    twice = advect(advect(pos, 0.004, params), 0.006, params)
    once = advect(pos, 0.01, params)
    assert twice.r == once.r
    assert twice.x == pytest.approx(once.x)


def test_radial_walk_stays_inside_and_matches_diffusive_spread():
    rng = np.random.default_rng(7)
    diffusion, dt, n_steps = 0.076, 1.0e-4, 1000
    finals = np.array([radial_walk(2.0, n_steps, dt, diffusion, 4.0, rng)[-1] for _ in range(10_000)])
    assert finals.min() >= 0.0 and finals.max() <= 4.0
    rms = math.sqrt(np.mean((finals - 2.0) ** 2))
    assert rms == pytest.approx(math.sqrt(2.0 * diffusion * n_steps * dt), rel=0.05)


def test_radial_walk_reflects_at_both_ends():
    rng = np.random.default_rng(3)
    path = radial_walk(0.05, 5000, 1.0e-3, 10.0, 1.0, rng)
    assert path.min() >= 0.0
    assert path.max() <= 1.0
