# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Reaction process integration and peak location unit tests."""

import typing

import numpy as np
import pytest

import model_core
import reaction
from exceptions import GridTooCoarseError, HorizonTooShortError, InvalidParameterError
from integrators import STEPPERS, linear_recurrence
from popularity_types import ModelParams, ReducedParams, TimeGrid

ParamsFactory = typing.Callable[[int], typing.List[ModelParams]]
ReducedFactory = typing.Callable[[int], typing.List[ReducedParams]]


def test_linear_recurrence_matches_loop() -> None:
    """
    arrange: a decay factor, a forcing sequence and an initial value.
    act: evaluate the recurrence as a linear filter.
    assert: the values match a plain loop.
    """
    forcing = np.array([1.0, -0.5, 2.0, 0.25])
    expected = [3.0]
    for value in forcing:
        expected.append(0.8 * expected[-1] + value)

    np.testing.assert_allclose(linear_recurrence(0.8, forcing, 3.0), expected)


@pytest.mark.parametrize("stepper", sorted(STEPPERS))
def test_steppers_agree_with_quadrature(stepper: str) -> None:
    """
    arrange: the view-rate figure parameters with gamma = 0.5 and a fine step.
    act: integrate 200 steps with the named integrator.
    assert: z at the end matches the quadrature of the integral form.
    """
    params = ReducedParams(a_direct=0.0055, b_wom=0.005, m_adopters=5e4, gamma=0.5)

    z, w = STEPPERS[stepper].integrate(params, 0.0, 0.1, 200)

    assert z[0] == 0.0
    assert w[0] == 0.0
    assert z[-1] == pytest.approx(reaction.z_quadrature(params, 20.0), rel=1e-3)


def test_initial_conditions(figure_params: ModelParams) -> None:
    """
    arrange: the view-rate figure parameters.
    act: solve the reaction process.
    assert: z, w and dw start at 0 and dw = gamma z everywhere.
    """
    trajectory = reaction.solve_reaction(figure_params, TimeGrid(dt=1.0, n_steps=100))

    assert (trajectory.z[0], trajectory.w[0], trajectory.dw[0]) == (0.0, 0.0, 0.0)
    np.testing.assert_array_equal(trajectory.dw, figure_params.gamma * trajectory.z)
    assert np.all(trajectory.z >= 0)
    assert np.all(trajectory.w >= 0)


@pytest.mark.parametrize("stepper", reaction.STEPPER_CHOICES)
def test_mass_balance_and_saturation(draw_reduced: ReducedFactory, stepper: str) -> None:
    """
    arrange: 30 random parameter sets and grids reaching tau t = 40.
    act: solve the reaction process with each stepper choice.
    assert: z + w = x on the grid, and at the end everybody interested has watched.
    """
    for params in draw_reduced(30):
        horizon = 40.0 / params.tau + 40.0 / params.gamma
        grid = TimeGrid(dt=horizon / 500, n_steps=501)

        trajectory = reaction.solve_reaction(params, grid, stepper=stepper)

        x = np.asarray(model_core.eval_x(params, grid.points()))
        gap = np.max(np.abs(trajectory.z + trajectory.w - x))
        assert gap <= 1e-6 * params.m_adopters
        assert trajectory.w[-1] == pytest.approx(params.m_adopters, rel=1e-6)
        assert trajectory.z[-1] <= 1e-6 * params.m_adopters


def test_ode_residual(draw_reduced: ReducedFactory) -> None:
    """
    arrange: 10 random parameter sets on grids resolving both rates.
    act: solve the reaction process and differentiate z with a five-point stencil.
    assert: z' + gamma z - x' is small against the scale of the rates.
    """
    for params in draw_reduced(10):
        dt = 0.01 / max(params.gamma, params.tau)
        grid = TimeGrid(dt=dt, n_steps=int(5.0 / (params.tau * dt)))
        trajectory = reaction.solve_reaction(params, grid)
        z = trajectory.z
        dz = (z[:-4] - 8.0 * z[1:-3] + 8.0 * z[3:-1] - z[4:]) / (12.0 * dt)
        dx = np.asarray(model_core.eval_dx(params, grid.points()))

        residual = dz + params.gamma * z[2:-2] - dx[2:-2]
        scale = max(params.gamma * np.max(z), np.max(dx))
        assert np.max(np.abs(residual)) <= 1e-6 * scale


def test_ode_agrees_with_quadrature(draw_reduced: ReducedFactory) -> None:
    """
    arrange: 50 random parameter sets.
    act: solve the reaction process and evaluate the integral form at a few grid points.
    assert: both agree within 1e-3 relative.
    """
    for params in draw_reduced(50):
        grid = TimeGrid(dt=0.05 / params.tau, n_steps=201)
        trajectory = reaction.solve_reaction(params, grid)

        for index in (20, 60, 120, 200):
            expected = reaction.z_quadrature(params, float(grid.points()[index]))
            assert trajectory.z[index] == pytest.approx(expected, rel=1e-3)


def test_z_quadrature_at_zero(figure_params: ModelParams) -> None:
    """
    arrange: the view-rate figure parameters.
    act: evaluate the integral form at t = 0.
    assert: the empty integral is 0.
    """
    assert reaction.z_quadrature(figure_params, 0.0) == 0.0


def test_z_quadrature_refuses_unresolvable_horizon() -> None:
    """
    arrange: gamma = 1000 and a horizon of 10^4, which needs 10^7 intervals to resolve.
    act: evaluate the integral form.
    assert: GridTooCoarseError before any sum is built.
    """
    params = ReducedParams(a_direct=0.00005, b_wom=0.05, m_adopters=5e5, gamma=1000.0)

    with pytest.raises(GridTooCoarseError) as error:
        reaction.z_quadrature(params, 1e4)

    assert str(reaction.QUADRATURE_MAX_INTERVALS) in error.value.message


def test_fast_reaction_quasi_steady_state() -> None:
    """
    arrange: gamma = 1000 with tau of about 0.05.
    act: evaluate z by quadrature in the middle of the S curve.
    assert: z is x'/gamma within 5%.
    """
    params = ModelParams(n_users=1e6, alpha=0.00005, beta=1e-7, q=0.5, gamma=1000.0)
    t_prime = model_core.critical_times(params).t_prime

    z = reaction.z_quadrature(params, t_prime)

    assert z == pytest.approx(model_core.eval_dx(params, t_prime) / params.gamma, rel=0.05)


def test_grid_too_coarse_without_refinement(figure_params: ModelParams) -> None:
    """
    arrange: a one-day grid for gamma = 10.
    act: solve the reaction process with refinement forbidden.
    assert: GridTooCoarseError.
    """
    with pytest.raises(GridTooCoarseError):
        reaction.solve_reaction(
            figure_params, TimeGrid(dt=1.0, n_steps=10), stepper="rk4", allow_refine=False
        )


def test_unknown_stepper(figure_params: ModelParams) -> None:
    """
    arrange: an unknown integrator name.
    act: solve the reaction process.
    assert: InvalidParameterError names the stepper.
    """
    with pytest.raises(InvalidParameterError) as error:
        reaction.solve_reaction(figure_params, TimeGrid(dt=1.0, n_steps=10), stepper="euler")

    assert error.value.field == "stepper"


def test_solve_slotted_balance() -> None:
    """
    arrange: the S-curve parameters with gamma = 0.05, one-day slots.
    act: run the slotted recursion.
    assert: z + w = x after every slot and the view counts have a single peak.
    """
    params = ModelParams(n_users=1e5, alpha=0.00005, beta=1e-6, q=0.5, gamma=0.05)

    trajectory = reaction.solve_slotted(params, 400)

    x = np.asarray(model_core.eval_x(params, trajectory.grid.points()))
    np.testing.assert_allclose(trajectory.z + trajectory.w, x, atol=1e-9 * params.m_adopters)
    assert trajectory.dw[0] == 0.0
    assert reaction.rate_sign_changes(trajectory.dw[1:]) == 1


def test_model_daily_views_integrate_views() -> None:
    """
    arrange: reduced parameters with an audience of 1000.
    act: compute 200 daily view counts.
    assert: the days add up to w(200) and nearly the whole audience.
    """
    params = ReducedParams(a_direct=0.1, b_wom=0.05, m_adopters=1000.0, gamma=0.5)

    views = reaction.model_daily_views(params, 200)

    assert views.shape == (200,)
    assert np.all(views >= 0)
    assert np.sum(views) == pytest.approx(1000.0, rel=1e-6)


def test_peak_when_direct_dominates() -> None:
    """
    arrange: alpha = 0.1 with B = 0.05.
    act: locate the peaks.
    assert: x' peaks at 0 and the view rate peaks shortly after.
    """
    params = ModelParams(n_users=1e6, alpha=0.1, beta=1e-7, q=0.5, gamma=1.0)

    report = reaction.find_peak(params, 100.0)

    assert report.t_peak_dx == 0.0
    assert 0.0 < report.t_peak_dw < 10.0
    assert report.dw_max > 0


def test_peak_ordering(draw_params: ParamsFactory) -> None:
    """
    arrange: 200 random parameter sets and horizons covering the view peak.
    act: locate the peaks and scan the view rate.
    assert: the view peak never precedes the spreading peak and is unique.
    """
    for params in draw_params(200):
        t_peak_dx = model_core.peak_time_dx(params)
        horizon = t_peak_dx + 20.0 / params.tau + 20.0 / params.gamma

        report = reaction.find_peak(params, horizon)

        assert report.t_peak_dw >= report.t_peak_dx - report.dt
        grid = TimeGrid(dt=report.dt, n_steps=reaction.DEFAULT_PEAK_POINTS)
        trajectory = reaction.solve_reaction(params, grid)
        assert reaction.rate_sign_changes(trajectory.dw) == 1


def test_horizon_too_short() -> None:
    """
    arrange: S-curve parameters whose view peak comes after day 138.
    act: locate the peak within 50 days.
    assert: HorizonTooShortError carries the horizon.
    """
    params = ModelParams(n_users=1e6, alpha=0.00005, beta=1e-7, q=0.5, gamma=1.0)

    with pytest.raises(HorizonTooShortError) as error:
        reaction.find_peak(params, 50.0)

    assert error.value.horizon == 50.0


def test_delay_scan_nonincreasing() -> None:
    """
    arrange: S-curve parameters and reaction rates from 0.001 to 10.
    act: scan the view-peak delay.
    assert: the delay shrinks as the reaction speeds up.
    """
    params = ModelParams(n_users=1e6, alpha=0.00005, beta=1e-7, q=0.5, gamma=1.0)

    scan = reaction.reaction_delay_scan(params, [10.0, 1.0, 0.1, 0.01, 0.001], 2000.0)

    assert scan.gammas == (0.001, 0.01, 0.1, 1.0, 10.0)
    assert scan.nonincreasing
    assert scan.delays[0] > scan.delays[-1]


def test_gamma_limit(figure_params: ModelParams) -> None:
    """
    arrange: the view-rate figure parameters on a dense grid.
    act: compare the normalized view rate with the normalized spreading rate for four gammas.
    assert: the gap is within 2% at gamma = 10 and decreases with gamma.
    """
    grid = TimeGrid(dt=0.1, n_steps=10001)

    gaps = reaction.gamma_limit_gaps(figure_params, [0.1, 1.0, 10.0, 100.0], grid)

    assert gaps[2] <= 0.02
    assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
