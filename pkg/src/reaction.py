# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Numerical solution of the user-reaction process and location of the view-rate peak.

The reaction process is

    z'(t) = -gamma z(t) + x'(t),    w'(t) = gamma z(t),    z(0) = w(0) = 0,

driven by the closed-form spreading rate x'(t). There is no closed form for z(t); it is
integrated on a grid and cross-checked against the integral form
z(t) = exp(-gamma t) * integral_0^t x'(s) exp(gamma s) ds.
"""

import dataclasses
import logging
import math
import typing

import numpy as np

import model_core
from exceptions import GridTooCoarseError, HorizonTooShortError, InvalidParameterError
from integrators import (
    STEPPERS,
    ExponentialStepper,
    ReactionStepperBase,
    RungeKutta4Stepper,
    linear_recurrence,
)
from popularity_types import (
    FloatArray,
    PeakReport,
    ReactionTrajectory,
    SpreadingParams,
    TimeGrid,
)

logger = logging.getLogger(__name__)

# largest rate * step product an RK4 substep may take
STABILITY_BOUND = 0.1
# beyond this gamma * dt the auto stepper switches to the exponential integrator
EXPONENTIAL_FALLBACK = 1.0
# tau * h of the exponential integrator substeps, which only need to resolve the forcing
FORCING_RESOLUTION = 0.02
QUADRATURE_RTOL = 1e-4
QUADRATURE_START_INTERVALS = 64
QUADRATURE_MAX_INTERVALS = 2**21
DEFAULT_PEAK_POINTS = 4001
GOLDEN_SECTION_TOL = 1e-9
# initial layers of length 1/gamma skipped when comparing the view rate with x'
TRANSIENT_LAYERS = 10.0
STEPPER_CHOICES = ("auto", RungeKutta4Stepper.name, ExponentialStepper.name)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQUARE = (3.0 - math.sqrt(5.0)) / 2.0


class DelayScan(typing.NamedTuple):
    """How the view-rate peak delay changes with the reaction rate.

    Attrs:
        gammas: the reaction rates, ascending.
        delays: t_peak_dw - t_peak_dx for each reaction rate.
        nonincreasing: whether the delays never grow with gamma (within one grid cell).
    """

    gammas: typing.Tuple[float, ...]
    delays: typing.Tuple[float, ...]
    nonincreasing: bool


def _with_gamma(params: SpreadingParams, gamma: float) -> SpreadingParams:
    """Copy the parameters with another reaction rate."""
    record: typing.Any = params
    return typing.cast(SpreadingParams, dataclasses.replace(record, gamma=gamma))


def _select_stepper(
    params: SpreadingParams, dt: float, stepper: str, allow_refine: bool
) -> typing.Tuple[ReactionStepperBase, int]:
    """Pick the integrator and the number of substeps per grid step.

    Args:
        params: model parameters.
        dt: grid spacing.
        stepper: ``auto``, ``rk4`` or ``exponential``.
        allow_refine: whether substeps may be inserted between grid points.

    Returns:
        The integrator and the number of substeps per grid step.

    Raises:
        GridTooCoarseError: when the grid is too coarse and refinement is forbidden.
        InvalidParameterError: when the stepper name is unknown.
    """
    if stepper not in STEPPER_CHOICES:
        raise InvalidParameterError(
            "stepper", f"unknown stepper {stepper!r}, expecting one of {STEPPER_CHOICES}"
        )
    tau = params.a_direct + params.b_wom
    use_exponential = stepper == ExponentialStepper.name or (
        stepper == "auto" and params.gamma * dt > EXPONENTIAL_FALLBACK
    )
    if use_exponential:
        chosen: ReactionStepperBase = STEPPERS[ExponentialStepper.name]
        substeps = math.ceil(tau * dt / FORCING_RESOLUTION)
    else:
        chosen = STEPPERS[RungeKutta4Stepper.name]
        substeps = math.ceil(max(params.gamma, tau) * dt / STABILITY_BOUND)
    substeps = max(substeps, 1)
    if substeps > 1 and not allow_refine:
        logger.error(
            "Grid spacing %s needs %d %s substeps but refinement is disabled",
            dt,
            substeps,
            chosen.name,
        )
        raise GridTooCoarseError(
            f"dt={dt!r} exceeds the stability bound: gamma*dt={params.gamma * dt!r}, "
            f"tau*dt={tau * dt!r}"
        )
    return chosen, substeps


def solve_reaction(
    params: SpreadingParams,
    grid: TimeGrid,
    stepper: str = "auto",
    allow_refine: bool = True,
) -> ReactionTrajectory:
    """Integrate the reaction process on a grid starting at t = 0.

    Args:
        params: model parameters.
        grid: the output grid; its first point must be 0.
        stepper: ``auto`` (Runge-Kutta with substeps, exponential integrator once
            gamma * dt > 1), ``rk4`` or ``exponential``.
        allow_refine: whether substeps may be inserted between grid points.

    Returns:
        z, w and dw = gamma z on the grid.

    Raises:
        InvalidParameterError: when the grid does not start at 0.
    """
    if grid.t_start != 0:
        raise InvalidParameterError("t_start", "the reaction process starts at t = 0")
    chosen, substeps = _select_stepper(params, grid.dt, stepper, allow_refine)
    logger.debug(
        "Solving the reaction process with %s, %d substeps per grid step", chosen.name, substeps
    )
    n_steps = (grid.n_steps - 1) * substeps
    z, w = chosen.integrate(params, 0.0, grid.dt / substeps, n_steps)
    z, w = z[::substeps], w[::substeps]
    # roundoff may leave values a few ulps below zero
    z = np.maximum(z, 0.0)
    w = np.maximum(w, 0.0)
    return ReactionTrajectory(grid=grid, z=z, w=w, dw=params.gamma * z)


def z_quadrature(params: SpreadingParams, t: float) -> float:
    """Evaluate z(t) from its integral form by midpoint Riemann sums.

    The sums start from the smallest power-of-two interval count whose intervals resolve the
    fastest rate, then double until two successive sums agree to :data:`QUADRATURE_RTOL`.

    Args:
        params: model parameters.
        t: nonnegative time.

    Returns:
        z(t).

    Raises:
        InvalidParameterError: when t is negative.
        GridTooCoarseError: when resolving max(gamma, tau) over [0, t] needs more than
            :data:`QUADRATURE_MAX_INTERVALS` intervals.
    """
    if not math.isfinite(t) or t < 0:
        raise InvalidParameterError("t", f"must be finite and nonnegative, got {t!r}")
    if t == 0:
        return 0.0
    required = max(params.gamma, params.a_direct + params.b_wom) * t
    if required > QUADRATURE_MAX_INTERVALS:
        raise GridTooCoarseError(
            f"quadrature of z({t}) needs {math.ceil(required)} intervals, "
            f"at most {QUADRATURE_MAX_INTERVALS} allowed"
        )
    intervals = QUADRATURE_START_INTERVALS
    while intervals < required:
        intervals *= 2
    previous = math.nan
    while True:
        width = t / intervals
        midpoints = (np.arange(intervals, dtype=np.float64) + 0.5) * width
        # exp(-gamma (t - s)) stays in (0, 1], the factored form would overflow
        weights = np.exp(params.gamma * (midpoints - t))
        value = float(np.sum(np.asarray(model_core.eval_dx(params, midpoints)) * weights) * width)
        if abs(value - previous) <= QUADRATURE_RTOL * abs(value):
            return value
        if intervals >= QUADRATURE_MAX_INTERVALS:
            logger.warning("Quadrature of z(%s) stopped at %d intervals", t, intervals)
            return value
        previous = value
        intervals *= 2


def solve_slotted(
    params: SpreadingParams, n_slots: int, dt_slot: float = 1.0
) -> ReactionTrajectory:
    """Run the discrete-time reaction recursion over time slots.

    Each slot, every pending viewer watches with probability p = 1 - exp(-gamma dt_slot),
    and the users who became intending viewers during the slot join the pending set
    afterwards: z_{k+1} = z_k (1 - p) + (x_{k+1} - x_k). This is the mean behaviour of the
    stochastic simulator.

    Args:
        params: model parameters.
        n_slots: number of slots.
        dt_slot: slot length.

    Returns:
        z and w after each slot; dw holds the views made during each slot (0 for slot 0).
    """
    grid = TimeGrid(dt=dt_slot, n_steps=n_slots + 1)
    x = np.asarray(model_core.eval_x(params, grid.points()))
    p_view = -math.expm1(-params.gamma * dt_slot)
    z = linear_recurrence(1.0 - p_view, np.diff(x), 0.0)
    views = np.concatenate(([0.0], p_view * z[:-1]))
    return ReactionTrajectory(grid=grid, z=z, w=np.cumsum(views), dw=views)


def model_daily_views(
    params: SpreadingParams, n_days: int, stepper: str = ExponentialStepper.name
) -> FloatArray:
    """Compute the views the model predicts for each day.

    Day d's views are w(d + 1) - w(d), the integral of the view rate over the day.

    Args:
        params: model parameters.
        n_days: number of days.
        stepper: integrator name, see :func:`solve_reaction`.

    Returns:
        The views of days 0 .. n_days - 1.
    """
    trajectory = solve_reaction(params, TimeGrid(dt=1.0, n_steps=n_days + 1), stepper=stepper)
    # late increments of a saturated w can round below zero
    return np.maximum(np.diff(trajectory.w), 0.0)


def rate_sign_changes(values: FloatArray) -> int:
    """Count the sign changes of the first differences of a sequence, ignoring flat steps.

    Args:
        values: the sequence.

    Returns:
        Number of times the sequence switches between rising and falling.
    """
    signs = np.sign(np.diff(values))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _golden_section_argmax(
    function: typing.Callable[[float], float], lower: float, upper: float, tol: float
) -> float:
    """Locate the maximum of a unimodal function by golden-section search.

    Args:
        function: the function to maximize.
        lower: left end of the bracket.
        upper: right end of the bracket.
        tol: width of the final bracket.

    Returns:
        The middle of the final bracket.
    """
    width = upper - lower
    if width <= tol:
        return 0.5 * (lower + upper)
    n_iterations = int(math.ceil(math.log(tol / width) / math.log(_INV_PHI)))
    inner_left = lower + _INV_PHI_SQUARE * width
    inner_right = lower + _INV_PHI * width
    value_left = function(inner_left)
    value_right = function(inner_right)
    for _ in range(n_iterations - 1):
        width *= _INV_PHI
        if value_left > value_right:
            upper, inner_right, value_right = inner_right, inner_left, value_left
            inner_left = lower + _INV_PHI_SQUARE * width
            value_left = function(inner_left)
        else:
            lower, inner_left, value_left = inner_left, inner_right, value_right
            inner_right = lower + _INV_PHI * width
            value_right = function(inner_right)
    if value_left > value_right:
        return 0.5 * (lower + inner_right)
    return 0.5 * (inner_left + upper)


def find_peak(
    params: SpreadingParams, horizon: float, n_points: int = DEFAULT_PEAK_POINTS
) -> PeakReport:
    """Locate the peaks of x'(t) and of the view rate dw/dt on [0, horizon].

    The view rate is scanned on a dense grid; the best cell is refined by golden-section
    search, which is valid because the view rate has a unique peak.

    Args:
        params: model parameters.
        horizon: end of the scanned interval.
        n_points: number of scan points.

    Returns:
        The peak report.

    Raises:
        HorizonTooShortError: when the view rate is still rising at the horizon.
        InvalidParameterError: when the horizon or the number of points is invalid.
    """
    if not math.isfinite(horizon) or horizon <= 0:
        raise InvalidParameterError("horizon", f"must be positive, got {horizon!r}")
    if n_points < 3:
        raise InvalidParameterError("n_points", f"must be at least 3, got {n_points!r}")
    grid = TimeGrid(dt=horizon / (n_points - 1), n_steps=n_points)
    trajectory = solve_reaction(params, grid)
    index = int(np.argmax(trajectory.dw))
    if index >= n_points - 1:
        raise HorizonTooShortError(
            horizon, f"the view rate is still rising at the horizon t={horizon!r}"
        )
    if rate_sign_changes(trajectory.dw) > 1:
        logger.warning("The view rate has more than one turning point on the scan grid")
    chosen, substeps = _select_stepper(params, grid.dt, "auto", allow_refine=True)
    left = max(index - 1, 0)
    left_time = left * grid.dt
    initial = (float(trajectory.z[left]), float(trajectory.w[left]))

    def view_rate(t: float) -> float:
        """Integrate from the left end of the bracket to t and return gamma z(t)."""
        if t <= left_time:
            return params.gamma * initial[0]
        n_substeps = 2 * substeps
        z, _ = chosen.integrate(
            params, left_time, (t - left_time) / n_substeps, n_substeps, initial
        )
        return params.gamma * float(z[-1])

    t_peak_dw = _golden_section_argmax(
        view_rate, left_time, (index + 1) * grid.dt, GOLDEN_SECTION_TOL * max(horizon, 1.0)
    )
    report = PeakReport(
        t_peak_dx=model_core.peak_time_dx(params),
        t_peak_dw=t_peak_dw,
        dw_max=max(view_rate(t_peak_dw), float(trajectory.dw[index])),
        dt=grid.dt,
    )
    if report.t_peak_dw < report.t_peak_dx - grid.dt:
        logger.warning(
            "View-rate peak %s precedes the spreading peak %s", t_peak_dw, report.t_peak_dx
        )
    return report


def reaction_delay_scan(
    params: SpreadingParams, gammas: typing.Sequence[float], horizon: float
) -> DelayScan:
    """Measure the view-peak delay for several reaction rates.

    Faster reaction is expected to bring the view peak closer to the spreading peak. This
    is a numerical check, reported rather than enforced.

    Args:
        params: model parameters; their reaction rate is replaced by each of ``gammas``.
        gammas: the reaction rates to scan.
        horizon: end of the scanned interval, long enough for the slowest reaction.

    Returns:
        The delays in ascending order of gamma.
    """
    ordered = tuple(sorted(float(gamma) for gamma in gammas))
    reports = [find_peak(_with_gamma(params, gamma), horizon) for gamma in ordered]
    delays = tuple(report.delay for report in reports)
    nonincreasing = all(
        later <= earlier + report.dt
        for earlier, later, report in zip(delays, delays[1:], reports[1:])
    )
    if not nonincreasing:
        logger.info("Peak delays are not monotone in gamma: %s", dict(zip(ordered, delays)))
    return DelayScan(gammas=ordered, delays=delays, nonincreasing=nonincreasing)


def gamma_limit_gaps(
    params: SpreadingParams, gammas: typing.Sequence[float], grid: TimeGrid
) -> typing.List[float]:
    """Compare the peak-normalized view rate with the peak-normalized spreading rate.

    As gamma grows the two curves coincide outside the initial layer
    t < TRANSIENT_LAYERS / gamma, where the view rate is still rising from zero.

    Args:
        params: model parameters; their reaction rate is replaced by each of ``gammas``.
        gammas: the reaction rates to compare.
        grid: the comparison grid.

    Returns:
        The sup-norm gap for each reaction rate, in the order given.
    """
    dx = np.asarray(model_core.eval_dx(params, grid.points()))
    dx_normalized = dx / np.max(dx)
    gaps = []
    for gamma in gammas:
        trajectory = solve_reaction(_with_gamma(params, float(gamma)), grid)
        dw_normalized = trajectory.dw / np.max(trajectory.dw)
        settled = grid.points() >= TRANSIENT_LAYERS / float(gamma)
        if not np.any(settled):
            raise InvalidParameterError(
                "grid", f"horizon {grid.horizon!r} ends inside the initial layer, gamma={gamma!r}"
            )
        gap = np.abs(dw_normalized - dx_normalized)[settled]
        gaps.append(float(np.max(gap)))
    return gaps
