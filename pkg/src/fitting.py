# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Estimate model parameters from an observed daily view-count trace.

Only (A, B, V_total, gamma) are identifiable from views: N and q enter the view curve through
M = qN alone, and M merges with the unknown views-per-user scale into V_total. The search runs
in log space with Nelder-Mead simplex descent from a deterministic multistart grid.
"""

import concurrent.futures
import dataclasses
import itertools
import logging
import math
import typing

import numpy as np
from scipy import optimize

import model_core
import reaction
from exceptions import DegenerateTraceError, InvalidParameterError, PopularityError
from integrators import ExponentialStepper
from popularity_types import FitResult, FloatArray, ReducedParams, Regime, ViewTrace

logger = logging.getLogger(__name__)

MIN_FIT_DAYS = 3
# log10 ranges of the multistart grid, the end points are not used as starts
START_DECADES_RATE = (-5.0, 0.0)
START_DECADES_GAMMA = (-3.0, 2.0)
# search bounds, log10
BOUNDS_RATE = (-7.0, math.log10(2.0))
BOUNDS_GAMMA = (-4.0, 3.0)
# V_total bounds relative to the observed total
BOUNDS_VOLUME = (0.5, 1e4)
INITIAL_SIMPLEX_STEP = 0.5
FATOL_RELATIVE = 1e-12

_LOG10 = math.log(10.0)


@dataclasses.dataclass(frozen=True)
class FitOptions:
    """Options of the multistart Nelder-Mead fit.

    Attrs:
        multistart_levels: start values per parameter; the grid has levels**4 starts.
        max_evals_per_start: objective evaluations allowed per start.
        simplex_tolerance: simplex diameter in log space that stops a start.
        views_per_user: views per model user, used to split V_total into M and scale.
        stepper: reaction integrator used by the objective.
    """

    multistart_levels: int = 3
    max_evals_per_start: int = 2000
    simplex_tolerance: float = 1e-4
    views_per_user: float = 1.0
    stepper: str = ExponentialStepper.name

    def __post_init__(self) -> None:
        """Validate the options.

        Raises:
            InvalidParameterError: when an option is out of range.
        """
        if self.multistart_levels < 1:
            raise InvalidParameterError("multistart_levels", "must be at least 1")
        if self.max_evals_per_start < 10:
            raise InvalidParameterError("max_evals_per_start", "must be at least 10")
        if not self.simplex_tolerance > 0:
            raise InvalidParameterError("simplex_tolerance", "must be positive")
        if not math.isfinite(self.views_per_user) or self.views_per_user <= 0:
            raise InvalidParameterError("views_per_user", "must be positive")


def normalize_peak(trace: ViewTrace) -> FloatArray:
    """Divide every daily count by the peak daily count.

    Args:
        trace: the view trace.

    Returns:
        The normalized counts, with maximum 1.

    Raises:
        DegenerateTraceError: when every count is zero.
    """
    counts = trace.as_array()
    peak = float(np.max(counts))
    if peak <= 0:
        raise DegenerateTraceError(f"trace {trace.video_id!r} has no views to normalize")
    return counts / peak


def fit_objective(
    trace: ViewTrace,
    reduced: ReducedParams,
    scale: float = 1.0,
    stepper: str = ExponentialStepper.name,
) -> float:
    """Sum of squared differences between model daily views and observed counts.

    Args:
        trace: the observed trace.
        reduced: reduced parameters, m_adopters in model users.
        scale: views per model user.
        stepper: reaction integrator.

    Returns:
        The sum of squared residuals.
    """
    counts = trace.as_array()
    volume = reduced.with_adopters(reduced.m_adopters * scale)
    predicted = reaction.model_daily_views(volume, len(counts), stepper=stepper)
    return float(np.sum((predicted - counts) ** 2))


def _start_grid(levels: int, total_views: float) -> typing.List[FloatArray]:
    """Build the deterministic multistart grid in natural-log space.

    Args:
        levels: start values per parameter.
        total_views: the observed total, which seeds V_total.

    Returns:
        Start points (ln A, ln B, ln V_total, ln gamma) in grid order.
    """
    rates = np.logspace(*START_DECADES_RATE, levels + 2)[1:-1]
    gammas = np.logspace(*START_DECADES_GAMMA, levels + 2)[1:-1]
    volumes = total_views * 2.0 ** np.arange(levels)
    return [
        np.log([a_direct, b_wom, volume, gamma])
        for a_direct, b_wom, volume, gamma in itertools.product(rates, rates, volumes, gammas)
    ]


def _bounds(total_views: float) -> typing.List[typing.Tuple[float, float]]:
    """Search bounds in natural-log space.

    Args:
        total_views: the observed total.

    Returns:
        Lower and upper bounds for (ln A, ln B, ln V_total, ln gamma).
    """
    rate = (BOUNDS_RATE[0] * _LOG10, BOUNDS_RATE[1] * _LOG10)
    volume = (math.log(BOUNDS_VOLUME[0] * total_views), math.log(BOUNDS_VOLUME[1] * total_views))
    gamma = (BOUNDS_GAMMA[0] * _LOG10, BOUNDS_GAMMA[1] * _LOG10)
    return [rate, rate, volume, gamma]


def _to_reduced(theta: FloatArray, scale: float) -> ReducedParams:
    """Map a log-space point to reduced parameters."""
    a_direct, b_wom, volume, gamma = (float(value) for value in np.exp(theta))
    return ReducedParams(a_direct=a_direct, b_wom=b_wom, m_adopters=volume / scale, gamma=gamma)


def fit(trace: ViewTrace, options: typing.Optional[FitOptions] = None) -> FitResult:
    """Fit the model's daily views to an observed trace.

    Args:
        trace: the observed trace.
        options: fit options, defaults when omitted.

    Returns:
        The best point over all starts; ties go to the lowest start index.

    Raises:
        DegenerateTraceError: when the trace is too short or has no views.
    """
    options = options or FitOptions()
    if len(trace.counts) < MIN_FIT_DAYS:
        raise DegenerateTraceError(
            f"trace {trace.video_id!r} has {len(trace.counts)} days, "
            f"at least {MIN_FIT_DAYS} needed"
        )
    total_views = trace.total_views
    if total_views <= 0:
        raise DegenerateTraceError(f"trace {trace.video_id!r} has no views")
    counts = trace.as_array()
    bounds = _bounds(total_views)
    fatol = FATOL_RELATIVE * float(np.sum(counts**2))

    def objective(theta: FloatArray) -> float:
        """Objective in log space; points the integrator rejects score infinity."""
        try:
            return fit_objective(
                trace,
                _to_reduced(theta, options.views_per_user),
                options.views_per_user,
                options.stepper,
            )
        except PopularityError:
            return math.inf

    best: typing.Optional[typing.Tuple[float, int, optimize.OptimizeResult]] = None
    n_evals = 0
    for start_index, start in enumerate(_start_grid(options.multistart_levels, total_views)):
        simplex = np.vstack([start, start + INITIAL_SIMPLEX_STEP * np.eye(len(start))])
        result = optimize.minimize(
            objective,
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "xatol": options.simplex_tolerance,
                "fatol": fatol,
                "maxfev": options.max_evals_per_start,
                "initial_simplex": simplex,
            },
        )
        n_evals += int(result.nfev)
        if best is None or result.fun < best[0]:
            best = (float(result.fun), start_index, result)
    assert best is not None  # nosec B101
    _, start_index, winner = best
    reduced = _to_reduced(winner.x, options.views_per_user)
    at_bound = any(
        min(abs(value - lower), abs(upper - value)) <= options.simplex_tolerance
        for value, (lower, upper) in zip(winner.x, bounds)
    )
    converged = bool(winner.success)
    if at_bound or not converged:
        logger.warning(
            "Fit of %s: converged=%s, at_bound=%s (start %d)",
            trace.video_id,
            converged,
            at_bound,
            start_index,
        )
    logger.debug(
        "Fit of %s won by start %d after %d evaluations", trace.video_id, start_index, n_evals
    )
    return FitResult(
        video_id=trace.video_id,
        reduced=reduced,
        scale=options.views_per_user,
        sse=fit_objective(trace, reduced, options.views_per_user, options.stepper),
        n_evals=n_evals,
        converged=converged,
        start_index=start_index,
        at_bound=at_bound,
    )


def fit_corpus(
    traces: typing.Sequence[ViewTrace],
    options: typing.Optional[FitOptions] = None,
    workers: int = 1,
) -> typing.List[FitResult]:
    """Fit every trace of a corpus independently.

    Args:
        traces: the traces.
        options: fit options shared by every trace.
        workers: number of worker processes; 1 fits serially in this process.

    Returns:
        The results sorted by video_id.
    """
    options = options or FitOptions()
    if workers <= 1 or len(traces) <= 1:
        results = [fit(trace, options) for trace in traces]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(fit, traces, [options] * len(traces)))
    return sorted(results, key=lambda result: result.video_id)


def fitted_curve(
    result: FitResult, n_days: int, stepper: str = ExponentialStepper.name
) -> FloatArray:
    """Compute the fitted model's daily views.

    Args:
        result: a fit result.
        n_days: number of days.
        stepper: reaction integrator.

    Returns:
        The predicted views of days 0 .. n_days - 1.
    """
    volume = result.reduced.with_adopters(result.v_total)
    return reaction.model_daily_views(volume, n_days, stepper=stepper)


def classify_trace(result: FitResult) -> Regime:
    """Classify the spreading regime of a fitted trace.

    Args:
        result: a fit result.

    Returns:
        The regime of the fitted (A, B).
    """
    if not result.converged:
        logger.warning("Classifying %s from a fit that did not converge", result.video_id)
    return model_core.classify(result.reduced)
