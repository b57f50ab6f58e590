# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Closed-form evaluation of the information-spreading process.

The spreading process has the closed form

    x(t) = (qN g(t) - alpha/beta) / (g(t) + 1),  g(t) = (A/B) exp(tau t),

with A = alpha, B = beta q N and tau = A + B. Every function here only needs the reduced
combination (A, B, M = qN), except :func:`eval_y` and :func:`eval_s` which need N and q.

All evaluators accept a scalar or an array of nonnegative times and return the same shape.
"""

import logging
import math
import typing

import numpy as np
import numpy.typing as npt

from exceptions import InvalidParameterError, NumericalOverflowError
from popularity_types import (
    CriticalTimes,
    FloatArray,
    ModelParams,
    Regime,
    SpreadingParams,
    Stage,
    TimeGrid,
    Trajectory,
)

logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)
# beyond this value of tau * t the closed form is evaluated through h = 1 / g
OVERFLOW_SAFE_EXPONENT = 30.0

TimeLike = typing.Union[float, npt.ArrayLike]
ValueLike = typing.Union[float, FloatArray]

PRESETS: typing.Dict[str, ModelParams] = {
    "xt-concave": ModelParams(n_users=1e6, alpha=0.1, beta=1e-7, q=0.5, gamma=10.0),
    "xt-scurve": ModelParams(n_users=1e6, alpha=0.00005, beta=1e-7, q=0.5, gamma=10.0),
    "dx-four-stage": ModelParams(n_users=1e6, alpha=0.00005, beta=1e-7, q=0.05, gamma=10.0),
    "dx-three-stage": ModelParams(n_users=1e6, alpha=0.0014, beta=1e-7, q=0.05, gamma=10.0),
    "dx-concave": ModelParams(n_users=1e6, alpha=0.0055, beta=1e-7, q=0.05, gamma=10.0),
    "dx-convex": ModelParams(n_users=1e6, alpha=0.0188, beta=1e-7, q=0.05, gamma=10.0),
}
SLOW_REACTION_GAMMA = 0.001
SLOW_PRESET_SUFFIX = "-slow"


def preset(name: str) -> ModelParams:
    """Look up a reference parameter set by name.

    A name with the ``-slow`` suffix selects the same set with gamma = 0.001.

    Args:
        name: the preset name.

    Returns:
        The preset parameters.

    Raises:
        InvalidParameterError: when the name is unknown.
    """
    base_name = name.removesuffix(SLOW_PRESET_SUFFIX)
    if base_name not in PRESETS:
        raise InvalidParameterError(
            "preset", f"unknown preset {name!r}, expecting one of {sorted(PRESETS)}"
        )
    params = PRESETS[base_name]
    if name.endswith(SLOW_PRESET_SUFFIX):
        return ModelParams(
            n_users=params.n_users,
            alpha=params.alpha,
            beta=params.beta,
            q=params.q,
            gamma=SLOW_REACTION_GAMMA,
        )
    return params


def _as_times(t: TimeLike) -> typing.Tuple[FloatArray, bool]:
    """Convert the time argument to an array and check the precondition t >= 0.

    Args:
        t: a time or an array of times.

    Returns:
        The times as a float array and whether the input was a scalar.

    Raises:
        InvalidParameterError: when a time is negative or not finite.
    """
    times = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(times)) or np.any(times < 0):
        raise InvalidParameterError("t", "times must be finite and nonnegative")
    return times, times.ndim == 0


def _output(values: FloatArray, scalar: bool) -> ValueLike:
    """Return a float for scalar input, the array otherwise."""
    return float(values) if scalar else values


def _tau(params: SpreadingParams) -> float:
    """Total spreading rate A + B."""
    return params.a_direct + params.b_wom


def _log_g(params: SpreadingParams, times: FloatArray) -> FloatArray:
    """Evaluate ln g(t) = ln(A/B) + tau t, which never overflows."""
    return math.log(params.a_direct / params.b_wom) + _tau(params) * times


def _folded_g(
    params: SpreadingParams, times: FloatArray
) -> typing.Tuple[FloatArray, FloatArray]:
    """Fold g onto (0, 1] as u = min(g, 1/g).

    The derivative factors g/(g+1)^2 and g(g^2-4g+1)/(g+1)^4 are invariant under g -> 1/g and
    g(1-g)/(g+1)^3 only changes sign, so they can always be evaluated without overflow.

    Args:
        params: model parameters.
        times: nonnegative times.

    Returns:
        u and the sign of 1 - g.
    """
    log_g = _log_g(params, times)
    return np.exp(-np.abs(log_g)), np.where(log_g > 0, -1.0, 1.0)


def eval_g(params: SpreadingParams, t: TimeLike) -> ValueLike:
    """Evaluate g(t) = (A/B) exp(tau t).

    Args:
        params: model parameters.
        t: nonnegative time(s).

    Returns:
        g(t).

    Raises:
        NumericalOverflowError: when g(t) is not representable; use :func:`eval_x` instead.
    """
    times, scalar = _as_times(t)
    with np.errstate(over="ignore"):
        values = np.exp(_log_g(params, times))
    if not np.all(np.isfinite(values)):
        raise NumericalOverflowError(
            "g(t) overflows 64-bit floating point; evaluate x(t) directly instead"
        )
    return _output(values, scalar)


def _alpha_over_beta(params: SpreadingParams) -> float:
    """The ratio alpha / beta, A M / B in reduced terms."""
    return params.a_direct * params.m_adopters / params.b_wom


def eval_x(params: SpreadingParams, t: TimeLike) -> ValueLike:
    """Evaluate the intending-viewer population x(t).

    For tau t beyond :data:`OVERFLOW_SAFE_EXPONENT` the reciprocal h = 1/g is used:
    x = (qN - (alpha/beta) h) / (1 + h).

    Args:
        params: model parameters.
        t: nonnegative time(s).

    Returns:
        x(t), in [0, qN).
    """
    times, scalar = _as_times(t)
    ratio = params.a_direct / params.b_wom
    tau_t = _tau(params) * times
    values = np.empty_like(times)
    near = tau_t <= OVERFLOW_SAFE_EXPONENT
    far = ~near
    g_near = ratio * np.exp(tau_t[near])
    values[near] = params.m_adopters * ratio * np.expm1(tau_t[near]) / (g_near + 1.0)
    h_far = np.exp(-tau_t[far]) / ratio
    values[far] = (params.m_adopters - _alpha_over_beta(params) * h_far) / (1.0 + h_far)
    return _output(values, scalar)


def eval_y(params: ModelParams, t: TimeLike) -> ValueLike:
    """Evaluate the informed-but-uninterested population y(t) = ((1-q)/q) x(t).

    Args:
        params: model parameters.
        t: nonnegative time(s).

    Returns:
        y(t), in [0, (1-q)N).
    """
    times, scalar = _as_times(t)
    values = (1.0 - params.q) / params.q * np.asarray(eval_x(params, times))
    return _output(values, scalar)


def eval_s(params: ModelParams, t: TimeLike) -> ValueLike:
    """Evaluate the uninformed population s(t) = N - x(t)/q.

    Args:
        params: model parameters.
        t: nonnegative time(s).

    Returns:
        s(t), in (0, N].
    """
    times, scalar = _as_times(t)
    values = params.n_users - np.asarray(eval_x(params, times)) / params.q
    return _output(values, scalar)


def eval_dx(params: SpreadingParams, t: TimeLike) -> ValueLike:
    """Evaluate the spreading rate x'(t) = tau^2 g / (beta (g+1)^2).

    Args:
        params: model parameters.
        t: nonnegative time(s).

    Returns:
        x'(t), always positive.
    """
    times, scalar = _as_times(t)
    tau = _tau(params)
    u, _ = _folded_g(params, times)
    values = tau**2 * params.m_adopters / params.b_wom * u / (1.0 + u) ** 2
    return _output(values, scalar)


def eval_d2x(params: SpreadingParams, t: TimeLike) -> ValueLike:
    """Evaluate x''(t) = tau^3 g (1-g) / (beta (g+1)^3).

    Args:
        params: model parameters.
        t: nonnegative time(s).

    Returns:
        x''(t), with the sign of 1 - g(t).
    """
    times, scalar = _as_times(t)
    tau = _tau(params)
    u, sign = _folded_g(params, times)
    values = sign * tau**3 * params.m_adopters / params.b_wom * u * (1.0 - u) / (1.0 + u) ** 3
    return _output(values, scalar)


def eval_d3x(params: SpreadingParams, t: TimeLike) -> ValueLike:
    """Evaluate x'''(t) = tau^4 g (g^2 - 4g + 1) / (beta (g+1)^4).

    Args:
        params: model parameters.
        t: nonnegative time(s).

    Returns:
        x'''(t), with the sign of g^2 - 4g + 1.
    """
    times, scalar = _as_times(t)
    tau = _tau(params)
    u, _ = _folded_g(params, times)
    polynomial = u * u - 4.0 * u + 1.0
    values = tau**4 * params.m_adopters / params.b_wom * u * polynomial / (1.0 + u) ** 4
    return _output(values, scalar)


def critical_times(params: SpreadingParams) -> CriticalTimes:
    """Compute the zeros t', t1, t2 of x'' and x'''.

    Negative values are returned as they are: the stage boundary lies before t = 0.

    Args:
        params: model parameters.

    Returns:
        The critical times, t2 < t' < t1.
    """
    tau = _tau(params)
    log_ratio = math.log(params.b_wom / params.a_direct)
    return CriticalTimes(
        t_prime=log_ratio / tau,
        t_one=(math.log(2.0 + SQRT3) + log_ratio) / tau,
        t_two=(math.log(2.0 - SQRT3) + log_ratio) / tau,
    )


def classify(params: SpreadingParams) -> Regime:
    """Classify the shape of x'(t).

    Boundary ties resolve to the regime that holds just above the boundary:
    A = B gives ConcaveDecay2Stage, A = (2+sqrt 3)B gives ConvexDecay and
    A = (2-sqrt 3)B gives SCurve3Stage.

    Args:
        params: model parameters.

    Returns:
        The regime.
    """
    a_direct, b_wom = params.a_direct, params.b_wom
    if a_direct >= (2.0 + SQRT3) * b_wom:
        return Regime.CONVEX_DECAY
    if a_direct >= b_wom:
        return Regime.CONCAVE_DECAY_2_STAGE
    if a_direct >= (2.0 - SQRT3) * b_wom:
        return Regime.SCURVE_3_STAGE
    return Regime.SCURVE_4_STAGE


def stage_table(params: SpreadingParams) -> typing.List[Stage]:
    """List the stages of x'(t) on [0, inf) for the classified regime.

    Args:
        params: model parameters.

    Returns:
        The stages in time order.
    """
    times = critical_times(params)
    regime = classify(params)
    if regime == Regime.CONVEX_DECAY:
        return [Stage(0.0, math.inf, increasing=False, convex=True)]
    if regime == Regime.CONCAVE_DECAY_2_STAGE:
        return [
            Stage(0.0, times.t_one, increasing=False, convex=False),
            Stage(times.t_one, math.inf, increasing=False, convex=True),
        ]
    tail = [
        Stage(times.t_prime, times.t_one, increasing=False, convex=False),
        Stage(times.t_one, math.inf, increasing=False, convex=True),
    ]
    if regime == Regime.SCURVE_3_STAGE:
        return [Stage(0.0, times.t_prime, increasing=True, convex=False)] + tail
    return [
        Stage(0.0, times.t_two, increasing=True, convex=True),
        Stage(times.t_two, times.t_prime, increasing=True, convex=False),
    ] + tail


def peak_time_dx(params: SpreadingParams) -> float:
    """Locate the unique maximum of x'(t) on [0, inf).

    Args:
        params: model parameters.

    Returns:
        0 when A >= B, t' otherwise.
    """
    if params.a_direct >= params.b_wom:
        return 0.0
    return critical_times(params).t_prime


def sample_spread(params: ModelParams, grid: TimeGrid) -> Trajectory:
    """Evaluate the spreading process on every grid point.

    Args:
        params: model parameters.
        grid: the time grid.

    Returns:
        x, y, s and x' on the grid.
    """
    times = grid.points()
    logger.debug("Sampling the spreading process on %d points, dt=%s", grid.n_steps, grid.dt)
    x = np.asarray(eval_x(params, times))
    return Trajectory(
        t=times,
        x=x,
        y=(1.0 - params.q) / params.q * x,
        s=params.n_users - x / params.q,
        dx=np.asarray(eval_dx(params, times)),
    )
