# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

# pylint: disable=too-few-public-methods

"""Fixed-step integrators for the reaction process z' = -gamma z + x'(t), w' = gamma z.

The forcing x'(t) is known in closed form, so every step is an affine map of the state. Both
integrators compute the per-step coefficients once and evaluate the recurrence
z_{k+1} = R z_k + F_k as a linear filter over the whole sub-grid.
"""

import abc
import math
import typing

import numpy as np
from scipy import signal

import model_core
from popularity_types import FloatArray, SpreadingParams

# below this value of gamma * h the exponential weights are evaluated by their series
_SERIES_THRESHOLD = 1e-4


def linear_recurrence(decay: float, forcing: FloatArray, z_start: float) -> FloatArray:
    """Evaluate z_0 = z_start, z_{k+1} = decay * z_k + forcing_k.

    Args:
        decay: the homogeneous step factor.
        forcing: the inhomogeneous term of each step.
        z_start: the initial value.

    Returns:
        z at every node, one more value than ``forcing``.
    """
    inputs = np.concatenate(([z_start], forcing))
    return signal.lfilter([1.0], [1.0, -decay], inputs)


class ReactionStepperBase(abc.ABC):
    """The interface class for all reaction-process integrators."""

    name: str

    @abc.abstractmethod
    def integrate(
        self,
        params: SpreadingParams,
        start: float,
        h: float,
        n_steps: int,
        initial: typing.Tuple[float, float] = (0.0, 0.0),
    ) -> typing.Tuple[FloatArray, FloatArray]:
        """Integrate z and w over n_steps steps of length h.

        Args:
            params: model parameters.
            start: time of the initial state.
            h: step length.
            n_steps: number of steps.
            initial: z and w at ``start``.

        Returns:
            z and w at the n_steps + 1 nodes start + k h.
        """


def _rk4_step(
    z: FloatArray,
    f_start: FloatArray,
    f_mid: FloatArray,
    f_end: FloatArray,
    gamma: float,
    h: float,
) -> typing.Tuple[FloatArray, FloatArray]:
    """Take one classical Runge-Kutta step of the (z, w) system.

    Args:
        z: pending viewers at the start of the step.
        f_start: forcing at the start of the step.
        f_mid: forcing at the middle of the step.
        f_end: forcing at the end of the step.
        gamma: reaction rate.
        h: step length.

    Returns:
        z at the end of the step and the increment of w over the step.
    """
    k1 = -gamma * z + f_start
    z2 = z + 0.5 * h * k1
    k2 = -gamma * z2 + f_mid
    z3 = z + 0.5 * h * k2
    k3 = -gamma * z3 + f_mid
    z4 = z + h * k3
    k4 = -gamma * z4 + f_end
    z_next = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    w_increment = h / 6.0 * gamma * (z + 2.0 * z2 + 2.0 * z3 + z4)
    return z_next, w_increment


class RungeKutta4Stepper(ReactionStepperBase):
    """Classical fourth-order Runge-Kutta with the exact closed-form forcing."""

    name = "rk4"

    def integrate(
        self,
        params: SpreadingParams,
        start: float,
        h: float,
        n_steps: int,
        initial: typing.Tuple[float, float] = (0.0, 0.0),
    ) -> typing.Tuple[FloatArray, FloatArray]:
        """Integrate z and w with the classical Runge-Kutta scheme.

        The step is linear in (z, forcing), so its coefficients come from stepping the unit
        basis once.

        Args:
            params: model parameters.
            start: time of the initial state.
            h: step length.
            n_steps: number of steps.
            initial: z and w at ``start``.

        Returns:
            z and w at the n_steps + 1 nodes start + k h.
        """
        basis = np.eye(4)
        z_coef, w_coef = _rk4_step(basis[0], basis[1], basis[2], basis[3], params.gamma, h)
        half_nodes = start + 0.5 * h * np.arange(2 * n_steps + 1, dtype=np.float64)
        forcing = np.asarray(model_core.eval_dx(params, half_nodes))
        f_start, f_mid, f_end = forcing[0:-1:2], forcing[1::2], forcing[2::2]
        drive = z_coef[1] * f_start + z_coef[2] * f_mid + z_coef[3] * f_end
        z = linear_recurrence(z_coef[0], drive, initial[0])
        w_steps = w_coef[0] * z[:-1] + (
            w_coef[1] * f_start + w_coef[2] * f_mid + w_coef[3] * f_end
        )
        w = initial[1] + np.concatenate(([0.0], np.cumsum(w_steps)))
        return z, w


class ExponentialStepper(ReactionStepperBase):
    """Exponential integrator: exact decay, forcing linearly interpolated within a step.

    The cumulative views are closed through the exact increments of x(t), so z + w - x keeps
    its initial value up to rounding.
    """

    name = "exponential"

    def integrate(
        self,
        params: SpreadingParams,
        start: float,
        h: float,
        n_steps: int,
        initial: typing.Tuple[float, float] = (0.0, 0.0),
    ) -> typing.Tuple[FloatArray, FloatArray]:
        """Integrate z and w with the exponential integrator.

        Args:
            params: model parameters.
            start: time of the initial state.
            h: step length.
            n_steps: number of steps.
            initial: z and w at ``start``.

        Returns:
            z and w at the n_steps + 1 nodes start + k h.
        """
        c = params.gamma * h
        decay = math.exp(-c)
        phi = -math.expm1(-c) / c
        if c < _SERIES_THRESHOLD:
            phi_end = 0.5 - c / 6.0 + c * c / 24.0
        else:
            phi_end = (1.0 - phi) / c
        nodes = start + h * np.arange(n_steps + 1, dtype=np.float64)
        forcing = np.asarray(model_core.eval_dx(params, nodes))
        drive = h * ((phi - phi_end) * forcing[:-1] + phi_end * forcing[1:])
        z = linear_recurrence(decay, drive, initial[0])
        x = np.asarray(model_core.eval_x(params, nodes))
        w = initial[1] + (x - x[0]) - (z - z[0])
        return z, w


STEPPERS: typing.Dict[str, ReactionStepperBase] = {
    RungeKutta4Stepper.name: RungeKutta4Stepper(),
    ExponentialStepper.name: ExponentialStepper(),
}
