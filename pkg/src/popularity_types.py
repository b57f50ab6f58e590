# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Define names for types used in the popularity model."""

import dataclasses
import enum
import math
import typing

import numpy as np
import numpy.typing as npt

from exceptions import InvalidParameterError

FloatArray = npt.NDArray[np.float64]


def _require_positive(field: str, value: float) -> None:
    """Check that a rate or population value is a positive finite real.

    Args:
        field: parameter name, used in the error message.
        value: the value to check.

    Raises:
        InvalidParameterError: when the value is not finite or not positive.
    """
    if not math.isfinite(value) or value <= 0:
        raise InvalidParameterError(field, f"must be a positive finite number, got {value!r}")


class SpreadingParams(typing.Protocol):
    """The parameter combinations the spreading and reaction processes depend on."""

    @property
    def a_direct(self) -> float:
        """Direct recommendation rate A."""
        ...

    @property
    def b_wom(self) -> float:
        """Word-of-mouth rate at full audience B."""
        ...

    @property
    def m_adopters(self) -> float:
        """Asymptotic number of intending viewers M."""
        ...

    @property
    def gamma(self) -> float:
        """Reaction rate."""
        ...


@dataclasses.dataclass(frozen=True)
class ReducedParams:
    """Identifiable reparameterization of the model.

    x(t), z(t) and w(t) depend on the full parameter set only through these four values.

    Attrs:
        a_direct: direct recommendation rate A (equal to alpha).
        b_wom: word-of-mouth rate at full audience B (beta * q * n_users).
        m_adopters: asymptotic intending viewers M (q * n_users).
        gamma: reaction rate.
    """

    a_direct: float
    b_wom: float
    m_adopters: float
    gamma: float

    def __post_init__(self) -> None:
        """Validate the reduced parameters."""
        for field in dataclasses.fields(self):
            _require_positive(field.name, float(getattr(self, field.name)))

    @property
    def tau(self) -> float:
        """Total spreading rate A + B."""
        return self.a_direct + self.b_wom

    @property
    def alpha_over_beta(self) -> float:
        """The ratio alpha / beta expressed in reduced terms, A * M / B."""
        return self.a_direct * self.m_adopters / self.b_wom

    def with_adopters(self, m_adopters: float) -> "ReducedParams":
        """Copy the parameters with a different asymptotic audience.

        Args:
            m_adopters: the new asymptotic number of intending viewers.

        Returns:
            The rescaled parameters.
        """
        return dataclasses.replace(self, m_adopters=m_adopters)


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the fluid popularity model.

    Attrs:
        n_users: total user population N.
        alpha: direct recommendation rate, per unit time.
        beta: word-of-mouth rate, per unit time per user.
        q: attractiveness, the probability an informed user intends to watch.
        gamma: reaction rate, per unit time.
    """

    n_users: float
    alpha: float
    beta: float
    q: float
    gamma: float

    def __post_init__(self) -> None:
        """Validate the parameters.

        Raises:
            InvalidParameterError: when a parameter is out of range.
        """
        for name in ("n_users", "alpha", "beta", "gamma"):
            _require_positive(name, float(getattr(self, name)))
        if not math.isfinite(self.q) or not 0 < self.q <= 1:
            raise InvalidParameterError("q", f"must lie in (0, 1], got {self.q!r}")
        for name, value in (("beta*q*n_users", self.b_wom), ("alpha+beta*q*n_users", self.tau)):
            _require_positive(name, value)

    @property
    def a_direct(self) -> float:
        """Direct recommendation rate A."""
        return self.alpha

    @property
    def b_wom(self) -> float:
        """Word-of-mouth rate at full audience B = beta * q * N."""
        return self.beta * self.q * self.n_users

    @property
    def m_adopters(self) -> float:
        """Asymptotic number of intending viewers M = q * N."""
        return self.q * self.n_users

    @property
    def tau(self) -> float:
        """Total spreading rate alpha + beta * q * N."""
        return self.alpha + self.b_wom

    @property
    def alpha_over_beta(self) -> float:
        """The ratio alpha / beta."""
        return self.alpha / self.beta

    def reduced(self) -> ReducedParams:
        """Project onto the identifiable parameters.

        Returns:
            The reduced parameters (A, B, M, gamma).
        """
        return ReducedParams(
            a_direct=self.alpha, b_wom=self.b_wom, m_adopters=self.m_adopters, gamma=self.gamma
        )

    @classmethod
    def from_reduced(cls, reduced: ReducedParams, n_users: float) -> "ModelParams":
        """Recover the full parameters given an externally known population.

        Args:
            reduced: the reduced parameters.
            n_users: the total user population N.

        Returns:
            The full parameter set.

        Raises:
            InvalidParameterError: when the asymptotic audience exceeds the population.
        """
        _require_positive("n_users", n_users)
        q = reduced.m_adopters / n_users
        if q > 1:
            raise InvalidParameterError(
                "n_users", f"{n_users!r} is smaller than the audience {reduced.m_adopters!r}"
            )
        return cls(
            n_users=n_users,
            alpha=reduced.a_direct,
            beta=reduced.b_wom / reduced.m_adopters,
            q=q,
            gamma=reduced.gamma,
        )


@dataclasses.dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid with points t_k = t_start + k * dt, k = 0 .. n_steps - 1.

    Attrs:
        dt: grid spacing.
        n_steps: number of grid points.
        t_start: first grid point.
    """

    dt: float
    n_steps: int
    t_start: float = 0.0

    def __post_init__(self) -> None:
        """Validate the grid.

        Raises:
            InvalidParameterError: when the grid is empty or its spacing is not positive.
        """
        _require_positive("dt", float(self.dt))
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidParameterError(
                "n_steps", f"must be a positive integer, got {self.n_steps!r}"
            )
        if not math.isfinite(self.t_start) or self.t_start < 0:
            raise InvalidParameterError("t_start", f"must be nonnegative, got {self.t_start!r}")

    @property
    def horizon(self) -> float:
        """The last grid point."""
        return self.t_start + self.dt * (self.n_steps - 1)

    def points(self) -> FloatArray:
        """Materialize the grid.

        Returns:
            The grid points.
        """
        return self.t_start + self.dt * np.arange(self.n_steps, dtype=np.float64)


class RegimeFamily(enum.Enum):
    """Coarse shape of x(t): concave growth or an S curve."""

    X_CONCAVE = "XConcave"
    X_SIGMOID = "XSigmoid"


class Regime(enum.Enum):
    """Shape class of x'(t), determined by A relative to (2 +/- sqrt 3) B."""

    CONCAVE_DECAY_2_STAGE = "ConcaveDecay2Stage"
    CONVEX_DECAY = "ConvexDecay"
    SCURVE_4_STAGE = "SCurve4Stage"
    SCURVE_3_STAGE = "SCurve3Stage"

    @property
    def family(self) -> RegimeFamily:
        """The coarse family of x(t) for this regime."""
        if self in (Regime.CONCAVE_DECAY_2_STAGE, Regime.CONVEX_DECAY):
            return RegimeFamily.X_CONCAVE
        return RegimeFamily.X_SIGMOID


class CriticalTimes(typing.NamedTuple):
    """Zeros of x'' and x''' (possibly negative).

    Attrs:
        t_prime: inflection time of x(t).
        t_one: larger root of x'''.
        t_two: smaller root of x'''.
    """

    t_prime: float
    t_one: float
    t_two: float


class Stage(typing.NamedTuple):
    """One stage of x'(t) between two critical times.

    Attrs:
        start: beginning of the stage.
        end: end of the stage, ``math.inf`` for the last stage.
        increasing: whether x'(t) increases on the stage.
        convex: whether x'(t) is convex on the stage.
    """

    start: float
    end: float
    increasing: bool
    convex: bool


class Trajectory(typing.NamedTuple):
    """The spreading process sampled on a grid.

    Attrs:
        t: grid points.
        x: intending viewers.
        y: informed users who will not watch.
        s: uninformed users.
        dx: spreading rate x'(t).
    """

    t: FloatArray
    x: FloatArray
    y: FloatArray
    s: FloatArray
    dx: FloatArray


class ReactionTrajectory(typing.NamedTuple):
    """The reaction process sampled on a grid.

    Attrs:
        grid: the grid the values are sampled on.
        z: pending viewers.
        w: cumulative views.
        dw: view rate gamma * z.
    """

    grid: TimeGrid
    z: FloatArray
    w: FloatArray
    dw: FloatArray


class PeakReport(typing.NamedTuple):
    """Peak timing of the spreading rate and the view rate.

    Attrs:
        t_peak_dx: time of the maximum of x'(t).
        t_peak_dw: time of the maximum of dw/dt.
        dw_max: the maximum view rate.
        dt: spacing of the grid the view-rate peak was scanned on.
    """

    t_peak_dx: float
    t_peak_dw: float
    dw_max: float
    dt: float

    @property
    def delay(self) -> float:
        """How long the view peak trails the spreading peak."""
        return self.t_peak_dw - self.t_peak_dx


@dataclasses.dataclass(frozen=True)
class ViewTrace:
    """Observed daily view counts of one video, day 0 being the upload day.

    Attrs:
        video_id: identifier of the video.
        counts: views per day.
    """

    video_id: str
    counts: typing.Tuple[float, ...]

    def __post_init__(self) -> None:
        """Validate the counts.

        Raises:
            InvalidParameterError: when a count is negative or not finite.
        """
        object.__setattr__(self, "counts", tuple(float(count) for count in self.counts))
        if not self.counts:
            raise InvalidParameterError("counts", f"trace {self.video_id!r} is empty")
        for day, count in enumerate(self.counts):
            if not math.isfinite(count) or count < 0:
                raise InvalidParameterError(
                    "counts", f"trace {self.video_id!r} day {day} has invalid count {count!r}"
                )

    def as_array(self) -> FloatArray:
        """Expose the counts as an array.

        Returns:
            The counts, one per day.
        """
        return np.asarray(self.counts, dtype=np.float64)

    @property
    def total_views(self) -> float:
        """Sum of all counts."""
        return math.fsum(self.counts)


class FitResult(typing.NamedTuple):
    """Outcome of fitting the model to one view trace.

    Attrs:
        video_id: identifier of the fitted video.
        reduced: fitted reduced parameters, m_adopters in model users.
        scale: views per model user.
        sse: sum of squared daily residuals at the fitted point.
        n_evals: objective evaluations across all starts.
        converged: whether the winning start met the simplex stopping rule.
        start_index: index of the winning start in the multistart grid.
        at_bound: whether the fitted point touches a search bound.
    """

    video_id: str
    reduced: ReducedParams
    scale: float
    sse: float
    n_evals: int
    converged: bool
    start_index: int
    at_bound: bool

    @property
    def v_total(self) -> float:
        """Total asymptotic views."""
        return self.reduced.m_adopters * self.scale

    def to_json_dict(self) -> typing.Dict[str, typing.Any]:
        """Serialize with the fixed output field names.

        Returns:
            A JSON-ready dictionary.
        """
        return {
            "video_id": self.video_id,
            "a_direct": self.reduced.a_direct,
            "b_wom": self.reduced.b_wom,
            "v_total": self.v_total,
            "gamma": self.reduced.gamma,
            "sse": self.sse,
            "converged": self.converged,
            "start_index": self.start_index,
            "at_bound": self.at_bound,
            "n_evals": self.n_evals,
        }


class EntropyReport(typing.NamedTuple):
    """Normalized view-count entropy of one video.

    Attrs:
        video_id: identifier of the video.
        window_days: window length T.
        entropy: normalized entropy in [0, 1].
        total_views: views inside the window.
    """

    video_id: str
    window_days: int
    entropy: float
    total_views: float
