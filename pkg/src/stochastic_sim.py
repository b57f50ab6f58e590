# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Discrete-time stochastic simulator of the popularity process.

Users are exchangeable, so each slot draws the size of every transition from a binomial
distribution instead of visiting users one by one:

* every uninformed user learns about the video with probability 1 - exp(-(alpha + beta x) dt);
* an informed user intends to watch with probability q, otherwise ignores the video;
* every pending viewer informed before the slot watches with probability 1 - exp(-gamma dt).

The fluid model is the large-population limit of this process.
"""

import concurrent.futures
import dataclasses
import logging
import math
import typing

import numpy as np
import numpy.typing as npt
import pandas as pd

from exceptions import EmptyInputError, InvalidParameterError, ProbabilityOverflowError
from popularity_types import FloatArray, ModelParams

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"
DEFAULT_DT_SLOT = 1.0
COUNT_NAMES = ("x", "y", "s", "z", "w", "dw")
_MAX_SEED = 2**64

IntArray = npt.NDArray[np.int64]


@dataclasses.dataclass(frozen=True)
class SimConfig:
    """Configuration of a batch of simulation runs.

    Attrs:
        params: model parameters; n_users must be an integer.
        n_slots: number of simulated slots.
        seed: 64-bit unsigned seed; run seeds are derived from (seed, run index).
        n_runs: number of independent runs.
        dt_slot: slot length.
        exact_probabilities: use 1 - exp(-rate dt) rather than rate dt for every probability.
    """

    params: ModelParams
    n_slots: int
    seed: int
    n_runs: int = 1
    dt_slot: float = DEFAULT_DT_SLOT
    exact_probabilities: bool = True

    def __post_init__(self) -> None:
        """Validate the configuration.

        Raises:
            InvalidParameterError: when a value is out of range.
        """
        if not float(self.params.n_users).is_integer():
            raise InvalidParameterError(
                "n_users",
                f"the simulator needs an integer population, got {self.params.n_users!r}",
            )
        for name in ("n_slots", "n_runs"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidParameterError(name, f"must be a positive integer, got {value!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < _MAX_SEED:
            raise InvalidParameterError(
                "seed", f"must be a 64-bit unsigned integer, got {self.seed!r}"
            )
        if not math.isfinite(self.dt_slot) or self.dt_slot <= 0:
            raise InvalidParameterError("dt_slot", f"must be positive, got {self.dt_slot!r}")
        if not self.exact_probabilities:
            for name, rate in (("alpha", self.params.alpha), ("gamma", self.params.gamma)):
                if rate * self.dt_slot > 1:
                    raise InvalidParameterError(
                        name, f"{name}*dt_slot={rate * self.dt_slot!r} is not a probability"
                    )


@dataclasses.dataclass(frozen=True)
class SimTrace:
    """Population counts of one run after every slot; slot 0 is the initial state.

    Attrs:
        run_index: index of the run in its batch.
        dt_slot: slot length.
        x: intending viewers.
        y: informed users who will not watch.
        s: uninformed users.
        z: pending viewers.
        w: cumulative views.
        dw: views made during each slot.
    """

    run_index: int
    dt_slot: float
    x: IntArray
    y: IntArray
    s: IntArray
    z: IntArray
    w: IntArray
    dw: IntArray

    @property
    def n_slots(self) -> int:
        """Number of simulated slots."""
        return len(self.x) - 1

    def counts(self) -> typing.Dict[str, IntArray]:
        """Map every count name to its series.

        Returns:
            The series keyed by count name.
        """
        return {name: getattr(self, name) for name in COUNT_NAMES}

    def to_frame(self) -> pd.DataFrame:
        """Tabulate the trace with columns slot, t, x, y, s, z, w, dw.

        Returns:
            The trace as a data frame.
        """
        slots = np.arange(self.n_slots + 1)
        frame = pd.DataFrame({"slot": slots, "t": slots * self.dt_slot})
        for name, series in self.counts().items():
            frame[name] = series
        return frame


class SimAggregate(typing.NamedTuple):
    """Per-slot statistics over a batch of runs.

    Attrs:
        n_runs: number of aggregated runs.
        dt_slot: slot length.
        mean: mean of each count, keyed by count name.
        std: population standard deviation of each count, keyed by count name.
    """

    n_runs: int
    dt_slot: float
    mean: typing.Dict[str, FloatArray]
    std: typing.Dict[str, FloatArray]

    def to_frame(self) -> pd.DataFrame:
        """Tabulate the statistics with columns slot, t, <count>_mean, <count>_std.

        Returns:
            The statistics as a data frame.
        """
        slots = np.arange(len(self.mean["x"]))
        frame = pd.DataFrame({"slot": slots, "t": slots * self.dt_slot})
        for name in COUNT_NAMES:
            frame[f"{name}_mean"] = self.mean[name]
            frame[f"{name}_std"] = self.std[name]
        return frame


def run_generator(seed: int, run_index: int) -> np.random.Generator:
    """Create the random generator of one run.

    The stream depends only on (seed, run_index), so runs can execute in any order or process.

    Args:
        seed: the batch seed.
        run_index: index of the run in its batch.

    Returns:
        A PCG64 generator.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(run_index,))
    return np.random.Generator(np.random.PCG64(sequence))


def _probability(rate: float, dt: float, exact: bool, field: str) -> float:
    """Convert a rate into a per-slot probability.

    Args:
        rate: the transition rate.
        dt: slot length.
        exact: whether to use 1 - exp(-rate dt).
        field: name of the transition, used in the error message.

    Returns:
        The probability.

    Raises:
        ProbabilityOverflowError: when the linearized probability exceeds 1.
    """
    if exact:
        return -math.expm1(-rate * dt)
    probability = rate * dt
    if probability > 1:
        raise ProbabilityOverflowError(
            f"{field} probability {probability!r} exceeds 1; shorten dt_slot or use exact "
            "probabilities"
        )
    return probability


def simulate_run(config: SimConfig, run_index: int) -> SimTrace:
    """Simulate one run.

    Users informed during a slot make their first viewing decision in the next slot.

    Args:
        config: the batch configuration.
        run_index: index of the run, which selects its random stream.

    Returns:
        The counts after every slot.
    """
    params, dt = config.params, config.dt_slot
    rng = run_generator(config.seed, run_index)
    series = {name: np.zeros(config.n_slots + 1, dtype=np.int64) for name in COUNT_NAMES}
    n_users = int(params.n_users)
    x = y = z = w = 0
    s = n_users
    series["s"][0] = s
    p_view = _probability(params.gamma, dt, config.exact_probabilities, "viewing")
    for slot in range(1, config.n_slots + 1):
        p_inform = _probability(
            params.alpha + params.beta * x, dt, config.exact_probabilities, "informing"
        )
        informed = int(rng.binomial(s, p_inform)) if s else 0
        joined = int(rng.binomial(informed, params.q)) if informed else 0
        views = int(rng.binomial(z, p_view)) if z else 0
        s -= informed
        x += joined
        y += informed - joined
        z += joined - views
        w += views
        for name, value in (("x", x), ("y", y), ("s", s), ("z", z), ("w", w), ("dw", views)):
            series[name][slot] = value
    logger.debug("Run %d finished with x=%d w=%d", run_index, x, w)
    return SimTrace(run_index=run_index, dt_slot=dt, **series)


def simulate(config: SimConfig, workers: int = 1) -> typing.List[SimTrace]:
    """Simulate every run of a batch.

    Args:
        config: the batch configuration.
        workers: number of worker processes; 1 runs serially in this process.

    Returns:
        The traces in run order, identical for any number of workers.
    """
    run_indices = range(config.n_runs)
    logger.debug(
        "Simulating %d runs with seed %d on %d worker(s)", config.n_runs, config.seed, workers
    )
    if workers <= 1 or config.n_runs == 1:
        return [simulate_run(config, run_index) for run_index in run_indices]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(simulate_run, [config] * config.n_runs, run_indices))


def aggregate(traces: typing.Sequence[SimTrace]) -> SimAggregate:
    """Compute per-slot mean and standard deviation over runs.

    Args:
        traces: traces of equal length.

    Returns:
        The per-slot statistics.

    Raises:
        EmptyInputError: when there is no trace.
        InvalidParameterError: when the traces differ in length or slot length.
    """
    if not traces:
        raise EmptyInputError("cannot aggregate an empty list of traces")
    first = traces[0]
    for trace in traces[1:]:
        if trace.n_slots != first.n_slots or trace.dt_slot != first.dt_slot:
            raise InvalidParameterError("traces", "all traces must share slots and slot length")
    mean = {}
    std = {}
    for name in COUNT_NAMES:
        stacked = np.stack([getattr(trace, name) for trace in traces]).astype(np.float64)
        mean[name] = stacked.mean(axis=0)
        std[name] = stacked.std(axis=0)
    return SimAggregate(n_runs=len(traces), dt_slot=first.dt_slot, mean=mean, std=std)
