# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""pytest fixtures for the unit tests."""

import typing

import numpy as np
import pytest

from popularity_types import ModelParams, ReducedParams

ParamsFactory = typing.Callable[[int], typing.List[ModelParams]]
ReducedFactory = typing.Callable[[int], typing.List[ReducedParams]]


def _log_uniform(rng: np.random.Generator, low: float, high: float) -> float:
    """Draw a log-uniform value in [low, high]."""
    return float(np.exp(rng.uniform(np.log(low), np.log(high))))


@pytest.fixture(name="rng")
def rng_fixture(pytestconfig: pytest.Config) -> np.random.Generator:
    """Random generator seeded from the --property-seed option."""
    return np.random.default_rng(pytestconfig.getoption("--property-seed"))


@pytest.fixture(name="draw_params")
def draw_params_fixture(rng: np.random.Generator) -> ParamsFactory:
    """Factory of random valid full parameter sets.

    N is log-uniform in [1e3, 1e7], q uniform in [0.05, 1], alpha log-uniform in [1e-5, 1e-1],
    B = beta q N log-uniform in [1e-3, 1] and gamma log-uniform in [1e-2, 10].
    """

    def draw(count: int) -> typing.List[ModelParams]:
        params = []
        for _ in range(count):
            n_users = _log_uniform(rng, 1e3, 1e7)
            q = float(rng.uniform(0.05, 1.0))
            b_wom = _log_uniform(rng, 1e-3, 1.0)
            params.append(
                ModelParams(
                    n_users=n_users,
                    alpha=_log_uniform(rng, 1e-5, 1e-1),
                    beta=b_wom / (q * n_users),
                    q=q,
                    gamma=_log_uniform(rng, 1e-2, 10.0),
                )
            )
        return params

    return draw


@pytest.fixture(name="draw_reduced")
def draw_reduced_fixture(rng: np.random.Generator) -> ReducedFactory:
    """Factory of random reduced parameter sets for the reaction process.

    A and B are log-uniform in [1e-3, 1], M log-uniform in [1e2, 1e6] and gamma log-uniform in
    [0.05, 5].
    """

    def draw(count: int) -> typing.List[ReducedParams]:
        return [
            ReducedParams(
                a_direct=_log_uniform(rng, 1e-3, 1.0),
                b_wom=_log_uniform(rng, 1e-3, 1.0),
                m_adopters=_log_uniform(rng, 1e2, 1e6),
                gamma=_log_uniform(rng, 0.05, 5.0),
            )
            for _ in range(count)
        ]

    return draw


@pytest.fixture(name="figure_params")
def figure_params_fixture() -> ModelParams:
    """The view-rate figure parameters: N=1e6, beta=1e-7, q=0.05, alpha=0.0055, gamma=10."""
    return ModelParams(n_users=1e6, alpha=0.0055, beta=1e-7, q=0.05, gamma=10.0)
