# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Fixtures for command-line integration tests."""

import pathlib
import typing

import pytest

import cli
import reaction
import trace_io
from popularity_types import ReducedParams, ViewTrace

CliRunner = typing.Callable[..., int]


@pytest.fixture(name="run_cli")
def run_cli_fixture() -> CliRunner:
    """Run the command line with string arguments and return the exit code."""

    def _run(*argv: typing.Union[str, pathlib.Path]) -> int:
        """Run the command line.

        Args:
            argv: the arguments after the program name.

        Returns:
            The exit code.
        """
        return cli.main([str(token) for token in argv])

    return _run


@pytest.fixture(name="trace_file")
def trace_file_fixture(tmp_path: pathlib.Path) -> pathlib.Path:
    """Write two 40-day model traces, one S-curve and one decaying, to a CSV file."""
    traces = [
        ViewTrace(
            video_id=video_id,
            counts=tuple(reaction.model_daily_views(params, 40)),
        )
        for video_id, params in (
            ("decay", ReducedParams(a_direct=0.2, b_wom=0.05, m_adopters=500.0, gamma=1.0)),
            ("scurve", ReducedParams(a_direct=0.01, b_wom=0.3, m_adopters=2000.0, gamma=0.5)),
        )
    ]
    path = tmp_path / "traces.csv"
    trace_io.write_trace_csv(traces, path)
    return path
