# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Normalized view-count entropy and corpus summaries.

The entropy of a video over its first T days is the Shannon entropy of the daily view shares
divided by ln T, so a trace spreading its views evenly scores 1 and a single-day spike scores 0.
"""

import logging
import typing

import numpy as np
from scipy import stats

from exceptions import (
    EmptyInputError,
    EmptyWindowError,
    InvalidParameterError,
    WindowTooLongError,
)
from popularity_types import EntropyReport, ViewTrace

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_DAYS = 30


class CorpusSummary(typing.NamedTuple):
    """Plot-ready summary of the entropies of a corpus.

    Attrs:
        cdf: ascending (entropy, cumulative fraction i/n) pairs.
        scatter: (video_id, entropy, total_views) tuples sorted by video_id.
    """

    cdf: typing.List[typing.Tuple[float, float]]
    scatter: typing.List[typing.Tuple[str, float, float]]


def entropy(trace: ViewTrace, window_days: int = DEFAULT_WINDOW_DAYS) -> EntropyReport:
    """Compute the normalized entropy of the first window_days days of a trace.

    Args:
        trace: the view trace.
        window_days: window length T.

    Returns:
        The entropy report.

    Raises:
        InvalidParameterError: when the window is shorter than two days.
        WindowTooLongError: when the trace is shorter than the window.
        EmptyWindowError: when the window holds no views.
    """
    if int(window_days) != window_days or window_days < 2:
        raise InvalidParameterError("window_days", f"must be an integer >= 2, got {window_days!r}")
    if len(trace.counts) < window_days:
        raise WindowTooLongError(
            f"trace {trace.video_id!r} has {len(trace.counts)} days, window is {window_days}"
        )
    window = trace.as_array()[: int(window_days)]
    total = float(np.sum(window))
    if total <= 0:
        raise EmptyWindowError(
            f"trace {trace.video_id!r} has no views in its first {window_days} days"
        )
    value = float(stats.entropy(window, base=window_days))
    return EntropyReport(
        video_id=trace.video_id,
        window_days=int(window_days),
        entropy=min(max(value, 0.0), 1.0),
        total_views=total,
    )


def entropy_corpus(
    traces: typing.Sequence[ViewTrace],
    window_days: int = DEFAULT_WINDOW_DAYS,
    skip_invalid: bool = False,
) -> typing.List[EntropyReport]:
    """Compute the entropy of every trace of a corpus.

    Args:
        traces: the traces.
        window_days: window length T.
        skip_invalid: log and skip traces whose entropy is undefined instead of failing.

    Returns:
        The reports sorted by video_id.

    Raises:
        WindowTooLongError: on a short trace, unless skip_invalid is set.
        EmptyWindowError: on an empty window, unless skip_invalid is set.
    """
    reports = []
    for trace in traces:
        try:
            reports.append(entropy(trace, window_days))
        except (WindowTooLongError, EmptyWindowError) as exc:
            if not skip_invalid:
                raise
            logger.warning("Skipping %s: %s", trace.video_id, exc.message)
    return sorted(reports, key=lambda report: report.video_id)


def corpus_summary(reports: typing.Sequence[EntropyReport]) -> CorpusSummary:
    """Summarize the entropies of a corpus as an empirical CDF and a scatter table.

    Args:
        reports: the entropy reports; duplicates count once per occurrence.

    Returns:
        The corpus summary.

    Raises:
        EmptyInputError: when there is no report.
    """
    if not reports:
        raise EmptyInputError("cannot summarize an empty corpus")
    values = sorted(report.entropy for report in reports)
    count = len(values)
    cdf = [(value, (index + 1) / count) for index, value in enumerate(values)]
    scatter = sorted(
        ((report.video_id, report.entropy, report.total_views) for report in reports),
        key=lambda row: row[0],
    )
    return CorpusSummary(cdf=cdf, scatter=scatter)

