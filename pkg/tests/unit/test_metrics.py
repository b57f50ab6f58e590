# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""View-count entropy unit tests."""

import math

import numpy as np
import pytest

import metrics
import reaction
from exceptions import EmptyInputError, EmptyWindowError, InvalidParameterError, WindowTooLongError
from popularity_types import EntropyReport, ReducedParams, ViewTrace


def _log_uniform(rng: np.random.Generator, low: float, high: float) -> float:
    """Draw a log-uniform value."""
    return float(np.exp(rng.uniform(np.log(low), np.log(high))))


def _model_trace(video_id: str, params: ReducedParams, n_days: int = 30) -> ViewTrace:
    """Daily views of the model as a trace."""
    return ViewTrace(video_id=video_id, counts=tuple(reaction.model_daily_views(params, n_days)))


def test_uniform_trace_has_entropy_one() -> None:
    """
    arrange: 30 days with equal counts, followed by a burst outside the window.
    act: compute the 30-day entropy.
    assert: the entropy is 1 and only the window counts toward total_views.
    """
    trace = ViewTrace(video_id="flat", counts=(5.0,) * 30 + (1e6,))

    report = metrics.entropy(trace)

    assert report.entropy == pytest.approx(1.0, abs=1e-12)
    assert report.total_views == 150.0
    assert report.window_days == metrics.DEFAULT_WINDOW_DAYS


def test_spike_has_entropy_zero() -> None:
    """
    arrange: every view of the window on one day.
    act: compute the entropy.
    assert: the entropy is exactly 0.
    """
    trace = ViewTrace(video_id="spike", counts=(0.0,) * 10 + (400.0,) + (0.0,) * 19)

    assert metrics.entropy(trace).entropy == 0.0


def test_two_equal_days() -> None:
    """
    arrange: two days sharing the views of a 30-day window.
    act: compute the entropy.
    assert: the entropy is ln 2 / ln 30.
    """
    trace = ViewTrace(video_id="pair", counts=(7.0, 7.0) + (0.0,) * 28)

    report = metrics.entropy(trace)

    assert report.entropy == pytest.approx(math.log(2) / math.log(30), abs=1e-12)


def test_permutation_and_scale_invariance(rng: np.random.Generator) -> None:
    """
    arrange: a random 30-day trace, a shuffled copy and a copy scaled by 17.
    act: compute the entropies.
    assert: all three agree.
    """
    counts = rng.integers(0, 1000, size=30).astype(float)
    counts[0] += 1.0
    shuffled = rng.permutation(counts)

    base = metrics.entropy(ViewTrace(video_id="v", counts=tuple(counts))).entropy
    permuted = metrics.entropy(ViewTrace(video_id="v", counts=tuple(shuffled))).entropy
    scaled = metrics.entropy(ViewTrace(video_id="v", counts=tuple(17.0 * counts))).entropy

    assert 0.0 <= base <= 1.0
    assert permuted == pytest.approx(base, rel=1e-12)
    assert scaled == pytest.approx(base, rel=1e-12)


@pytest.mark.parametrize("window_days", [1, 0, 2.5])
def test_invalid_window(window_days: float) -> None:
    """
    arrange: a window shorter than two days or not a whole number of days.
    act: compute the entropy.
    assert: InvalidParameterError names window_days.
    """
    trace = ViewTrace(video_id="v", counts=(1.0,) * 30)

    with pytest.raises(InvalidParameterError) as error:
        metrics.entropy(trace, window_days)  # type: ignore[arg-type]

    assert error.value.field == "window_days"


def test_window_longer_than_trace() -> None:
    """
    arrange: a 10-day trace.
    act: compute the 30-day entropy.
    assert: WindowTooLongError.
    """
    with pytest.raises(WindowTooLongError):
        metrics.entropy(ViewTrace(video_id="v", counts=(1.0,) * 10))


def test_empty_window() -> None:
    """
    arrange: a trace whose views all come after the window.
    act: compute the 30-day entropy.
    assert: EmptyWindowError.
    """
    with pytest.raises(EmptyWindowError):
        metrics.entropy(ViewTrace(video_id="v", counts=(0.0,) * 30 + (9.0,)))


def test_entropy_nonincreasing_in_direct_rate() -> None:
    """
    arrange: model traces with B = 1, gamma = 2 and A in 1e-5, 1e-3, 1e-1.
    act: compute their 30-day entropies.
    assert: the entropy does not grow with A.
    """
    entropies = [
        metrics.entropy(_model_trace("v", ReducedParams(a_direct, 1.0, 1e5, 2.0))).entropy
        for a_direct in (1e-5, 1e-3, 1e-1)
    ]

    assert entropies[0] >= entropies[1] >= entropies[2]


def test_direct_dominated_corpus_has_lower_entropy(rng: np.random.Generator) -> None:
    """
    arrange: 100 traces dominated by direct recommendation and 100 dominated by word of mouth.
    act: compute their entropies.
    assert: the median entropy of the first corpus is lower.
    """
    direct = []
    word_of_mouth = []
    for index in range(100):
        a_direct = _log_uniform(rng, 0.05, 0.5)
        b_wom = a_direct / _log_uniform(rng, 3.0, 30.0)
        gamma = _log_uniform(rng, 0.1, 2.0)
        direct.append(_model_trace(f"a{index:03d}", ReducedParams(a_direct, b_wom, 1e5, gamma)))
        b_wom = _log_uniform(rng, 0.02, 0.2)
        a_direct = b_wom / _log_uniform(rng, 100.0, 1e4)
        gamma = _log_uniform(rng, 0.1, 2.0)
        word_of_mouth.append(
            _model_trace(f"b{index:03d}", ReducedParams(a_direct, b_wom, 1e5, gamma))
        )

    direct_median = np.median([report.entropy for report in metrics.entropy_corpus(direct)])
    wom_median = np.median([report.entropy for report in metrics.entropy_corpus(word_of_mouth)])

    assert direct_median < wom_median


def test_entropy_corpus_skips_invalid_traces() -> None:
    """
    arrange: a valid trace, a short trace and a trace with an empty window, out of order.
    act: compute the corpus entropies with and without skipping.
    assert: skipping keeps the valid trace only; otherwise the first invalid trace fails.
    """
    traces = [
        ViewTrace(video_id="z-valid", counts=(1.0,) * 30),
        ViewTrace(video_id="short", counts=(1.0,) * 5),
        ViewTrace(video_id="empty", counts=(0.0,) * 30),
    ]

    reports = metrics.entropy_corpus(traces, skip_invalid=True)

    assert [report.video_id for report in reports] == ["z-valid"]
    with pytest.raises(WindowTooLongError):
        metrics.entropy_corpus(traces)


def test_corpus_summary() -> None:
    """
    arrange: three entropy reports out of order.
    act: summarize them.
    assert: the CDF is ascending with steps of 1/3 and the scatter is sorted by video_id.
    """
    reports = [
        EntropyReport(video_id="c", window_days=30, entropy=0.9, total_views=10.0),
        EntropyReport(video_id="a", window_days=30, entropy=0.2, total_views=30.0),
        EntropyReport(video_id="b", window_days=30, entropy=0.5, total_views=20.0),
    ]

    summary = metrics.corpus_summary(reports)

    assert [value for value, _ in summary.cdf] == [0.2, 0.5, 0.9]
    assert [fraction for _, fraction in summary.cdf] == pytest.approx([1 / 3, 2 / 3, 1.0])
    assert summary.scatter == [("a", 0.2, 30.0), ("b", 0.5, 20.0), ("c", 0.9, 10.0)]


def test_corpus_summary_single_report_and_empty() -> None:
    """
    arrange: a single report, then no report.
    act: summarize.
    assert: a single step at the report's entropy, then EmptyInputError.
    """
    report = EntropyReport(video_id="a", window_days=30, entropy=0.4, total_views=1.0)

    assert metrics.corpus_summary([report]).cdf == [(0.4, 1.0)]
    with pytest.raises(EmptyInputError):
        metrics.corpus_summary([])
