# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Read view traces and write result files.

Trace files are CSV with the header ``video_id,day,views``. A file may hold several videos;
days are counted from the upload day and may be sparse, missing days having zero views.
"""

import hashlib
import json
import logging
import math
import pathlib
import re
import typing

import numpy as np
import pandas as pd

from exceptions import PopularityError, TraceFormatError
from popularity_types import ViewTrace

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["video_id", "day", "views"]
FLOAT_FORMAT = "%.17g"
# header occupies line 1
_FIRST_DATA_LINE = 2
_DIGEST_CHUNK = 1 << 16


def _first_bad_row(frame: pd.DataFrame) -> typing.Optional[typing.Tuple[int, str]]:
    """Locate the first row that violates the trace schema.

    Args:
        frame: the raw rows, every cell a string.

    Returns:
        The row index and a description of the problem, or None when every row is valid.
    """
    days = pd.to_numeric(frame["day"], errors="coerce")
    views = pd.to_numeric(frame["views"], errors="coerce")
    bad_days = days.isna() | (days < 0) | (days % 1 != 0)
    # compared on the parsed day so that "1" and "1.0" collide
    keys = pd.DataFrame({"video_id": frame["video_id"], "day": days})
    checks = [
        (frame["video_id"].str.strip() == "", "video_id is empty"),
        (bad_days, "day must be an integer >= 0"),
        (views.isna() | ~np.isfinite(views) | (views < 0), "views must be a finite number >= 0"),
        (keys.duplicated() & ~bad_days, "duplicate (video_id, day) row"),
    ]
    problems = []
    for mask, reason in checks:
        if mask.any():
            problems.append((int(np.argmax(mask.to_numpy())), reason))
    return min(problems) if problems else None


def _read_trace_file(path: pathlib.Path) -> typing.List[ViewTrace]:
    """Read every trace of one CSV file.

    Args:
        path: the file.

    Returns:
        The traces sorted by video_id.

    Raises:
        TraceFormatError: when the file does not follow the schema.
    """
    try:
        frame = pd.read_csv(
            path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8"
        )
    except pd.errors.EmptyDataError as exc:
        raise TraceFormatError(f"{path}: file is empty") from exc
    except pd.errors.ParserError as exc:
        match = re.search(r"line (\d+)", str(exc))
        line_number = int(match.group(1)) if match else None
        raise TraceFormatError(f"{path}: {exc}", line_number) from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise TraceFormatError(f"{path}: cannot read file: {exc}") from exc
    header = [str(column).strip() for column in frame.columns]
    if header != TRACE_COLUMNS:
        raise TraceFormatError(
            f"{path}: header must be {','.join(TRACE_COLUMNS)}, got {','.join(header)}", 1
        )
    frame.columns = header
    if frame.empty:
        raise TraceFormatError(f"{path}: file has no data rows")
    frame["video_id"] = frame["video_id"].str.strip()
    bad = _first_bad_row(frame)
    if bad is not None:
        row, reason = bad
        values = ",".join(frame.iloc[row].tolist())
        raise TraceFormatError(f"{path}: {reason}: {values!r}", row + _FIRST_DATA_LINE)
    frame["day"] = pd.to_numeric(frame["day"]).astype(np.int64)
    frame["views"] = pd.to_numeric(frame["views"]).astype(np.float64)
    traces = []
    for video_id, rows in frame.groupby("video_id", sort=True):
        counts = np.zeros(int(rows["day"].max()) + 1, dtype=np.float64)
        counts[rows["day"].to_numpy()] = rows["views"].to_numpy()
        traces.append(ViewTrace(video_id=str(video_id), counts=tuple(counts)))
    logger.debug("Read %d trace(s) from %s", len(traces), path)
    return traces


def read_traces(path: typing.Union[str, pathlib.Path]) -> typing.List[ViewTrace]:
    """Read view traces from a CSV file or from every ``*.csv`` file of a directory.

    Args:
        path: a trace file or a directory of trace files.

    Returns:
        The traces sorted by video_id.

    Raises:
        TraceFormatError: when a file is malformed, or a video appears in two files.
    """
    path = pathlib.Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.csv"))
        if not files:
            raise TraceFormatError(f"{path}: directory holds no *.csv file")
    elif path.is_file():
        files = [path]
    else:
        raise TraceFormatError(f"{path}: no such file or directory")
    traces: typing.Dict[str, ViewTrace] = {}
    for file_path in files:
        for trace in _read_trace_file(file_path):
            if trace.video_id in traces:
                raise TraceFormatError(f"{file_path}: video {trace.video_id!r} read twice")
            traces[trace.video_id] = trace
    return [traces[video_id] for video_id in sorted(traces)]


def write_trace_csv(traces: typing.Iterable[ViewTrace], path: pathlib.Path) -> None:
    """Write traces in the ``video_id,day,views`` schema, one row per day.

    Args:
        traces: the traces.
        path: the output file.
    """
    rows = [
        (trace.video_id, day, count) for trace in traces for day, count in enumerate(trace.counts)
    ]
    write_frame_csv(pd.DataFrame(rows, columns=TRACE_COLUMNS), path)


def write_frame_csv(frame: pd.DataFrame, path: pathlib.Path) -> None:
    """Write a table as UTF-8 CSV with a header row and 17 significant digits.

    Args:
        frame: the table.
        path: the output file.

    Raises:
        PopularityError: when the file cannot be written.
    """
    try:
        frame.to_csv(
            path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8", lineterminator="\n"
        )
    except OSError as exc:
        raise PopularityError(f"cannot write {path}: {exc}") from exc


def _json_default(value: typing.Any) -> typing.Any:
    """Convert numpy scalars for the JSON encoder."""
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def to_json(payload: typing.Any) -> str:
    """Serialize with sorted keys; floats keep their shortest round-trip form.

    Args:
        payload: JSON-ready data, numpy scalars allowed.

    Returns:
        The JSON text.
    """
    return json.dumps(payload, sort_keys=True, default=_json_default, allow_nan=True)


def write_json(payload: typing.Any, path: pathlib.Path) -> None:
    """Write JSON data followed by a newline.

    Args:
        payload: JSON-ready data.
        path: the output file.

    Raises:
        PopularityError: when the file cannot be written.
    """
    try:
        text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default)
        path.write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise PopularityError(f"cannot write {path}: {exc}") from exc


def file_digest(path: pathlib.Path) -> str:
    """Compute the sha256 digest of a file.

    Args:
        path: the file.

    Returns:
        The hex digest.
    """
    digest = hashlib.sha256()
    with open(path, "rb") as stream:
        for chunk in iter(lambda: stream.read(_DIGEST_CHUNK), b""):
            digest.update(chunk)
    return digest.hexdigest()


def finite_or_none(value: float) -> typing.Optional[float]:
    """Map infinities and NaN to None for JSON output."""
    return value if math.isfinite(value) else None
