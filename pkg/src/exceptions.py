# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Custom exceptions used by the popularity model library and its command-line surface."""

import typing


class PopularityError(Exception):
    """Indicate an unrecoverable error in a model, simulation, fitting or metrics operation.

    The running command should terminate after this exception is raised.

    Attrs:
        code: stable machine-readable error code, printed by the command-line surface.
        message: human-readable description of the problem.
    """

    code = "popularity-error"

    def __init__(self, message: str):
        """Initialize the PopularityError instance.

        Args:
            message: human-readable description of the problem.
        """
        super().__init__(message)
        self.message = message

    def one_line(self) -> str:
        """Render the error as a single machine-parsable line.

        Returns:
            The error code and message, newlines collapsed.
        """
        message = " ".join(self.message.split())
        return f"error: {self.code}: {message}"


class InvalidParameterError(PopularityError):
    """A model, grid, simulation or command parameter is outside its valid range.

    Attrs:
        field: name of the offending parameter.
    """

    code = "invalid-parameter"

    def __init__(self, field: str, message: str):
        """Initialize the InvalidParameterError instance.

        Args:
            field: name of the offending parameter.
            message: human-readable description of the problem.
        """
        super().__init__(f"{field}: {message}")
        self.field = field


class NumericalOverflowError(PopularityError):
    """A quantity was requested in a form that cannot be represented in 64-bit floating point."""

    code = "numerical-overflow"


class GridTooCoarseError(PopularityError):
    """A grid cannot resolve the fastest rate of the model within its allowed size."""

    code = "grid-too-coarse"


class HorizonTooShortError(PopularityError):
    """The view rate is still rising at the end of the requested horizon.

    Attrs:
        horizon: the horizon that was too short.
    """

    code = "horizon-too-short"

    def __init__(self, horizon: float, message: str):
        """Initialize the HorizonTooShortError instance.

        Args:
            horizon: the horizon that was too short.
            message: human-readable description of the problem.
        """
        super().__init__(message)
        self.horizon = horizon


class ProbabilityOverflowError(PopularityError):
    """A linearized per-slot transition probability exceeded 1."""

    code = "probability-overflow"


class EmptyInputError(PopularityError):
    """An aggregate operation received no input."""

    code = "empty-input"


class DegenerateTraceError(PopularityError):
    """A view trace carries no information (for example, every count is zero)."""

    code = "degenerate-trace"


class WindowTooLongError(PopularityError):
    """The entropy window is longer than the view trace."""

    code = "window-too-long"


class EmptyWindowError(PopularityError):
    """Every count in the entropy window is zero, so the distribution is undefined."""

    code = "empty-window"


class TraceFormatError(PopularityError):
    """A view trace file does not follow the ``video_id,day,views`` schema.

    Attrs:
        line_number: 1-based line number of the offending row, ``None`` for file-level errors.
    """

    code = "trace-format"

    def __init__(self, message: str, line_number: typing.Optional[int] = None):
        """Initialize the TraceFormatError instance.

        Args:
            message: human-readable description of the problem.
            line_number: 1-based line number of the offending row.
        """
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class UsageError(PopularityError):
    """The command line could not be parsed."""

    code = "usage"


class ReproducibilityError(PopularityError):
    """A rerun from a manifest produced outputs that differ from the recorded digests."""

    code = "rerun-mismatch"
