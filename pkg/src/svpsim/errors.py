"""Exception hierarchy shared across the package.

Everything derives from SvpsimError so callers can catch library failures
with a single except clause while still distinguishing the common cases.
"""


class SvpsimError(Exception):
    """Base class for all package-specific errors."""


class DomainError(SvpsimError, ValueError):
    """An argument is outside the physical or mathematical domain of an operation."""


class ScenarioError(SvpsimError, ValueError):
    """A synthesis scenario is internally inconsistent (overlapping echoes, bad rates)."""


class ConfigError(SvpsimError, ValueError):
    """A key=value config or manifest could not be parsed or is missing required keys."""


class WaveformParseError(SvpsimError, ValueError):
    """A waveform file is malformed.  `line` carries the 1-based offending line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class CalibrationError(SvpsimError, ValueError):
    """Amplitude calibration constants are degenerate (e.g. equal charge/discharge marks)."""


class NoTriggerError(SvpsimError, RuntimeError):
    """The comparator never fired: no sample pair crosses the configured threshold."""


class MeasurementError(SvpsimError, RuntimeError):
    """A measurement could not be completed (missing echo, truncated crossings...)."""


class FrameError(SvpsimError, ValueError):
    """A protocol frame is malformed: bad sync, bad length, short buffer or CRC mismatch."""


class WrongModeError(SvpsimError, RuntimeError):
    """The device is not in a mode in which the requested action is defined."""
