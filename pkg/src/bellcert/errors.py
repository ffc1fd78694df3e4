"""Exception types raised across the toolkit."""


class BellcertError(Exception):
    """Base class for all toolkit errors."""


class ZeroSettingProbability(BellcertError, ValueError):
    """A settings pair (x, y) has zero probability, so conditionals are undefined."""


class MalformedTrialData(BellcertError, ValueError):
    pass


class EmptySettingCell(BellcertError, ValueError):
    pass


class NotConverged(BellcertError, RuntimeError):
    pass


class DegenerateInput(BellcertError, ValueError):
    pass


class NoViolationPossible(BellcertError, ValueError):
    pass


class StreamTooShort(BellcertError, ValueError):
    pass


class InvalidParams(BellcertError, ValueError):
    pass


class InvalidPrime(BellcertError, ValueError):
    pass


class LengthMismatch(BellcertError, ValueError):
    pass


class DegenerateMargin(BellcertError, ValueError):
    pass


class Infeasible(BellcertError, ValueError):
    pass


class Abort(BellcertError):
    """The protocol aborted: no certified randomness is produced."""

    def __init__(self, reason, report=None):
        super().__init__(reason)
        self.reason = reason
        self.report = report


class StageError(BellcertError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
