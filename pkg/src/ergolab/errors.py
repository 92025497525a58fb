"""Exception types shared across ergolab."""


class ErgolabError(Exception):
    """Base class for all ergolab errors."""


class ValidationError(ErgolabError, ValueError):
    """Structurally invalid input; ``location`` points at the offending field."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{location}: {message}")
        self.location = location


class SubadditivityViolation(ValidationError):
    """A sampled inequality a_{m+n} <= a_m + a_n (+ c) failed at ``witness``."""

    def __init__(self, message, witness):
        super().__init__(message)
        self.witness = witness


class IntegrationFailure(ErgolabError, RuntimeError):
    """Adaptive integration stopped early.

    ``last_time`` is the last accepted time and ``partial`` whatever the
    caller managed to produce before the failure (may be None).
    """

    def __init__(self, message, last_time, partial=None):
        super().__init__(f"{message} (last good time {last_time:.17g})")
        self.last_time = last_time
        self.partial = partial
