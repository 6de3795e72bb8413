"""Exception types shared across the package."""

from __future__ import annotations


class ShineError(Exception):
    """Base class for all package-specific errors."""


class ScenarioParseError(ShineError):
    """A scenario document is syntactically or structurally invalid.

    ``path`` points at the offending element using the same dotted/indexed
    notation as validation reports (e.g. ``devices[0].properties[1].initial``).
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class ConditionTypeError(ShineError):
    """A condition expression failed reference resolution or kind checking."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class CompileError(ShineError):
    """Raised when compiling a scenario that did not pass validation."""


class InteractionError(ShineError):
    """A device write request violated its preconditions (not a rule block).

    ``code`` is one of ``unknown_target``, ``not_writable``, ``out_of_domain``.
    """

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


class ClockError(ShineError):
    """Virtual clock misuse (regression)."""


class SequenceConflictError(ShineError):
    """An append violated the per-session gapless sequence contract.

    This indicates a serialization bug in the caller and is never swallowed.
    """


class ExplanationError(ShineError):
    """Explanation bookkeeping misuse (unknown instance, rating before delivery,
    querying outside interactive mode)."""


class UnknownSessionError(ShineError):
    """No session with the given id exists in storage or the registry."""


class SessionLifecycleError(ShineError):
    """Operation not permitted in the session's current lifecycle state."""


class ReplayError(ShineError):
    """An event log could not be replayed against its scenario."""
