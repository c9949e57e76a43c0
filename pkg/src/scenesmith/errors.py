"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


# --- prompt analysis ---------------------------------------------------------


class UnparseablePrompt(EngineError):
    """The rule grammar matched no template for the prompt."""


class MalformedResponse(EngineError):
    """An agent completion did not follow the expected answer grammar."""


class NegativeBoxSize(MalformedResponse):
    """A parsed bounding box had a non-positive width or height."""


# --- layout ------------------------------------------------------------------


class LayoutInfeasible(EngineError):
    """Constraints could not be met after the bounded relaxation schedule."""


class InvalidDiffIndex(EngineError):
    """A layout edit referenced an entry index that does not exist."""


# --- policy ------------------------------------------------------------------


class IllegalTransition(EngineError):
    """A session-state transition outside the declared graph was attempted."""


class InvalidFeedback(EngineError):
    """Human feedback was malformed or not applicable."""


# --- guidance ----------------------------------------------------------------


class ZeroAreaAtResolution(EngineError):
    """A box covers no grid cell at the requested resolution."""


class EmptyMask(EngineError):
    """A guidance or edit mask contained no foreground pixels."""


class EmptyInput(EngineError):
    """An aggregate operation received no inputs."""


class LengthMismatch(EngineError):
    """Vectors of differing lengths were combined."""


# --- tool protocol -----------------------------------------------------------


class ToolUnavailable(EngineError):
    """All dispatch attempts against an endpoint failed."""


class KindMismatch(EngineError):
    """A request was dispatched to an endpoint of a different tool kind."""


class NoMatch(EngineError):
    """A segmentation request matched no layout entry."""


# --- orchestrator ------------------------------------------------------------


class StorageFailure(EngineError):
    """The session store could not persist or read a record."""


class SessionNotFound(EngineError):
    """No session with the given id exists in the store."""
