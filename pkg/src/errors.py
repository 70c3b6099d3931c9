"""
Exception hierarchy.

Every domain error carries a ``label`` naming the module it came from so the
CLI can report ``error [<label>]: <message>``.
"""

from typing import Optional


class TairaError(Exception):
    """Base class for all domain errors."""

    label = "thoughtrec"


class ConfigError(TairaError, ValueError):
    label = "cli"


class CatalogError(TairaError, ValueError):
    label = "catalog"


class RetrievalError(TairaError, ValueError):
    label = "retrieval"


class LLMError(TairaError, RuntimeError):
    label = "llm_gateway"


class MalformedOutput(LLMError):
    """Completion could not be parsed into an acceptable value.

    Attributes
    ----------
    raw_text : str
        The last raw completion received
    attempts : int
        Number of provider calls made before giving up
    """

    def __init__(self, message: str, raw_text: str = "", attempts: int = 0):
        super().__init__(message)
        self.raw_text = raw_text
        self.attempts = attempts


class ProviderError(LLMError):
    """Transport failure after the retry budget was spent."""


class LedgerError(LLMError, ValueError):
    pass


class PatternStoreError(TairaError, ValueError):
    label = "thought_store"


class PlanValidationError(TairaError, ValueError):
    label = "orchestrator"


class SessionFailure(TairaError, RuntimeError):
    """Raised inside a session to stop it with a recorded failure reason."""

    label = "orchestrator"

    def __init__(self, reason, message: str = "", detail: Optional[str] = None):
        super().__init__(message or str(reason))
        self.reason = reason
        self.detail = detail or message


class ExecutorFailure(TairaError, RuntimeError):
    label = "executors"


class SimulationError(TairaError, ValueError):
    label = "usersim"


class EvaluationError(TairaError, ValueError):
    label = "evalharness"
