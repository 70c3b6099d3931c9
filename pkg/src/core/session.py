"""
Session dependencies and results shared by the Manager agent and the
ReAct/Reflexion baselines.
"""

from dataclasses import dataclass, replace
from typing import Any, Dict, Optional

from ..errors import (
    CatalogError,
    ExecutorFailure,
    MalformedOutput,
    PlanValidationError,
    ProviderError,
    RetrievalError,
    SessionFailure,
)
from ..llm.gateway import LLMGateway
from .catalog import Catalog
from .executors import RecommendationResponse, SearchClient
from .plans import FailureReason, Trajectory
from .retrieval import Retriever
from .thought_store import ThoughtStore


@dataclass
class SessionDeps:
    """Everything a session reads; shared read-only across sessions."""
    store: ThoughtStore
    catalog: Catalog
    retriever: Retriever
    search_client: SearchClient
    llm: LLMGateway
    top_k: int = 5
    max_phases: int = 4
    retry_limit: int = 3
    react_max_steps: int = 8
    reflexion_max_reflections: int = 1
    domain_noun: str = "clothing"

    def with_llm(self, llm: LLMGateway) -> "SessionDeps":
        return replace(self, llm=llm)

    def with_store(self, store: ThoughtStore) -> "SessionDeps":
        return replace(self, store=store)


@dataclass
class SessionResult:
    """Terminal response or failure reason, plus the full trajectory."""
    response: Optional[RecommendationResponse]
    trajectory: Trajectory
    failure_reason: Optional[FailureReason] = None

    @property
    def succeeded(self) -> bool:
        return self.failure_reason is None and self.response is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "response": self.response.to_dict() if self.response else None,
            "failure_reason": self.failure_reason.value if self.failure_reason else None,
            "trajectory": self.trajectory.to_dict(),
        }


# Errors a session converts into a failure reason instead of raising.
SESSION_ERRORS = (SessionFailure, MalformedOutput, PlanValidationError, ExecutorFailure,
                  ProviderError, RetrievalError, CatalogError)


def failure_for(exc: Exception) -> FailureReason:
    if isinstance(exc, SessionFailure):
        return FailureReason(exc.reason)
    if isinstance(exc, (MalformedOutput, PlanValidationError)):
        return FailureReason.MALFORMED_OUTPUT
    return FailureReason.EXECUTOR_FAILURE
