"""
thoughtrec: Thought-Pattern Guided Multi-Agent Recommendation

A Manager agent matches distilled thought patterns to user queries, plans in
phases, and dispatches Searcher, Item Retriever, Task Interpreter and
Interactor agents; a simulated user scores the resulting lists.
"""

__version__ = "0.1.0"
__author__ = "Arush"

from .core.orchestrator import PlannerStrategy, run_session
from .core.session import SessionDeps, SessionResult
from .core.thought_store import ThoughtStore, distill, match

__all__ = [
    "PlannerStrategy",
    "run_session",
    "SessionDeps",
    "SessionResult",
    "ThoughtStore",
    "distill",
    "match",
]
