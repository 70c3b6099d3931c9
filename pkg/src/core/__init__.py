"""
Core recommendation modules: catalog, retrieval, thought patterns, plans,
executors and the planners.
"""

from .catalog import Catalog, Item, AttributeVocab, UserHistory, build_profile
from .retrieval import Retriever, RankedList, BM25Index, bm25_rank, embed_rank, map_attributes
from .thought_store import ThoughtPattern, ThoughtStore, MatchResult, PatternSource, match, distill
from .plans import AgentKind, Plan, SubTask, TaskHistory, TaskRecord, Trajectory, FailureReason, parse_plan
from .executors import (
    RecommendationList,
    RecommendationResponse,
    searcher,
    item_retriever,
    interpret,
    interactor,
)
from .session import SessionDeps, SessionResult
from .orchestrator import ManagerAgent, PlannerKind, PlannerStrategy, run_session
from .baselines import run_react

__all__ = [
    "Catalog",
    "Item",
    "AttributeVocab",
    "UserHistory",
    "build_profile",
    "Retriever",
    "RankedList",
    "BM25Index",
    "bm25_rank",
    "embed_rank",
    "map_attributes",
    "ThoughtPattern",
    "ThoughtStore",
    "MatchResult",
    "PatternSource",
    "match",
    "distill",
    "AgentKind",
    "Plan",
    "SubTask",
    "TaskHistory",
    "TaskRecord",
    "Trajectory",
    "FailureReason",
    "parse_plan",
    "RecommendationList",
    "RecommendationResponse",
    "searcher",
    "item_retriever",
    "interpret",
    "interactor",
    "SessionDeps",
    "SessionResult",
    "ManagerAgent",
    "PlannerKind",
    "PlannerStrategy",
    "run_session",
    "run_react",
]
