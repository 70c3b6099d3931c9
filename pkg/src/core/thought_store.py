"""
Thought Store Module

Thought patterns (task description, solution description, thought template),
top-K matching with an LLM selector, and pattern distillation from task
routes, expert corrections and expert-written experience.
"""

import hashlib
import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..errors import PatternStoreError
from ..llm.gateway import CallTag, ChatRequest, LLMGateway
from ..llm.prompts import render
from .catalog import tokenize
from .plans import Trajectory
from .retrieval import EmbeddingProvider, cosine_similarity

logger = logging.getLogger(__name__)

UNTAGGED = "untagged"
DEFAULT_TOP_K = 5


class PatternSource(str, Enum):
    """Where a pattern's experience came from."""
    AGENT_SUCCESS = "agent_success"
    EXPERT_CORRECTED = "agent_failed_expert_corrected"
    EXPERT_DIRECT = "expert_direct"


EXPERT_SOURCES = frozenset({PatternSource.EXPERT_CORRECTED, PatternSource.EXPERT_DIRECT})


@dataclass(eq=False)
class ThoughtPattern:
    """
    A distilled planning experience.

    Attributes
    ----------
    id : str
        Store-unique identifier
    task_description : str
        Abstract description of the task type (used for matching)
    solution_description : str
        Conceptual guidance (shown on the novel-task path)
    thought_template : str
        "Step N:" (optionally "Phase N:") execution outline
    source : PatternSource
        Provenance of the experience
    scenario_tag : str
        Interaction scenario the pattern was learned on
    embedding : ndarray, optional
        Embedding of ``task_description``
    """
    id: str
    task_description: str
    solution_description: str
    thought_template: str
    source: PatternSource
    scenario_tag: str = UNTAGGED
    embedding: Optional[np.ndarray] = None

    def __post_init__(self):
        self.source = PatternSource(self.source)
        self.validate()

    def validate(self) -> None:
        for name in ("id", "task_description", "solution_description", "thought_template"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise PatternStoreError(f"pattern field '{name}' must be non-empty")
        if "Step" not in self.thought_template:
            raise PatternStoreError(f"pattern '{self.id}': thought_template has no 'Step' marker")
        if not self.scenario_tag:
            self.scenario_tag = UNTAGGED

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ThoughtPattern):
            return NotImplemented
        if self.to_dict() != other.to_dict():
            return False
        if self.embedding is None or other.embedding is None:
            return self.embedding is None and other.embedding is None
        return bool(np.array_equal(self.embedding, other.embedding))

    def render(self) -> str:
        return (
            f"Task description: {self.task_description}\n"
            f"Solution description: {self.solution_description}\n"
            f"Thought template: {self.thought_template}"
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "task_description": self.task_description,
            "solution_description": self.solution_description,
            "thought_template": self.thought_template,
            "source": self.source.value,
            "scenario_tag": self.scenario_tag,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], embedding: Optional[np.ndarray] = None) -> "ThoughtPattern":
        try:
            return cls(
                id=str(data["id"]),
                task_description=data["task_description"],
                solution_description=data["solution_description"],
                thought_template=data["thought_template"],
                source=data["source"],
                scenario_tag=data.get("scenario_tag") or UNTAGGED,
                embedding=embedding,
            )
        except KeyError as exc:
            raise PatternStoreError(f"pattern record missing field {exc}") from None
        except ValueError as exc:
            raise PatternStoreError(f"invalid pattern record: {exc}") from None


@dataclass
class MatchResult:
    """Outcome of matching a query against the store."""
    outcome: str
    pattern_id: Optional[str] = None
    candidates: List[Tuple[str, float]] = field(default_factory=list)
    nearest_ids: List[str] = field(default_factory=list)

    MATCHED = "matched"
    NOVEL = "novel"

    @property
    def is_matched(self) -> bool:
        return self.outcome == self.MATCHED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "outcome": self.outcome,
            "pattern_id": self.pattern_id,
            "candidates": [[pid, round(score, 6)] for pid, score in self.candidates],
            "nearest_ids": list(self.nearest_ids),
        }


def _jaccard(a: set, b: set) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


class ThoughtStore:
    """
    Ordered pattern collection with copy-on-write snapshots.

    Readers take :meth:`snapshot` (an immutable tuple); writers go through
    :meth:`commit` / :meth:`delete`, serialized by one lock.
    """

    def __init__(self, patterns: Iterable[ThoughtPattern] = (),
                 embedder: Optional[EmbeddingProvider] = None):
        self._lock = threading.RLock()
        self.embedder = embedder
        self._patterns: Tuple[ThoughtPattern, ...] = ()
        for pattern in patterns:
            self.commit(pattern)

    def snapshot(self) -> Tuple[ThoughtPattern, ...]:
        return self._patterns

    def __len__(self) -> int:
        return len(self._patterns)

    def __iter__(self):
        return iter(self._patterns)

    def __contains__(self, pattern_id: str) -> bool:
        return any(p.id == pattern_id for p in self._patterns)

    @property
    def ids(self) -> List[str]:
        return [p.id for p in self._patterns]

    @property
    def scenario_tags(self) -> List[str]:
        return sorted({p.scenario_tag for p in self._patterns})

    @property
    def sources(self) -> List[str]:
        return sorted({p.source.value for p in self._patterns})

    def get(self, pattern_id: str) -> ThoughtPattern:
        for pattern in self._patterns:
            if pattern.id == pattern_id:
                return pattern
        raise PatternStoreError(f"unknown pattern id '{pattern_id}'")

    def _embed(self, pattern: ThoughtPattern) -> ThoughtPattern:
        if self.embedder is not None and (
            pattern.embedding is None or pattern.embedding.shape != (self.embedder.dimension,)
        ):
            pattern.embedding = np.asarray(self.embedder.embed(pattern.task_description),
                                           dtype=np.float32)
        return pattern

    def commit(self, pattern: ThoughtPattern) -> ThoughtPattern:
        """Insert, or replace in place when the id already exists."""
        pattern = self._embed(pattern)
        with self._lock:
            current = list(self._patterns)
            for i, existing in enumerate(current):
                if existing.id == pattern.id:
                    current[i] = pattern
                    break
            else:
                current.append(pattern)
            self._patterns = tuple(current)
        return pattern

    def delete(self, pattern_id: str) -> None:
        with self._lock:
            if pattern_id not in self:
                raise PatternStoreError(f"unknown pattern id '{pattern_id}'")
            self._patterns = tuple(p for p in self._patterns if p.id != pattern_id)

    def _derive(self, patterns: Iterable[ThoughtPattern]) -> "ThoughtStore":
        store = ThoughtStore(embedder=self.embedder)
        store._patterns = tuple(patterns)
        return store

    def remove_by_scenario(self, scenario_tag: str) -> "ThoughtStore":
        """New store without the patterns tagged ``scenario_tag``."""
        snapshot = self.snapshot()
        if not any(p.scenario_tag == scenario_tag for p in snapshot):
            raise PatternStoreError(f"unknown scenario tag '{scenario_tag}'")
        return self._derive(p for p in snapshot if p.scenario_tag != scenario_tag)

    def filter_sources(self, sources: Iterable) -> "ThoughtStore":
        """New store keeping only patterns whose source is in ``sources``."""
        keep = {PatternSource(s) for s in sources}
        return self._derive(p for p in self.snapshot() if p.source in keep)

    def top_k(self, query: str, k: int) -> List[Tuple[str, float]]:
        """
        Candidates ranked by similarity between query and task descriptions.

        Cosine over embeddings when an embedder is set, token Jaccard otherwise.
        Ties broken by ascending id; length is min(k, store size).
        """
        if k <= 0:
            raise PatternStoreError(f"K must be positive, got {k}")
        snapshot = self.snapshot()
        scored = []
        if self.embedder is not None:
            query_vec = self.embedder.embed(query)
            for p in snapshot:
                scored.append((p.id, cosine_similarity(query_vec, p.embedding)))
        else:
            query_tokens = set(tokenize(query))
            for p in snapshot:
                scored.append((p.id, _jaccard(query_tokens, set(tokenize(p.task_description)))))
        scored.sort(key=lambda t: (-t[1], t[0]))
        return scored[:k]


def _is_selection(value: Any) -> bool:
    return isinstance(value, dict) and isinstance(value.get("selected"), str)


def match(query: str, store: ThoughtStore, k: int, llm: LLMGateway) -> MatchResult:
    """
    Match a query to one stored pattern or declare it novel.

    The top-K candidates by similarity go to the selector LLM, which names
    one candidate id or "none". An id outside the candidates counts as none.
    """
    candidates = store.top_k(query, k) if len(store) else []
    if not candidates:
        return MatchResult(outcome=MatchResult.NOVEL)

    candidate_ids = [pid for pid, _ in candidates]
    request = ChatRequest(
        system_prompt=render("selector_system"),
        user_prompt=render(
            "selector_user",
            query=query,
            candidates=[store.get(pid) for pid in candidate_ids],
        ),
        tag=CallTag.MATCH,
    )
    selected = llm.complete_json(request, _is_selection)["selected"].strip()

    if selected in candidate_ids:
        return MatchResult(outcome=MatchResult.MATCHED, pattern_id=selected,
                           candidates=candidates, nearest_ids=candidate_ids)
    if selected.lower() not in ("none", ""):
        logger.warning("selector named '%s', which is not a candidate; treating as novel", selected)
    return MatchResult(outcome=MatchResult.NOVEL, candidates=candidates, nearest_ids=candidate_ids)


def _is_pattern_reply(value: Any) -> bool:
    if not isinstance(value, dict):
        return False
    fields = ("task_description", "solution_description", "thought_template")
    if not all(isinstance(value.get(f), str) and value[f].strip() for f in fields):
        return False
    return "Step" in value["thought_template"]


def mint_pattern_id(task_description: str, solution_description: str) -> str:
    digest = hashlib.sha1((task_description + "\n" + solution_description).encode("utf-8"))
    return "pattern_" + digest.hexdigest()[:10]


def distill(
    route: Optional[Trajectory],
    expert_opinion: Optional[str],
    old: Optional[ThoughtPattern],
    llm: LLMGateway,
    scenario_tag: Optional[str] = None,
) -> ThoughtPattern:
    """
    Produce a new or revised thought pattern.

    Parameters
    ----------
    route : Trajectory, optional
        Executed session; may be None for expert-written experience
    expert_opinion : str, optional
        Expert correction or experience text
    old : ThoughtPattern, optional
        Pattern to revise; its id is kept so committing replaces it
    llm : LLMGateway
        Gateway for the distillation call
    scenario_tag : str, optional
        Tag for the result; defaults to the old pattern's or the route's

    Returns
    -------
    ThoughtPattern
        Pattern with its source set from the inputs
    """
    opinion = (expert_opinion or "").strip()
    has_route = route is not None and len(route.history) > 0

    if not has_route and not opinion:
        raise PatternStoreError("distill needs an executed route or an expert opinion")
    if has_route and not route.succeeded and not opinion:
        raise PatternStoreError("a failed route can only be distilled with an expert opinion")

    if not has_route:
        source = PatternSource.EXPERT_DIRECT
    elif opinion:
        source = PatternSource.EXPERT_CORRECTED
    else:
        source = PatternSource.AGENT_SUCCESS

    request = ChatRequest(
        system_prompt=render("distill_system"),
        user_prompt=render(
            "distill_user",
            old_pattern=old.render() if old else "none",
            route=route.render_route() if has_route else "none",
            opinion=opinion or "none",
        ),
        tag=CallTag.DISTILL,
    )
    reply = llm.complete_json(request, _is_pattern_reply)

    task_description = reply["task_description"].strip()
    solution_description = reply["solution_description"].strip()
    tag = scenario_tag or (old.scenario_tag if old else None) or (
        route.scenario_tag if route is not None else None) or UNTAGGED

    return ThoughtPattern(
        id=old.id if old else mint_pattern_id(task_description, solution_description),
        task_description=task_description,
        solution_description=solution_description,
        thought_template=reply["thought_template"].strip(),
        source=source,
        scenario_tag=tag,
    )
