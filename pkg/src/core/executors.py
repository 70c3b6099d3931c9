"""
Executors Module

The executor agents: Searcher (knowledge -> vocabulary attributes), Item
Retriever (preference parse -> ranked items), Task Interpreter (sub-task ->
executor input) and Interactor (final recommendation lists).
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Protocol, Tuple

import requests

from ..errors import ExecutorFailure, PlanValidationError
from ..llm.gateway import CallTag, ChatRequest, LLMGateway
from ..llm.prompts import agents_instruction, render
from .catalog import Catalog, tokenize
from .plans import AgentKind, TaskHistory, agent_from_name
from .retrieval import RankedList, Retriever

logger = logging.getLogger(__name__)

SEARCH_SUMMARY_WORDS = 20
PREFERENCE_WORDS = 15
LABEL_WORDS = 5
LIST_SIZE = 10

BUNDLED_CORPUS = Path(__file__).resolve().parent.parent / "resources" / "search_corpus.jsonl"


# =============================================================================
# Search clients
# =============================================================================

@dataclass(frozen=True)
class SearchResult:
    title: str
    snippet: str


class SearchClient(Protocol):
    def search(self, query: str) -> List[SearchResult]:
        ...


class OfflineSearchClient:
    """
    Fixture-backed search: every entry whose ``pattern`` occurs in the query
    (case-insensitive) contributes its results, in file order.
    """

    def __init__(self, entries: List[Tuple[str, List[SearchResult]]]):
        self.entries = [(pattern.lower(), results) for pattern, results in entries]

    @classmethod
    def from_file(cls, path: Optional[str] = None) -> "OfflineSearchClient":
        path = Path(path) if path else BUNDLED_CORPUS
        if not path.exists():
            raise FileNotFoundError(f"Search corpus not found: {path}")
        entries = []
        with open(path) as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    results = [SearchResult(r["title"], r["snippet"]) for r in record["results"]]
                    entries.append((record["pattern"], results))
                except (ValueError, KeyError, TypeError):
                    raise ExecutorFailure(f"{path}:{lineno}: malformed search corpus record") from None
        return cls(entries)

    def search(self, query: str) -> List[SearchResult]:
        lowered = query.lower()
        found: List[SearchResult] = []
        for pattern, results in self.entries:
            if pattern in lowered:
                found.extend(r for r in results if r not in found)
        return found


class HttpSearchClient:
    """Custom-search style JSON API (``items[].title`` / ``items[].snippet``)."""

    def __init__(self, url: str, api_key_env: str, engine_env: str = "TAIRA_SEARCH_CX",
                 timeout: float = 30.0):
        self.url = url
        self.api_key_env = api_key_env
        self.engine_env = engine_env
        self.timeout = timeout

    def search(self, query: str) -> List[SearchResult]:
        params = {"q": query, "key": os.getenv(self.api_key_env, "")}
        engine = os.getenv(self.engine_env)
        if engine:
            params["cx"] = engine
        try:
            response = requests.get(self.url, params=params, timeout=self.timeout)
            response.raise_for_status()
            items = response.json().get("items", [])
        except (requests.RequestException, ValueError) as exc:
            raise ExecutorFailure(f"search request failed: {exc}") from exc
        return [SearchResult(i.get("title", ""), i.get("snippet", "")) for i in items]


def make_search_client(config) -> SearchClient:
    """Build the client named by a ``SearchConfig``."""
    if config.kind == "online":
        return HttpSearchClient(config.url, config.api_key_env)
    return OfflineSearchClient.from_file(config.corpus_path or None)


# =============================================================================
# Searcher
# =============================================================================

def truncate_words(text: str, limit: int) -> str:
    return " ".join(text.split()[:limit])


def searcher(query: str, client: SearchClient, retriever: Retriever,
             llm: LLMGateway) -> List[str]:
    """
    Look up knowledge for ``query`` and return vocabulary attributes.

    The LLM's keyword summary is cut to 20 words and mapped onto the
    attribute vocabulary, so every returned string is retrievable.
    """
    if not query.strip():
        raise ExecutorFailure("searcher query is empty")
    results = client.search(query)
    if not results:
        logger.warning("no search results for %r; mapping the raw query", query)
        return retriever.map(query)

    request = ChatRequest(
        system_prompt=render("searcher_system"),
        user_prompt=render("searcher_user", query=query, results=results),
        tag=CallTag.SEARCHER,
    )
    summary = truncate_words(llm.chat(request), SEARCH_SUMMARY_WORDS)
    if not summary:
        summary = query
    return retriever.map(summary)


# =============================================================================
# Item Retriever
# =============================================================================

@dataclass
class PreferenceParse:
    """``[item type]; [preferences]`` split into keywords."""
    item_type: str
    preferences: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.item_type.strip():
            raise ExecutorFailure("preference parse has an empty item type")
        words = self.item_type.split()
        if len(words) > PREFERENCE_WORDS:
            self.item_type = " ".join(words[:PREFERENCE_WORDS])
            words = words[:PREFERENCE_WORDS]
        self.preferences = self.preferences[:PREFERENCE_WORDS - len(words)]

    @property
    def word_count(self) -> int:
        return len(self.item_type.split()) + len(self.preferences)


def parse_preferences(text: str) -> PreferenceParse:
    """Parse ``[type]; [prefs]`` output, truncating to 15 words in total."""
    cleaned = text.strip().strip("`").strip()
    if ";" in cleaned:
        head, tail = cleaned.split(";", 1)
    else:
        head, tail = cleaned, ""
    item_type = head.strip().strip("[]").strip()
    preferences = [w for w in tail.replace(",", " ").replace("[", " ").replace("]", " ").split() if w]
    return PreferenceParse(item_type=item_type, preferences=preferences)


def reorder_by_preferences(base: RankedList, catalog: Catalog,
                           preferences: List[str], n: int) -> RankedList:
    """
    Stable reorder by number of preference terms matched.

    Score = matched terms + a rank bonus in (0, 0.5] preserving base order
    within equal match counts.
    """
    terms = []
    for pref in preferences:
        for token in tokenize(pref):
            if token not in terms:
                terms.append(token)

    size = len(base.entries)
    scored = []
    for rank, (item_id, _) in enumerate(base.entries):
        doc = set(tokenize(catalog.get(item_id).search_text))
        hits = sum(1 for t in terms if t in doc)
        scored.append((hits, rank, item_id))
    scored.sort(key=lambda s: (-s[0], s[1]))

    entries = [(item_id, hits + 0.5 * (1.0 - rank / size)) for hits, rank, item_id in scored[:n]]
    return RankedList(entries=entries, query_terms=list(base.query_terms) + terms)


def item_retriever(request: str, catalog: Catalog, retriever: Retriever, llm: LLMGateway,
                   n: int = LIST_SIZE, domain_noun: str = "clothing") -> RankedList:
    """
    Parse preferences from ``request``, pull a candidate pool by item type and
    reorder it by preference matches.
    """
    if not request.strip():
        raise ExecutorFailure("item retriever request is empty")
    prefs_request = ChatRequest(
        system_prompt=render("retriever_system"),
        user_prompt=render("retriever_user", request=request, domain_noun=domain_noun),
        tag=CallTag.RETRIEVER_PREFS,
    )
    parse = parse_preferences(llm.chat(prefs_request))
    base = retriever.candidates(parse.item_type)
    if not base.entries:
        raise ExecutorFailure(f"no candidates for item type '{parse.item_type}'")
    return reorder_by_preferences(base, catalog, parse.preferences, n)


# =============================================================================
# Task Interpreter
# =============================================================================

INTERPRETABLE = frozenset({AgentKind.SEARCHER, AgentKind.ITEM_RETRIEVER, AgentKind.INTERACTOR})


def _is_query(value: Any) -> bool:
    return isinstance(value, dict) and isinstance(value.get("query"), str) and bool(value["query"].strip())


def interpret(content: str, history: TaskHistory, next_agent, llm: LLMGateway,
              with_planner: bool = True) -> str:
    """Turn a sub-task description into the next agent's input."""
    try:
        agent = agent_from_name(next_agent)
    except PlanValidationError:
        raise ExecutorFailure(f"unknown next agent '{next_agent}'") from None
    if agent not in INTERPRETABLE:
        raise ExecutorFailure(f"{agent.value} does not take interpreted input")

    request = ChatRequest(
        system_prompt=render("interpreter_system"),
        user_prompt=render(
            "interpreter_user",
            agents_instruction=agents_instruction(with_planner),
            history=history.render(),
            content=content,
            agent=agent.wire_name,
            previous_output=history.last_output or "none",
        ),
        tag=CallTag.INTERPRETER,
    )
    return llm.complete_json(request, _is_query)["query"].strip()


# =============================================================================
# Interactor
# =============================================================================

@dataclass
class RecommendationList:
    label: str
    items: List[Tuple[str, str]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "recommendation": self.label,
            "items": [{"id": i, "title": t} for i, t in self.items],
        }


@dataclass
class RecommendationResponse:
    """One or more labelled lists of exactly 10 items."""
    lists: List[RecommendationList]

    def __post_init__(self):
        if not self.lists:
            raise ExecutorFailure("response has no lists")
        for n, rec in enumerate(self.lists, start=1):
            if not rec.label.strip():
                raise ExecutorFailure(f"list {n} has an empty label")
            if len(rec.items) != LIST_SIZE:
                raise ExecutorFailure(f"list {n} has {len(rec.items)} items, expected {LIST_SIZE}")

    @property
    def item_ids(self) -> List[str]:
        return [i for rec in self.lists for i, _ in rec.items]

    def to_dict(self) -> Dict[str, Any]:
        return {"lists": [rec.to_dict() for rec in self.lists]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RecommendationResponse":
        return cls([
            RecommendationList(
                label=str(rec["recommendation"]),
                items=[(str(i["id"]), str(i.get("title", ""))) for i in rec["items"]],
            )
            for rec in data["lists"]
        ])


def _is_lists_shape(value: Any) -> bool:
    if not isinstance(value, dict) or not isinstance(value.get("lists"), list) or not value["lists"]:
        return False
    for rec in value["lists"]:
        if not isinstance(rec, dict) or not isinstance(rec.get("recommendation"), str):
            return False
        items = rec.get("items")
        if not isinstance(items, list) or not all(isinstance(i, dict) and "id" in i for i in items):
            return False
    return True


def _response_problems(value: Dict[str, Any], allowed_ids: set) -> List[str]:
    problems = []
    for n, rec in enumerate(value["lists"], start=1):
        if not rec["recommendation"].strip():
            problems.append(f"list {n} has an empty label")
        if len(rec["items"]) != LIST_SIZE:
            problems.append(f"list {n} has {len(rec['items'])} items")
        unknown = [str(i["id"]) for i in rec["items"] if str(i["id"]) not in allowed_ids]
        if unknown:
            problems.append(f"list {n} has ids not in the retrieval results: {unknown}")
    return problems


def interactor(history: TaskHistory, instruction: str, llm: LLMGateway,
               catalog: Optional[Catalog] = None) -> RecommendationResponse:
    """
    Write the final response from the task history.

    Every id must come from an earlier Item Retriever output; a response that
    breaks the list rules gets one corrective re-prompt before failing.
    """
    allowed = history.retrieved_item_ids()
    if not history.retrieval_records():
        raise ExecutorFailure("interactor needs at least one item retrieval output in the history")

    request = ChatRequest(
        system_prompt=render("interactor_system"),
        user_prompt=render("interactor_user", history=history.render(),
                           instruction=instruction or "none"),
        tag=CallTag.INTERACTOR,
    )
    value = llm.complete_json(request, _is_lists_shape)
    problems = _response_problems(value, allowed)
    if problems:
        logger.warning("interactor response rejected: %s", "; ".join(problems))
        corrective = replace(
            request,
            user_prompt=request.user_prompt + render("interactor_corrective",
                                                     problems="; ".join(problems)),
        )
        value = llm.complete_json(corrective, _is_lists_shape)
        problems = _response_problems(value, allowed)
        if problems:
            raise ExecutorFailure("interactor response invalid after re-prompt: " + "; ".join(problems))

    lists = []
    for rec in value["lists"]:
        items = []
        for raw in rec["items"]:
            item_id = str(raw["id"])
            title = catalog.get(item_id).title if catalog is not None else str(raw.get("title", ""))
            items.append((item_id, title))
        lists.append(RecommendationList(label=truncate_words(rec["recommendation"], LABEL_WORDS),
                                        items=items))
    return RecommendationResponse(lists)


def format_attributes(attributes: List[str]) -> str:
    return "Attributes: " + ", ".join(attributes) if attributes else "Attributes: none"


def format_ranked(ranked: RankedList, catalog: Catalog) -> str:
    lines = [f"{n}. [{item_id}] {catalog.get(item_id).title}"
             for n, (item_id, _) in enumerate(ranked.entries, start=1)]
    return "Retrieved items:\n" + "\n".join(lines)

