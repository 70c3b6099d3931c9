"""
Query Suite Generation

Build personalised queries from interaction histories: profile the user,
write an atomic query for the target item, then rewrite it for a sampled
scenario and semantic opener. Suites are stored as JSONL.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from ..core.catalog import Catalog, build_profile, render_item
from ..errors import SimulationError
from ..llm.gateway import CallTag, ChatRequest, LLMGateway
from ..llm.prompts import render
from .scenarios import (
    DIFFICULTY_OF,
    Difficulty,
    Scenario,
    Semantic,
    description_of,
    opener_of,
    sample_scenarios,
    sample_semantics,
)

logger = logging.getLogger(__name__)


@dataclass
class QuerySpec:
    """One generated query with its target and scenario metadata."""
    query_id: str
    query_text: str
    user_id: str
    target_item_id: str
    scenario: str
    difficulty: str
    semantic: str
    scenario_description: str
    profile_text: str = ""
    atomic_query: str = ""

    def __post_init__(self):
        scenario = Scenario(self.scenario)
        difficulty = Difficulty(self.difficulty)
        Semantic(self.semantic)
        if DIFFICULTY_OF[scenario] is not difficulty:
            raise SimulationError(
                f"query {self.query_id}: scenario {scenario.value} is "
                f"{DIFFICULTY_OF[scenario].value}, not {difficulty.value}"
            )
        if not self.query_text.strip():
            raise SimulationError(f"query {self.query_id}: empty query text")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QuerySpec":
        fields = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        if "scenario_description" not in fields and "scenario" in fields:
            fields["scenario_description"] = description_of(Scenario(fields["scenario"]))
        try:
            return cls(**fields)
        except TypeError as exc:
            raise SimulationError(f"invalid query record: {exc}") from None


def _is_query(value: Any) -> bool:
    return isinstance(value, dict) and isinstance(value.get("query"), str) and bool(value["query"].strip())


def ensure_opener(query: str, opener: str) -> str:
    """Prefix ``opener`` when the query does not already contain it."""
    query = query.strip()
    if opener.lower() in query.lower():
        return query
    logger.debug("query lacks opener '%s'; prefixing it", opener)
    return f"{opener} {query[:1].lower()}{query[1:]}"


def parse_counts(difficulty: str, count: int) -> Dict[Difficulty, int]:
    """``--difficulty all --count N`` asks for N queries per tier."""
    if count <= 0:
        raise SimulationError("count must be positive")
    if difficulty == "all":
        return {d: count for d in Difficulty}
    return {Difficulty(difficulty): count}


def generate_queries(
    catalog: Catalog,
    counts: Mapping[Difficulty, int],
    seed: int,
    llm: LLMGateway,
    profile_window: int = 20,
    domain_noun: str = "clothing",
) -> List[QuerySpec]:
    """
    Generate a query suite.

    Parameters
    ----------
    catalog : Catalog
        Catalog carrying the user histories
    counts : dict
        Queries per difficulty
    seed : int
        Seed for user, scenario and opener sampling
    llm : LLMGateway
        Gateway for profile, atomic and final query calls

    Returns
    -------
    list of QuerySpec
        Easy, then medium, then hard; ids are ``<difficulty>-<NNNN>``
    """
    counts = {Difficulty(d): int(n) for d, n in counts.items()}
    if not counts or any(n <= 0 for n in counts.values()):
        raise SimulationError("counts must be positive")
    histories = catalog.histories
    if not histories:
        raise SimulationError("catalog has no user histories")
    total = sum(counts.values())
    if total > len(histories):
        raise SimulationError(
            f"insufficient histories: {total} queries requested, {len(histories)} histories available"
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(histories))[:total]
    users = iter(histories[i] for i in order)

    suite = []
    for difficulty in Difficulty:
        n = counts.get(difficulty, 0)
        if not n:
            continue
        scenarios = sample_scenarios(n, rng, difficulty)
        semantics = sample_semantics(n, rng)
        for i, (scenario, semantic) in enumerate(zip(scenarios, semantics)):
            history = next(users)
            profile = history.profile_text or build_profile(
                history, catalog, llm, window=profile_window, domain_noun=domain_noun)
            target = render_item(catalog.get(history.target_item), max_words=40)

            atomic = llm.chat(ChatRequest(
                system_prompt=render("atomic_query_system"),
                user_prompt=render("atomic_query_user", profile=profile, target=target),
                tag=CallTag.QUERY_GEN,
            )).strip()

            opener = opener_of(semantic)
            reply = llm.complete_json(ChatRequest(
                system_prompt=render("final_query_system"),
                user_prompt=render(
                    "final_query_user",
                    profile=profile,
                    target=target,
                    atomic_query=atomic,
                    scenario=scenario.value,
                    scenario_description=description_of(scenario),
                    opener=opener,
                ),
                tag=CallTag.QUERY_GEN,
            ), _is_query)

            suite.append(QuerySpec(
                query_id=f"{difficulty.value}-{i:04d}",
                query_text=ensure_opener(reply["query"], opener),
                user_id=history.user_id,
                target_item_id=history.target_item,
                scenario=scenario.value,
                difficulty=difficulty.value,
                semantic=semantic.value,
                scenario_description=description_of(scenario),
                profile_text=profile,
                atomic_query=atomic,
            ))
    return suite


def save_suite(suite: List[QuerySpec], path: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for spec in suite:
            f.write(json.dumps(spec.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    return path


def load_suite(path: str) -> List[QuerySpec]:
    """Read a JSONL suite; duplicate query ids are rejected."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Query suite not found: {path}")
    suite = []
    seen = set()
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SimulationError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            spec = QuerySpec.from_dict(record)
            if spec.query_id in seen:
                raise SimulationError(f"{path}:{lineno}: duplicate query id '{spec.query_id}'")
            seen.add(spec.query_id)
            suite.append(spec)
    if not suite:
        raise SimulationError(f"{path}: empty query suite")
    return suite


def select_suite(suite: List[QuerySpec], difficulty: Optional[str] = None) -> List[QuerySpec]:
    if difficulty in (None, "all"):
        return list(suite)
    return [s for s in suite if s.difficulty == Difficulty(difficulty).value]
