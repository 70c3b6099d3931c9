"""
Evaluation Harness

Run a query suite through one strategy, judge every response with the
simulated user, and aggregate SR / HR@10 / NDCG@10 overall and per
difficulty. Ablations E and A reduce the pattern store by source; T and H
switch the planner. Novel-task runs remove whole scenarios from the store.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from ..core.orchestrator import PlannerStrategy, run_session
from ..core.plans import AgentKind, FailureReason, Trajectory
from ..core.session import SessionDeps, SessionResult
from ..core.thought_store import EXPERT_SOURCES, PatternSource, ThoughtStore
from ..errors import EvaluationError
from ..llm.gateway import TokenLedger
from ..sim.judge import SimVerdict, judge
from ..sim.queries import QuerySpec
from ..sim.scenarios import Difficulty
from .metrics import hr_at_10, ndcg_at_10, success_rate

logger = logging.getLogger(__name__)

METRIC_NAMES = ("HR@10", "NDCG@10", "SR")


@dataclass
class QueryOutcome:
    """Session outcome and verdict for one suite entry."""
    query_id: str
    difficulty: str
    scenario: str
    failure_reason: Optional[str] = None
    verdict: Optional[SimVerdict] = None
    error: str = ""
    prompt_mode: str = "none"
    phases: int = 0
    planner_subtasks: int = 0
    attempts: int = 1
    tokens: Dict[str, Any] = field(default_factory=dict)
    latency: float = 0.0
    trajectory: Optional[Trajectory] = field(default=None, repr=False, compare=False)

    @property
    def success(self) -> bool:
        return self.failure_reason is None and self.verdict is not None and not self.verdict.failed

    @property
    def hr(self) -> float:
        return hr_at_10(self.verdict.score_lists) if self.verdict else 0.0

    @property
    def ndcg(self) -> float:
        return ndcg_at_10(self.verdict.score_lists) if self.verdict else 0.0

    def metric(self, name: str) -> float:
        return {"HR@10": self.hr, "NDCG@10": self.ndcg, "SR": float(self.success)}[name]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "query_id": self.query_id,
            "difficulty": self.difficulty,
            "scenario": self.scenario,
            "success": self.success,
            "failure_reason": self.failure_reason,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "error": self.error,
            "prompt_mode": self.prompt_mode,
            "phases": self.phases,
            "planner_subtasks": self.planner_subtasks,
            "attempts": self.attempts,
            "HR@10": self.hr,
            "NDCG@10": self.ndcg,
            "tokens": self.tokens,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QueryOutcome":
        verdict = data.get("verdict")
        return cls(
            query_id=data["query_id"],
            difficulty=data["difficulty"],
            scenario=data["scenario"],
            failure_reason=data.get("failure_reason"),
            verdict=SimVerdict.from_dict(verdict) if verdict else None,
            error=data.get("error", ""),
            prompt_mode=data.get("prompt_mode", "none"),
            phases=int(data.get("phases", 0)),
            planner_subtasks=int(data.get("planner_subtasks", 0)),
            attempts=int(data.get("attempts", 1)),
            tokens=data.get("tokens", {}),
        )


def aggregate(outcomes: List[QueryOutcome]) -> Dict[str, float]:
    return {
        "HR@10": sum(o.hr for o in outcomes) / len(outcomes),
        "NDCG@10": sum(o.ndcg for o in outcomes) / len(outcomes),
        "SR": success_rate(o.success for o in outcomes),
        "n": len(outcomes),
    }


@dataclass
class RunReport:
    strategy: str
    ablations: List[str]
    novel_tags: List[str]
    seed: int
    outcomes: List[QueryOutcome]
    store_ids: List[str] = field(default_factory=list)
    store_sources: List[str] = field(default_factory=list)
    ledger: Dict[str, Any] = field(default_factory=dict)

    @property
    def overall(self) -> Dict[str, float]:
        return aggregate(self.outcomes)

    @property
    def per_difficulty(self) -> Dict[str, Dict[str, float]]:
        result = {}
        for difficulty in Difficulty:
            subset = [o for o in self.outcomes if o.difficulty == difficulty.value]
            if subset:
                result[difficulty.value] = aggregate(subset)
        return result

    @property
    def per_scenario_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for o in self.outcomes:
            counts[o.scenario] = counts.get(o.scenario, 0) + 1
        return dict(sorted(counts.items()))

    def outcome(self, query_id: str) -> QueryOutcome:
        for o in self.outcomes:
            if o.query_id == query_id:
                return o
        raise EvaluationError(f"no outcome for query '{query_id}'")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config": {
                "strategy": self.strategy,
                "ablations": list(self.ablations),
                "novel_tags": list(self.novel_tags),
                "seed": self.seed,
            },
            "overall": self.overall,
            "per_difficulty": self.per_difficulty,
            "per_scenario_counts": self.per_scenario_counts,
            "store": {"ids": list(self.store_ids), "sources": list(self.store_sources)},
            "ledger": self.ledger,
            "outcomes": [o.to_dict() for o in self.outcomes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunReport":
        config = data.get("config", {})
        store = data.get("store", {})
        return cls(
            strategy=config.get("strategy", ""),
            ablations=list(config.get("ablations", [])),
            novel_tags=list(config.get("novel_tags", [])),
            seed=int(config.get("seed", 0)),
            outcomes=[QueryOutcome.from_dict(o) for o in data.get("outcomes", [])],
            store_ids=list(store.get("ids", [])),
            store_sources=list(store.get("sources", [])),
            ledger=data.get("ledger", {}),
        )


def prepare_store(store: ThoughtStore, ablations: Iterable[str] = (),
                  novel_tags: Iterable[str] = ()) -> ThoughtStore:
    """
    Reduce the pattern store for an experiment.

    E keeps only agent-sourced patterns; A keeps only expert-sourced ones.
    Every novel tag removes that scenario's patterns.
    """
    ablations = {a.upper() for a in ablations}
    if {"E", "A"} <= ablations:
        raise EvaluationError("ablations E and A together leave no patterns")
    for tag in sorted(set(novel_tags)):
        store = store.remove_by_scenario(tag)
    if "E" in ablations:
        store = store.filter_sources([PatternSource.AGENT_SUCCESS])
    elif "A" in ablations:
        store = store.filter_sources(EXPERT_SOURCES)
    return store


def _planner_subtasks(result: SessionResult) -> int:
    return sum(1 for plan in result.trajectory.plans
               for task in plan.sub_tasks if task.agent is AgentKind.PLANNER)


class VerdictCache:
    """
    Verdicts of responses already judged during a session.

    Entries hold the response itself and match by identity, so a later
    attempt never picks up an earlier attempt's verdict.
    """

    def __init__(self):
        self._entries: List[Tuple[Any, SimVerdict]] = []

    def record(self, response: Any, verdict: SimVerdict) -> None:
        self._entries.append((response, verdict))

    def lookup(self, response: Any) -> Optional[SimVerdict]:
        for judged, verdict in reversed(self._entries):
            if judged is response:
                return verdict
        return None


def evaluate_query(spec: QuerySpec, strategy: PlannerStrategy, deps: SessionDeps,
                   run_ledger: TokenLedger) -> QueryOutcome:
    """One query: session, then judge. Never raises."""
    ledger = run_ledger.child()
    llm = deps.llm.with_ledger(ledger)
    deps = deps.with_llm(llm)
    outcome = QueryOutcome(spec.query_id, spec.difficulty, spec.scenario)
    verdicts = VerdictCache()

    def feedback(result: SessionResult):
        verdict = judge(spec, result.response, deps.catalog, llm)
        verdicts.record(result.response, verdict)
        return not verdict.failed, verdict.reason or "the simulated user rejected the lists"

    start = time.perf_counter()
    try:
        result = run_session(spec.query_text, strategy, deps, feedback=feedback,
                             scenario_tag=spec.scenario)
        trajectory = result.trajectory
        outcome.trajectory = trajectory
        outcome.prompt_mode = trajectory.prompt_mode
        outcome.phases = trajectory.phases
        outcome.attempts = trajectory.attempts
        outcome.planner_subtasks = _planner_subtasks(result)
        if result.succeeded:
            outcome.verdict = verdicts.lookup(result.response) or judge(
                spec, result.response, deps.catalog, llm)
        else:
            outcome.failure_reason = result.failure_reason.value
            outcome.error = trajectory.failure_detail
    except Exception as exc:  # per-query errors become outcomes
        logger.warning("query %s raised %s: %s", spec.query_id, type(exc).__name__, exc)
        outcome.verdict = None
        outcome.failure_reason = FailureReason.EXECUTOR_FAILURE.value
        outcome.error = f"{type(exc).__name__}: {exc}"
    outcome.latency = time.perf_counter() - start
    outcome.tokens = ledger.to_dict(include_latency=False)["total"]
    return outcome


def run_experiment(
    suite: List[QuerySpec],
    strategy: PlannerStrategy,
    deps: SessionDeps,
    ablations: Iterable[str] = (),
    novel_tags: Iterable[str] = (),
    parallelism: int = 4,
    seed: int = 0,
    ledger: Optional[TokenLedger] = None,
) -> RunReport:
    """
    Evaluate a suite.

    Parameters
    ----------
    suite : list of QuerySpec
        Queries with unique ids
    strategy : PlannerStrategy
        Base strategy; T / H ablations are applied to it
    deps : SessionDeps
        Shared dependencies; the store is reduced for E / A and novel tags
    ablations : iterable of str
        Subset of {T, H, E, A}
    novel_tags : iterable of str
        Scenarios whose patterns are removed
    parallelism : int
        Concurrent sessions
    seed : int
        Echoed in the report

    Returns
    -------
    RunReport
        Outcomes sorted by query id
    """
    if not suite:
        raise EvaluationError("empty query suite")
    if parallelism < 1:
        raise EvaluationError("parallelism must be >= 1")
    ids = [s.query_id for s in suite]
    if len(set(ids)) != len(ids):
        raise EvaluationError("query ids in the suite are not unique")

    ablations = sorted({a.upper() for a in ablations})
    novel_tags = sorted(set(novel_tags))
    strategy = strategy.ablated(ablations)
    store = prepare_store(deps.store, ablations, novel_tags)
    deps = deps.with_store(store)
    run_ledger = ledger or TokenLedger()

    logger.info("evaluating %d queries with %s (ablations=%s, novel=%s)",
                len(suite), strategy.kind.value, ablations, novel_tags)
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        outcomes = list(pool.map(lambda s: evaluate_query(s, strategy, deps, run_ledger), suite))

    outcomes.sort(key=lambda o: o.query_id)
    return RunReport(
        strategy=strategy.kind.value,
        ablations=ablations,
        novel_tags=novel_tags,
        seed=seed,
        outcomes=outcomes,
        store_ids=store.ids,
        store_sources=store.sources,
        ledger=run_ledger.to_dict(include_latency=False),
    )
