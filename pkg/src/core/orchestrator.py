"""
Orchestrator Module

The Manager agent: pattern matching, phased planning, sub-task dispatch
through the Task Interpreter, and the hierarchical replanning loop that ends
in an Interactor response or a recorded failure.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterable, Optional, Tuple

from ..errors import ExecutorFailure, PlanValidationError, SessionFailure
from ..llm.gateway import CallTag, ChatRequest
from ..llm.prompts import (
    CORRECTIVE_PLAN_MARKER,
    HISTORY_MARKER,
    agents_instruction,
    render,
    render_guidance,
)
from .baselines import FeedbackFn, run_react
from .executors import (
    format_attributes,
    format_ranked,
    interactor,
    interpret,
    item_retriever,
    searcher,
)
from .plans import (
    AgentKind,
    FailureReason,
    Plan,
    SubTask,
    SubTaskStatus,
    TaskHistory,
    TaskRecord,
    Trajectory,
    parse_plan,
)
from .session import SESSION_ERRORS, SessionDeps, SessionResult, failure_for
from .thought_store import MatchResult, match

logger = logging.getLogger(__name__)


class PlannerKind(str, Enum):
    TAIRA = "TAIRA"
    TAIRA_NO_T = "TAIRA_noT"
    TAIRA_NO_H = "TAIRA_noH"
    PLAN_AND_SOLVE = "PlanAndSolve"
    REACT = "ReAct"
    REFLEXION = "Reflexion"
    ZERO_SHOT = "ZeroShot"


CLI_STRATEGIES = {
    "taira": PlannerKind.TAIRA,
    "react": PlannerKind.REACT,
    "reflexion": PlannerKind.REFLEXION,
    "plan-solve": PlannerKind.PLAN_AND_SOLVE,
    "zero-shot": PlannerKind.ZERO_SHOT,
}

# Ablations that change the planner itself; E and A only change the store.
PLANNER_ABLATIONS = {"T": PlannerKind.TAIRA_NO_T, "H": PlannerKind.TAIRA_NO_H}
ABLATIONS = frozenset({"T", "H", "E", "A"})


@dataclass(frozen=True)
class PlannerStrategy:
    """One planner kind plus its per-kind parameters."""
    kind: PlannerKind = PlannerKind.TAIRA
    params: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_name(cls, name: str, **params) -> "PlannerStrategy":
        key = name.strip()
        if key.lower() in CLI_STRATEGIES:
            return cls(CLI_STRATEGIES[key.lower()], dict(params))
        try:
            return cls(PlannerKind(key), dict(params))
        except ValueError:
            raise PlanValidationError(
                f"unknown strategy '{name}'; choose from {sorted(CLI_STRATEGIES)}"
            ) from None

    @property
    def uses_matching(self) -> bool:
        return self.kind in (PlannerKind.TAIRA, PlannerKind.TAIRA_NO_H)

    @property
    def hierarchical(self) -> bool:
        return self.kind in (PlannerKind.TAIRA, PlannerKind.TAIRA_NO_T)

    @property
    def uses_react(self) -> bool:
        return self.kind in (PlannerKind.REACT, PlannerKind.REFLEXION)

    def ablated(self, ablations: Iterable[str]) -> "PlannerStrategy":
        """Apply the T / H ablations; E and A leave the planner unchanged."""
        ablations = {a.upper() for a in ablations}
        unknown = ablations - ABLATIONS
        if unknown:
            raise PlanValidationError(f"unknown ablation(s) {sorted(unknown)}")
        planner = ablations & set(PLANNER_ABLATIONS)
        if not planner:
            return self
        if len(planner) > 1:
            raise PlanValidationError("ablations T and H are evaluated one at a time")
        if self.kind is not PlannerKind.TAIRA:
            raise PlanValidationError(f"ablation {planner.pop()} only applies to the TAIRA strategy")
        return replace(self, kind=PLANNER_ABLATIONS[planner.pop()])

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "params": dict(self.params)}


def _is_object(value: Any) -> bool:
    return isinstance(value, dict)


class ManagerAgent:
    """
    Plans and replans for one session.

    Parameters
    ----------
    deps : SessionDeps
        Store, catalog, retriever, search client and gateway
    strategy : PlannerStrategy
        A plan-based kind (TAIRA, its T/H ablations, Plan&Solve, ZeroShot)
    """

    def __init__(self, deps: SessionDeps, strategy: PlannerStrategy):
        if strategy.uses_react:
            raise PlanValidationError(f"{strategy.kind.value} is not a plan-based strategy")
        self.deps = deps
        self.strategy = strategy
        self.with_planner = strategy.hierarchical

    # -- guidance -------------------------------------------------------------

    def guidance(self, match_result: Optional[MatchResult]) -> Tuple[str, str]:
        """(mode, rendered block) for a match result."""
        if match_result is None:
            return "none", ""
        store = self.deps.store
        if match_result.is_matched:
            pattern = store.get(match_result.pattern_id)
            return "matched", render_guidance("matched", pattern=pattern)
        nearest = [store.get(pid) for pid in match_result.nearest_ids if pid in store]
        if not nearest:
            return "none", ""
        return "novel", render_guidance("novel", solutions=[p.solution_description for p in nearest])

    # -- planning -------------------------------------------------------------

    def _request_plan(self, request: ChatRequest, phase: int) -> Plan:
        value = self.deps.llm.complete_json(request, _is_object)
        try:
            return parse_plan(value, phase, allow_planner=self.with_planner)
        except PlanValidationError as exc:
            logger.info("plan rejected (%s); sending one corrective re-prompt", exc)
            corrective = replace(
                request,
                user_prompt=request.user_prompt
                + render("plan_corrective", marker=CORRECTIVE_PLAN_MARKER, error=str(exc)),
            )
            value = self.deps.llm.complete_json(corrective, _is_object)
            return parse_plan(value, phase, allow_planner=self.with_planner)

    def _shared_context(self, query: str, match_result: Optional[MatchResult]) -> Dict[str, Any]:
        _, guidance = self.guidance(match_result)
        return {
            "query": query,
            "agents_instruction": agents_instruction(self.with_planner),
            "plan_format": render("plan_format", query=query),
            "terminal_rule": render("terminal_rule", with_planner=self.with_planner),
            "guidance": guidance,
        }

    def plan_initial(self, query: str, match_result: Optional[MatchResult] = None) -> Plan:
        """Phase-0 plan, guided by the matched pattern or the nearest solutions."""
        context = self._shared_context(query, match_result)
        template = "plan_and_solve_user" if self.strategy.kind is PlannerKind.PLAN_AND_SOLVE else "plan_user"
        if template == "plan_and_solve_user":
            context.pop("guidance")
        request = ChatRequest(
            system_prompt=render("manager_system"),
            user_prompt=render(template, **context),
            tag=CallTag.PLAN,
        )
        return self._request_plan(request, phase=0)

    def replan(self, plan: Plan, history: TaskHistory, query: str,
               match_result: Optional[MatchResult] = None) -> Plan:
        """
        Next-phase plan from the previous plan and the task history.

        Raises
        ------
        PlanValidationError
            When ``plan`` does not end in PlannerAgent or has unfinished sub-tasks
        SessionFailure
            With reason iteration_threshold when the phase cap is reached
        """
        if not plan.ends_with_planner:
            raise PlanValidationError("replan requires a plan whose last sub-task is PlannerAgent")
        if any(t.status is not SubTaskStatus.DONE for t in plan.sub_tasks[:-1]):
            raise PlanValidationError("replan requires every earlier sub-task to be done")
        if plan.phase + 1 >= self.deps.max_phases:
            raise SessionFailure(
                FailureReason.ITERATION_THRESHOLD,
                f"phase {plan.phase + 1} would exceed max_phases={self.deps.max_phases}",
            )
        context = self._shared_context(query, match_result)
        context.update(history=history.render(), goal=plan.terminal.content,
                       history_marker=HISTORY_MARKER)
        request = ChatRequest(
            system_prompt=render("manager_system"),
            user_prompt=render("replan_user", **context),
            tag=CallTag.REPLAN,
        )
        return self._request_plan(request, phase=plan.phase + 1)

    # -- execution ------------------------------------------------------------

    def execute_subtask(self, task: SubTask, phase: int, history: TaskHistory) -> TaskRecord:
        """Interpret and run one Searcher / ItemRetriever sub-task, retrying in place."""
        deps = self.deps
        last_error: Optional[Exception] = None
        while task.attempts < deps.retry_limit:
            task.attempts += 1
            try:
                query = interpret(task.content, history, task.agent, deps.llm, self.with_planner)
                if task.agent is AgentKind.SEARCHER:
                    attributes = searcher(query, deps.search_client, deps.retriever, deps.llm)
                    record = TaskRecord(task.content, task.agent, query,
                                        format_attributes(attributes), phase,
                                        attributes=attributes)
                elif task.agent is AgentKind.ITEM_RETRIEVER:
                    ranked = item_retriever(query, deps.catalog, deps.retriever, deps.llm,
                                            domain_noun=deps.domain_noun)
                    record = TaskRecord(task.content, task.agent, query,
                                        format_ranked(ranked, deps.catalog), phase,
                                        item_ids=ranked.item_ids)
                else:
                    raise ExecutorFailure(f"{task.agent.value} cannot run as an intermediate sub-task")
            except ExecutorFailure as exc:
                last_error = exc
                logger.warning("task_%d (%s) attempt %d/%d failed: %s", task.index,
                               task.agent.value, task.attempts, deps.retry_limit, exc)
                continue
            task.status = SubTaskStatus.DONE
            history.append(record)
            return record

        task.status = SubTaskStatus.FAILED
        raise SessionFailure(
            FailureReason.EXECUTOR_FAILURE,
            f"task_{task.index} failed after {task.attempts} attempt(s): {last_error}",
        )

    def run(self, query: str, trajectory: Trajectory) -> SessionResult:
        deps = self.deps
        match_result = None
        if self.strategy.uses_matching:
            match_result = match(query, deps.store, deps.top_k, deps.llm)
            trajectory.match = match_result.to_dict()
        trajectory.prompt_mode = self.guidance(match_result)[0] if self.strategy.kind is not PlannerKind.PLAN_AND_SOLVE else "none"

        history = trajectory.history
        plan = self.plan_initial(query, match_result)
        while True:
            trajectory.plans.append(plan)
            for task in plan.sub_tasks[:-1]:
                self.execute_subtask(task, plan.phase, history)

            terminal = plan.terminal
            terminal.attempts += 1
            if terminal.agent is AgentKind.INTERACTOR:
                response = interactor(history, terminal.content, deps.llm, deps.catalog)
                terminal.status = SubTaskStatus.DONE
                labels = "; ".join(rec.label for rec in response.lists)
                history.append(TaskRecord(terminal.content, terminal.agent, terminal.content,
                                          f"{len(response.lists)} list(s): {labels}", plan.phase))
                return SessionResult(response=response, trajectory=trajectory)

            terminal.status = SubTaskStatus.DONE
            history.append(TaskRecord(terminal.content, terminal.agent, terminal.content,
                                      "re-plan requested", plan.phase))
            plan = self.replan(plan, history, query, match_result)


def run_session(
    query: str,
    strategy: PlannerStrategy,
    deps: SessionDeps,
    feedback: Optional[FeedbackFn] = None,
    scenario_tag: Optional[str] = None,
) -> SessionResult:
    """
    Run one query to a response or a recorded failure reason.

    Parameters
    ----------
    query : str
        User query
    strategy : PlannerStrategy
        Planner kind for this session
    deps : SessionDeps
        Shared dependencies
    feedback : callable, optional
        Judge used by Reflexion to decide whether to reflect and retry
    scenario_tag : str, optional
        Scenario of the query, carried into the trajectory

    Returns
    -------
    SessionResult
        Never raises for session-level errors
    """
    if strategy.uses_react:
        return run_react(
            query, deps,
            max_steps=int(strategy.params.get("max_steps", deps.react_max_steps)),
            reflexion=strategy.kind is PlannerKind.REFLEXION,
            feedback=feedback,
            max_reflections=int(strategy.params.get("max_reflections",
                                                    deps.reflexion_max_reflections)),
            scenario_tag=scenario_tag,
        )

    trajectory = Trajectory(query=query, strategy=strategy.kind.value, scenario_tag=scenario_tag)
    try:
        return ManagerAgent(deps, strategy).run(query, trajectory)
    except SESSION_ERRORS as exc:
        reason = failure_for(exc)
        trajectory.failure_reason = reason.value
        trajectory.failure_detail = str(exc)
        logger.info("session failed (%s): %s", reason.value, exc)
        return SessionResult(response=None, trajectory=trajectory, failure_reason=reason)
