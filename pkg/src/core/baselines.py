"""
ReAct and Reflexion Baselines

Step-wise Thought/Action/Observation agents that call the same executors as
the Manager agent but plan one action at a time. Reflexion wraps ReAct: when
an attempt fails it writes a self-reflection and tries again with the
reflection in context.
"""

import logging
from typing import Any, Callable, List, Optional, Tuple

from ..errors import ExecutorFailure, PlanValidationError, SessionFailure
from ..llm.gateway import CallTag, ChatRequest
from ..llm.prompts import agents_instruction, render
from .executors import (
    RecommendationResponse,
    format_attributes,
    format_ranked,
    interactor,
    item_retriever,
    searcher,
)
from .plans import AgentKind, FailureReason, TaskHistory, TaskRecord, Trajectory, agent_from_name
from .session import SESSION_ERRORS, SessionDeps, SessionResult, failure_for

logger = logging.getLogger(__name__)

REACT_AGENTS = (AgentKind.SEARCHER, AgentKind.ITEM_RETRIEVER, AgentKind.INTERACTOR)

FeedbackFn = Callable[[SessionResult], Tuple[bool, str]]


def _is_step(value: Any) -> bool:
    if not isinstance(value, dict):
        return False
    action = value.get("action")
    return (
        isinstance(action, dict)
        and isinstance(action.get("agent"), str)
        and isinstance(action.get("input"), str)
    )


def _is_reflection(value: Any) -> bool:
    return isinstance(value, dict) and isinstance(value.get("reflection"), str)


class ReActAgent:
    """One ReAct attempt; ``run`` returns the response or raises a session error."""

    def __init__(self, deps: SessionDeps, max_steps: int = 8):
        if max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        self.deps = deps
        self.max_steps = max_steps
        self.scratchpad: List[str] = []

    def _act(self, agent: AgentKind, action_input: str, step: int,
             history: TaskHistory) -> Tuple[str, Optional[RecommendationResponse]]:
        deps = self.deps
        if agent is AgentKind.SEARCHER:
            attributes = searcher(action_input, deps.search_client, deps.retriever, deps.llm)
            output = format_attributes(attributes)
            history.append(TaskRecord(action_input, agent, action_input, output, step,
                                      attributes=attributes))
            return output, None
        if agent is AgentKind.ITEM_RETRIEVER:
            ranked = item_retriever(action_input, deps.catalog, deps.retriever, deps.llm,
                                    domain_noun=deps.domain_noun)
            output = format_ranked(ranked, deps.catalog)
            history.append(TaskRecord(action_input, agent, action_input, output, step,
                                      item_ids=ranked.item_ids))
            return output, None
        response = interactor(history, action_input, deps.llm, deps.catalog)
        output = f"{len(response.lists)} list(s) returned to the user"
        history.append(TaskRecord(action_input, agent, action_input, output, step))
        return output, response

    def run(self, query: str, trajectory: Trajectory, attempt: int,
            reflection: str = "") -> RecommendationResponse:
        deps = self.deps
        history = TaskHistory()
        trajectory.history = history
        self.scratchpad = []
        system = render("react_system", agents_instruction=agents_instruction(False))

        for step in range(self.max_steps):
            request = ChatRequest(
                system_prompt=system,
                user_prompt=render("react_user", reflection=reflection, query=query,
                                   scratchpad="\n".join(self.scratchpad) or "(empty)"),
                tag=CallTag.PLAN,
            )
            value = deps.llm.complete_json(request, _is_step)
            thought = str(value.get("thought", "")).strip()
            action = value["action"]
            try:
                agent = agent_from_name(action["agent"])
            except PlanValidationError as exc:
                raise SessionFailure(FailureReason.EXECUTOR_FAILURE, str(exc)) from None
            if agent not in REACT_AGENTS:
                raise SessionFailure(FailureReason.EXECUTOR_FAILURE,
                                     f"{agent.wire_name} cannot be called from a ReAct step")

            try:
                observation, response = self._act(agent, action["input"].strip(), step, history)
            except ExecutorFailure as exc:
                observation, response = f"Error: {exc}", None
                logger.info("react step %d: %s failed: %s", step, agent.wire_name, exc)

            trajectory.steps.append({
                "attempt": attempt,
                "step": step,
                "thought": thought,
                "agent": agent.wire_name,
                "input": action["input"],
                "observation": observation,
            })
            self.scratchpad.extend([
                f"Thought {step + 1}: {thought}",
                f"Action {step + 1}: {agent.wire_name}[{action['input']}]",
                f"Observation {step + 1}: {observation}",
            ])
            if response is not None:
                return response

        raise SessionFailure(FailureReason.ITERATION_THRESHOLD,
                             f"no InteractorAgent call within {self.max_steps} steps")


def reflect(query: str, scratchpad: List[str], feedback: str, deps: SessionDeps) -> str:
    """Self-reflection on a failed attempt."""
    request = ChatRequest(
        system_prompt=render("reflection_system"),
        user_prompt=render("reflection_user", query=query,
                           scratchpad="\n".join(scratchpad) or "(empty)", feedback=feedback),
        tag=CallTag.REPLAN,
    )
    return deps.llm.complete_json(request, _is_reflection)["reflection"].strip()


def run_react(
    query: str,
    deps: SessionDeps,
    max_steps: int = 8,
    reflexion: bool = False,
    feedback: Optional[FeedbackFn] = None,
    max_reflections: int = 1,
    scenario_tag: Optional[str] = None,
) -> SessionResult:
    """
    Run ReAct, or Reflexion when ``reflexion`` is set.

    Reflexion retries after a failed attempt: either the session failed or
    ``feedback`` judged the response a failure. Without ``feedback`` only
    session failures trigger a reflection.
    """
    strategy = "Reflexion" if reflexion else "ReAct"
    trajectory = Trajectory(query=query, strategy=strategy, scenario_tag=scenario_tag)
    budget = 1 + (max(0, max_reflections) if reflexion else 0)
    reflection = ""

    for attempt in range(1, budget + 1):
        trajectory.attempts = attempt
        trajectory.failure_reason = None
        trajectory.failure_detail = ""
        agent = ReActAgent(deps, max_steps)
        try:
            response = agent.run(query, trajectory, attempt, reflection)
            result = SessionResult(response=response, trajectory=trajectory)
        except SESSION_ERRORS as exc:
            reason = failure_for(exc)
            trajectory.failure_reason = reason.value
            trajectory.failure_detail = str(exc)
            logger.info("%s attempt %d failed (%s): %s", strategy, attempt, reason.value, exc)
            result = SessionResult(response=None, trajectory=trajectory, failure_reason=reason)

        if attempt == budget:
            return result
        if result.succeeded:
            if feedback is None:
                return result
            ok, verdict = feedback(result)
            if ok:
                return result
        else:
            verdict = f"the attempt failed ({result.failure_reason.value}): {trajectory.failure_detail}"

        try:
            reflection = reflect(query, agent.scratchpad, verdict, deps)
        except SESSION_ERRORS as exc:
            logger.warning("reflection failed: %s", exc)
            return result
        trajectory.reflections.append(reflection)

    return result
