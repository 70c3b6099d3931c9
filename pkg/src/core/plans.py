"""
Plans Module

Plan, sub-task and task-history types of the Manager agent, the plan JSON
parser/validator, and the session trajectory written to run directories.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional

from ..errors import PlanValidationError


class AgentKind(str, Enum):
    """Agents a sub-task can be dispatched to."""
    SEARCHER = "Searcher"
    ITEM_RETRIEVER = "ItemRetriever"
    TASK_INTERPRETER = "TaskInterpreter"
    INTERACTOR = "Interactor"
    PLANNER = "Planner"

    @property
    def wire_name(self) -> str:
        return WIRE_NAMES.get(self, self.value)


WIRE_NAMES = {
    AgentKind.SEARCHER: "SearcherAgent",
    AgentKind.ITEM_RETRIEVER: "ItemRetrievalAgent",
    AgentKind.INTERACTOR: "InteractorAgent",
    AgentKind.PLANNER: "PlannerAgent",
}

TERMINAL_AGENTS = frozenset({AgentKind.PLANNER, AgentKind.INTERACTOR})
# Agents a plan may name; the Task Interpreter runs implicitly.
PLANNABLE_AGENTS = frozenset(WIRE_NAMES)

_ALIASES = {}
for _kind in AgentKind:
    _ALIASES[_kind.value.lower()] = _kind
    _ALIASES[_kind.wire_name.lower()] = _kind
_ALIASES["itemretrieveragent"] = AgentKind.ITEM_RETRIEVER
_ALIASES["itemretrieval"] = AgentKind.ITEM_RETRIEVER

_TASK_KEY = re.compile(r"^task_(\d+)$")


def agent_from_name(name: Any) -> AgentKind:
    """Resolve a wire or internal agent name (case-insensitive)."""
    if isinstance(name, AgentKind):
        return name
    key = re.sub(r"[\s_\-]", "", str(name)).lower()
    try:
        return _ALIASES[key]
    except KeyError:
        raise PlanValidationError(f"unknown agent '{name}'") from None


class SubTaskStatus(str, Enum):
    PENDING = "pending"
    DONE = "done"
    FAILED = "failed"


@dataclass
class SubTask:
    index: int
    content: str
    agent: AgentKind
    status: SubTaskStatus = SubTaskStatus.PENDING
    attempts: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "content": self.content,
            "agent": self.agent.wire_name,
            "status": self.status.value,
            "attempts": self.attempts,
        }


@dataclass
class Plan:
    """One phase of the Manager's plan (phase 0 is the initial plan)."""
    phase: int
    user_input: str
    main_task: str
    sub_tasks: List[SubTask]

    @property
    def terminal(self) -> SubTask:
        return self.sub_tasks[-1]

    @property
    def ends_with_planner(self) -> bool:
        return self.terminal.agent is AgentKind.PLANNER

    def to_dict(self) -> Dict[str, Any]:
        return {
            "phase": self.phase,
            "user_input": self.user_input,
            "main_task": self.main_task,
            "sub_tasks": {f"task_{t.index}": t.to_dict() for t in self.sub_tasks},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Plan":
        plan = parse_plan(data, phase=int(data.get("phase", 0)))
        for task in plan.sub_tasks:
            raw = data["sub_tasks"][f"task_{task.index}"]
            task.status = SubTaskStatus(raw.get("status", "pending"))
            task.attempts = int(raw.get("attempts", 0))
        return plan


def parse_plan(data: Any, phase: int, allow_planner: bool = True) -> Plan:
    """
    Validate plan JSON and build a Plan.

    Parameters
    ----------
    data : Any
        Decoded ``{"user_input", "main_task", "sub_tasks": {"task_N": {...}}}``
    phase : int
        Phase index to assign
    allow_planner : bool
        False when PlannerAgent is not offered (single-shot strategies)

    Returns
    -------
    Plan

    Raises
    ------
    PlanValidationError
        Empty plan, bad keys, unknown agents, or a terminal agent (Planner or
        Interactor) that is missing, repeated, or not last
    """
    if not isinstance(data, dict):
        raise PlanValidationError("plan must be a JSON object")
    raw_tasks = data.get("sub_tasks")
    if not isinstance(raw_tasks, dict) or not raw_tasks:
        raise PlanValidationError("plan has no sub_tasks")

    numbered = []
    for key, value in raw_tasks.items():
        match = _TASK_KEY.match(str(key))
        if not match:
            raise PlanValidationError(f"sub-task key '{key}' is not of the form task_N")
        if not isinstance(value, dict):
            raise PlanValidationError(f"{key} must be an object")
        content = value.get("content")
        if not isinstance(content, str) or not content.strip():
            raise PlanValidationError(f"{key} has empty content")
        agent = agent_from_name(value.get("agent", ""))
        if agent not in PLANNABLE_AGENTS:
            raise PlanValidationError(f"{key} names {agent.value}, which cannot be planned")
        numbered.append((int(match.group(1)), content.strip(), agent))
    numbered.sort(key=lambda t: t[0])

    if len({n for n, _, _ in numbered}) != len(numbered):
        raise PlanValidationError("duplicate sub-task numbers")

    terminals = [i for i, (_, _, agent) in enumerate(numbered) if agent in TERMINAL_AGENTS]
    if len(terminals) != 1:
        raise PlanValidationError(
            f"plan must use PlannerAgent or InteractorAgent exactly once, found {len(terminals)}"
        )
    if terminals[0] != len(numbered) - 1:
        raise PlanValidationError("PlannerAgent/InteractorAgent must be the last sub-task")
    if not allow_planner and numbered[-1][2] is AgentKind.PLANNER:
        raise PlanValidationError("PlannerAgent is not available; the plan must end with InteractorAgent")

    sub_tasks = [SubTask(index=n, content=c, agent=a) for n, c, a in numbered]
    return Plan(
        phase=phase,
        user_input=str(data.get("user_input", "")),
        main_task=str(data.get("main_task", "")),
        sub_tasks=sub_tasks,
    )


@dataclass
class TaskRecord:
    """One executed sub-task."""
    content: str
    agent: AgentKind
    interpreted_input: str
    output: str
    phase: int
    item_ids: List[str] = field(default_factory=list)
    attributes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "content": self.content,
            "agent": self.agent.wire_name,
            "interpreted_input": self.interpreted_input,
            "output": self.output,
            "phase": self.phase,
        }
        if self.item_ids:
            data["item_ids"] = list(self.item_ids)
        if self.attributes:
            data["attributes"] = list(self.attributes)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TaskRecord":
        return cls(
            content=data["content"],
            agent=agent_from_name(data["agent"]),
            interpreted_input=data.get("interpreted_input", ""),
            output=data.get("output", ""),
            phase=int(data.get("phase", 0)),
            item_ids=list(data.get("item_ids", [])),
            attributes=list(data.get("attributes", [])),
        )


class TaskHistory:
    """Append-only record of executed sub-tasks across phases."""

    def __init__(self, records: Optional[List[TaskRecord]] = None):
        self._records: List[TaskRecord] = list(records or [])

    def append(self, record: TaskRecord) -> None:
        self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TaskRecord]:
        return iter(self._records)

    @property
    def records(self) -> List[TaskRecord]:
        return list(self._records)

    @property
    def last_output(self) -> str:
        return self._records[-1].output if self._records else ""

    def retrieval_records(self) -> List[TaskRecord]:
        return [r for r in self._records if r.agent is AgentKind.ITEM_RETRIEVER]

    def retrieved_item_ids(self) -> set:
        ids = set()
        for record in self.retrieval_records():
            ids.update(record.item_ids)
        return ids

    def render(self) -> str:
        if not self._records:
            return "none"
        lines = []
        for n, r in enumerate(self._records, start=1):
            lines.append(f"Task {n} (phase {r.phase}) [{r.agent.wire_name}]: {r.content}")
            if r.interpreted_input:
                lines.append(f"  Input: {r.interpreted_input}")
            lines.append(f"  Output: {r.output}")
        return "\n".join(lines)

    def to_list(self) -> List[Dict[str, Any]]:
        return [r.to_dict() for r in self._records]

    @classmethod
    def from_list(cls, data: List[Dict[str, Any]]) -> "TaskHistory":
        return cls([TaskRecord.from_dict(d) for d in data])


class FailureReason(str, Enum):
    ITERATION_THRESHOLD = "iteration_threshold"
    MALFORMED_OUTPUT = "malformed_output"
    EXECUTOR_FAILURE = "executor_failure"


@dataclass
class Trajectory:
    """
    Everything a session did: plan snapshots per phase, the task history,
    the pattern match, and (for ReAct/Reflexion) the step log.
    """
    query: str
    strategy: str
    plans: List[Plan] = field(default_factory=list)
    history: TaskHistory = field(default_factory=TaskHistory)
    match: Optional[Dict[str, Any]] = None
    prompt_mode: str = "none"
    attempts: int = 1
    reflections: List[str] = field(default_factory=list)
    steps: List[Dict[str, Any]] = field(default_factory=list)
    failure_reason: Optional[str] = None
    failure_detail: str = ""
    scenario_tag: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return self.failure_reason is None

    @property
    def phases(self) -> int:
        return len(self.plans)

    def render_route(self) -> str:
        """Task route text fed to pattern distillation."""
        lines = [f"User query: {self.query}"]
        for plan in self.plans:
            lines.append(f"Phase {plan.phase + 1} plan: {plan.main_task}")
            for task in plan.sub_tasks:
                lines.append(f"  task_{task.index} [{task.agent.wire_name}]: {task.content}")
        if len(self.history):
            lines.append("Executed tasks:")
            lines.append(self.history.render())
        for n, reflection in enumerate(self.reflections, start=1):
            lines.append(f"Reflection {n}: {reflection}")
        outcome = "succeeded" if self.succeeded else f"failed ({self.failure_reason})"
        lines.append(f"Outcome: {outcome}")
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "query": self.query,
            "strategy": self.strategy,
            "prompt_mode": self.prompt_mode,
            "match": self.match,
            "plans": [p.to_dict() for p in self.plans],
            "history": self.history.to_list(),
            "attempts": self.attempts,
            "reflections": list(self.reflections),
            "steps": list(self.steps),
            "failure_reason": self.failure_reason,
            "failure_detail": self.failure_detail,
            "scenario_tag": self.scenario_tag,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Trajectory":
        return cls(
            query=data["query"],
            strategy=data.get("strategy", "taira"),
            plans=[Plan.from_dict(p) for p in data.get("plans", [])],
            history=TaskHistory.from_list(data.get("history", [])),
            match=data.get("match"),
            prompt_mode=data.get("prompt_mode", "none"),
            attempts=int(data.get("attempts", 1)),
            reflections=list(data.get("reflections", [])),
            steps=list(data.get("steps", [])),
            failure_reason=data.get("failure_reason"),
            failure_detail=data.get("failure_detail", ""),
            scenario_tag=data.get("scenario_tag"),
        )
