"""
Unit tests for plan parsing, task history and trajectories.
"""

import random

import pytest

from src.core.plans import (
    AgentKind,
    Plan,
    SubTaskStatus,
    TaskHistory,
    TaskRecord,
    Trajectory,
    agent_from_name,
    parse_plan,
)
from src.errors import PlanValidationError
from src.llm.prompts import (
    CORRECTIVE_PLAN_MARKER,
    NOVEL_GUIDANCE_MARKER,
    agents_instruction,
    render,
    render_guidance,
)


def _plan(*agents):
    return {
        "user_input": "q",
        "main_task": "m",
        "sub_tasks": {f"task_{i}": {"content": f"do {i}", "agent": a}
                      for i, a in enumerate(agents, start=1)},
    }


NON_TERMINAL_NAMES = ("SearcherAgent", "ItemRetrievalAgent", "searcher")
TERMINAL_NAMES = ("InteractorAgent", "PlannerAgent")
UNPLANNABLE_NAMES = ("TaskInterpreter", "WizardAgent", "")


def _random_plan_json(rng, allow_planner):
    """A well-formed plan, sometimes broken by one or two mutations."""
    terminal = rng.choice(TERMINAL_NAMES if allow_planner else TERMINAL_NAMES[:1])
    agents = [rng.choice(NON_TERMINAL_NAMES) for _ in range(rng.randint(0, 4))] + [terminal]
    start = rng.randint(1, 3)
    tasks = [[f"task_{start + n}", f"step {n}", agent] for n, agent in enumerate(agents)]

    for _ in range(rng.choice((0, 0, 1, 2))):
        task = rng.choice(tasks)
        kind = rng.randrange(7)
        if kind == 0:
            task[2] = rng.choice(UNPLANNABLE_NAMES)
        elif kind == 1:
            task[2] = rng.choice(TERMINAL_NAMES)
        elif kind == 2:
            task[1] = rng.choice(("", "   "))
        elif kind == 3:
            task[0] = rng.choice(("step_1", "task_x", "Task_1"))
        elif kind == 4:
            task[0] = "task_0" + task[0].split("_")[1]
        elif kind == 5:
            rng.shuffle(tasks)
            for n, other in enumerate(tasks):
                other[0] = f"task_{start + n}"
        else:
            tasks = tasks[:-1]
            if not tasks:
                break

    if rng.random() < 0.02:
        return ["not", "a", "plan"]
    return {
        "user_input": "q",
        "main_task": "m",
        "sub_tasks": {key: {"content": content, "agent": agent} for key, content, agent in tasks},
    }


def _plan_is_valid(data, allow_planner):
    """Validity decided from the raw JSON alone."""
    if not isinstance(data, dict) or not data["sub_tasks"]:
        return False
    numbered = []
    for key, value in data["sub_tasks"].items():
        parts = key.split("_")
        if len(parts) != 2 or parts[0] != "task" or not parts[1].isdigit():
            return False
        if not value["content"].strip():
            return False
        if value["agent"] not in NON_TERMINAL_NAMES + TERMINAL_NAMES:
            return False
        numbered.append((int(parts[1]), value["agent"]))
    if len({n for n, _ in numbered}) != len(numbered):
        return False
    agents = [agent for _, agent in sorted(numbered)]
    if sum(1 for agent in agents if agent in TERMINAL_NAMES) != 1:
        return False
    if agents[-1] not in TERMINAL_NAMES:
        return False
    return allow_planner or agents[-1] != "PlannerAgent"


class TestAgentNames:
    """Tests for agent name resolution."""

    def test_wire_and_internal_names(self):
        assert agent_from_name("ItemRetrievalAgent") is AgentKind.ITEM_RETRIEVER
        assert agent_from_name("item_retriever") is AgentKind.ITEM_RETRIEVER
        assert agent_from_name("searcher agent") is AgentKind.SEARCHER

    def test_unknown(self):
        with pytest.raises(PlanValidationError):
            agent_from_name("CritiqueAgent")


class TestParsePlan:
    """Tests for plan validation."""

    def test_valid_plan(self):
        plan = parse_plan(_plan("SearcherAgent", "ItemRetrievalAgent", "InteractorAgent"), phase=0)
        assert [t.agent for t in plan.sub_tasks] == [
            AgentKind.SEARCHER, AgentKind.ITEM_RETRIEVER, AgentKind.INTERACTOR]
        assert not plan.ends_with_planner

    def test_tasks_sorted_numerically(self):
        data = {"sub_tasks": {
            "task_10": {"content": "last", "agent": "InteractorAgent"},
            "task_2": {"content": "first", "agent": "ItemRetrievalAgent"},
        }}
        plan = parse_plan(data, phase=1)
        assert [t.index for t in plan.sub_tasks] == [2, 10]
        assert plan.phase == 1

    def test_terminal_not_last(self):
        with pytest.raises(PlanValidationError, match="last sub-task"):
            parse_plan(_plan("PlannerAgent", "SearcherAgent"), phase=0)

    def test_two_terminals(self):
        with pytest.raises(PlanValidationError, match="exactly once"):
            parse_plan(_plan("SearcherAgent", "PlannerAgent", "InteractorAgent"), phase=0)

    def test_no_terminal(self):
        with pytest.raises(PlanValidationError, match="exactly once"):
            parse_plan(_plan("SearcherAgent"), phase=0)

    def test_planner_not_allowed(self):
        with pytest.raises(PlanValidationError, match="not available"):
            parse_plan(_plan("SearcherAgent", "PlannerAgent"), phase=0, allow_planner=False)

    def test_interpreter_cannot_be_planned(self):
        with pytest.raises(PlanValidationError, match="cannot be planned"):
            parse_plan(_plan("TaskInterpreter", "InteractorAgent"), phase=0)

    def test_bad_key_and_content(self):
        with pytest.raises(PlanValidationError, match="task_N"):
            parse_plan({"sub_tasks": {"step1": {"content": "x", "agent": "InteractorAgent"}}}, 0)
        with pytest.raises(PlanValidationError, match="empty content"):
            parse_plan({"sub_tasks": {"task_1": {"content": " ", "agent": "InteractorAgent"}}}, 0)

    def test_empty_plan(self):
        with pytest.raises(PlanValidationError):
            parse_plan({"sub_tasks": {}}, 0)
        with pytest.raises(PlanValidationError):
            parse_plan(["not", "a", "dict"], 0)

    def test_plan_dict_keeps_status(self):
        plan = parse_plan(_plan("SearcherAgent", "PlannerAgent"), phase=2)
        plan.sub_tasks[0].status = SubTaskStatus.DONE
        plan.sub_tasks[0].attempts = 2
        restored = Plan.from_dict(plan.to_dict())
        assert restored.phase == 2
        assert restored.sub_tasks[0].status is SubTaskStatus.DONE
        assert restored.sub_tasks[0].attempts == 2
        assert restored.ends_with_planner


class TestPlanValidity:
    """Randomised plan JSON: accepted plans always end in one terminal sub-task."""

    def test_random_plans(self):
        rng = random.Random(1234)
        accepted = rejected = 0
        for _ in range(1000):
            allow_planner = rng.random() < 0.7
            data = _random_plan_json(rng, allow_planner)
            expected = _plan_is_valid(data, allow_planner)
            try:
                plan = parse_plan(data, phase=0, allow_planner=allow_planner)
            except PlanValidationError:
                assert not expected, data
                rejected += 1
                continue
            assert expected, data
            accepted += 1

            agents = [t.agent for t in plan.sub_tasks]
            assert agents[-1] in (AgentKind.INTERACTOR, AgentKind.PLANNER)
            assert agents.count(AgentKind.INTERACTOR) + agents.count(AgentKind.PLANNER) == 1
            assert AgentKind.TASK_INTERPRETER not in agents
            indices = [t.index for t in plan.sub_tasks]
            assert indices == sorted(set(indices))
            assert all(t.content.strip() for t in plan.sub_tasks)
            if not allow_planner:
                assert not plan.ends_with_planner
        assert accepted > 100
        assert rejected > 100


class TestTaskHistory:
    """Tests for the append-only history."""

    def test_render_empty(self):
        assert TaskHistory().render() == "none"

    def test_retrieved_ids(self):
        history = TaskHistory()
        history.append(TaskRecord("s", AgentKind.SEARCHER, "q", "Attributes: A", 0))
        history.append(TaskRecord("r", AgentKind.ITEM_RETRIEVER, "q", "items", 0, item_ids=["a", "b"]))
        history.append(TaskRecord("r2", AgentKind.ITEM_RETRIEVER, "q", "items", 1, item_ids=["b", "c"]))
        assert history.retrieved_item_ids() == {"a", "b", "c"}
        assert history.last_output == "items"
        assert "Task 2 (phase 0) [ItemRetrievalAgent]: r" in history.render()


class TestTrajectory:
    """Tests for session trajectories."""

    def test_route_text(self):
        trajectory = Trajectory(query="q", strategy="TAIRA")
        trajectory.plans.append(parse_plan(_plan("ItemRetrievalAgent", "InteractorAgent"), 0))
        trajectory.history.append(TaskRecord("do 1", AgentKind.ITEM_RETRIEVER, "x", "items", 0))
        route = trajectory.render_route()
        assert route.startswith("User query: q")
        assert "task_1 [ItemRetrievalAgent]: do 1" in route
        assert route.endswith("Outcome: succeeded")

    def test_failed_route(self):
        trajectory = Trajectory(query="q", strategy="TAIRA", failure_reason="iteration_threshold")
        assert not trajectory.succeeded
        assert trajectory.render_route().endswith("failed (iteration_threshold)")

    def test_dict_restores_history(self):
        trajectory = Trajectory(query="q", strategy="ReAct", scenario_tag="bundle")
        trajectory.history.append(TaskRecord("c", AgentKind.SEARCHER, "i", "o", 0, attributes=["A"]))
        restored = Trajectory.from_dict(trajectory.to_dict())
        assert restored.scenario_tag == "bundle"
        assert restored.history.records[0].attributes == ["A"]


class TestPrompts:
    """Tests for prompt templates."""

    def test_planner_offered_only_when_hierarchical(self):
        assert "PlannerAgent" in agents_instruction(True)
        assert "PlannerAgent" not in agents_instruction(False)

    def test_novel_guidance_lists_solutions(self):
        text = render_guidance("novel", solutions=["first idea", "second idea"])
        assert "Solution description 1: first idea" in text
        assert "Solution description 2: second idea" in text
        assert NOVEL_GUIDANCE_MARKER in text

    def test_no_guidance(self):
        assert render_guidance("none") == ""

    def test_missing_variable_fails(self):
        with pytest.raises(Exception):
            render("plan_user", query="q")

    def test_corrective(self):
        text = render("plan_corrective", marker=CORRECTIVE_PLAN_MARKER, error="bad")
        assert "previous plan was invalid: bad" in text
