"""
Unit tests for planner strategies, the Manager agent and run_session.
"""

import pytest

from src.core.orchestrator import ManagerAgent, PlannerKind, PlannerStrategy, run_session
from src.core.plans import AgentKind, FailureReason, SubTaskStatus, TaskHistory, Trajectory, parse_plan
from src.core.thought_store import MatchResult, ThoughtStore
from src.errors import PlanValidationError, SessionFailure
from src.llm.providers import ScriptedProvider

from tests.conftest import GATHERING_QUERY, SLEEPOVER_QUERY, WEEKEND_QUERY

CASUAL = [f"C{i:02d}" for i in range(1, 11)]
SEMI = [f"S{i:02d}" for i in range(1, 11)]


class TestPlannerStrategy:
    """Tests for strategy names and ablations."""

    def test_cli_names(self):
        assert PlannerStrategy.from_name("plan-solve").kind is PlannerKind.PLAN_AND_SOLVE
        assert PlannerStrategy.from_name("TAIRA_noH").kind is PlannerKind.TAIRA_NO_H

    def test_unknown_name(self):
        with pytest.raises(PlanValidationError, match="unknown strategy"):
            PlannerStrategy.from_name("tree-of-thought")

    def test_flags(self):
        taira = PlannerStrategy()
        assert taira.uses_matching and taira.hierarchical
        no_t = taira.ablated(["T"])
        assert no_t.kind is PlannerKind.TAIRA_NO_T
        assert not no_t.uses_matching and no_t.hierarchical
        no_h = taira.ablated(["h"])
        assert no_h.uses_matching and not no_h.hierarchical
        assert PlannerStrategy.from_name("react").uses_react

    def test_store_ablations_keep_planner(self):
        assert PlannerStrategy().ablated(["E"]).kind is PlannerKind.TAIRA

    def test_t_and_h_together(self):
        with pytest.raises(PlanValidationError, match="one at a time"):
            PlannerStrategy().ablated(["T", "H"])

    def test_planner_ablation_on_baseline(self):
        with pytest.raises(PlanValidationError, match="only applies"):
            PlannerStrategy.from_name("react").ablated(["T"])

    def test_unknown_ablation(self):
        with pytest.raises(PlanValidationError):
            PlannerStrategy().ablated(["Z"])


class TestManagerAgent:
    """Tests for planning and replanning."""

    def test_rejects_react(self, make_deps):
        with pytest.raises(PlanValidationError):
            ManagerAgent(make_deps(), PlannerStrategy.from_name("react"))

    def test_replan_needs_planner_terminal(self, make_deps):
        manager = ManagerAgent(make_deps(), PlannerStrategy())
        plan = parse_plan({"sub_tasks": {"task_1": {"content": "x", "agent": "InteractorAgent"}}}, 0)
        with pytest.raises(PlanValidationError, match="PlannerAgent"):
            manager.replan(plan, TaskHistory(), GATHERING_QUERY)

    def test_replan_needs_done_subtasks(self, make_deps):
        manager = ManagerAgent(make_deps(), PlannerStrategy())
        plan = parse_plan({"sub_tasks": {
            "task_1": {"content": "search", "agent": "SearcherAgent"},
            "task_2": {"content": "plan", "agent": "PlannerAgent"},
        }}, 0)
        with pytest.raises(PlanValidationError, match="done"):
            manager.replan(plan, TaskHistory(), GATHERING_QUERY)
        plan.sub_tasks[0].status = SubTaskStatus.DONE
        assert manager.replan(plan, TaskHistory(), GATHERING_QUERY).phase == 1

    def test_replan_at_phase_cap(self, make_deps):
        manager = ManagerAgent(make_deps(max_phases=2), PlannerStrategy())
        plan = parse_plan({"sub_tasks": {"task_1": {"content": "plan", "agent": "PlannerAgent"}}}, 1)
        with pytest.raises(SessionFailure) as info:
            manager.replan(plan, TaskHistory(), GATHERING_QUERY)
        assert info.value.reason is FailureReason.ITERATION_THRESHOLD

    def test_guidance_modes(self, make_deps):
        deps = make_deps()
        manager = ManagerAgent(deps, PlannerStrategy())
        assert manager.guidance(None) == ("none", "")
        mode, text = manager.guidance(MatchResult("matched", "template_4"))
        assert mode == "matched"
        assert deps.store.get("template_4").thought_template in text
        mode, text = manager.guidance(MatchResult("novel", nearest_ids=["template_1", "template_2"]))
        assert mode == "novel"
        assert "Solution description 2:" in text

    def test_corrective_plan(self, make_deps):
        provider = ScriptedProvider.from_dict({"rules": [
            {"tag": "plan", "contains": "previous plan was invalid", "reply": {"sub_tasks": {
                "task_1": {"content": "retrieve", "agent": "ItemRetrievalAgent"},
                "task_2": {"content": "respond", "agent": "InteractorAgent"}}}},
            {"tag": "plan", "reply": {"sub_tasks": {
                "task_1": {"content": "respond", "agent": "InteractorAgent"},
                "task_2": {"content": "retrieve", "agent": "ItemRetrievalAgent"}}}},
        ]})
        manager = ManagerAgent(make_deps(provider), PlannerStrategy.from_name("zero-shot"))
        plan = manager.plan_initial("anything")
        assert [t.agent for t in plan.sub_tasks] == [AgentKind.ITEM_RETRIEVER, AgentKind.INTERACTOR]
        assert len(provider.requests_for("plan")) == 2


class TestRunSession:
    """Tests for full sessions against the golden script."""

    def test_two_phase_session(self, make_deps):
        deps = make_deps()
        result = run_session(GATHERING_QUERY, PlannerStrategy(), deps, scenario_tag="ambiguous")

        assert result.succeeded
        assert result.response.item_ids == CASUAL + SEMI
        trajectory = result.trajectory
        assert trajectory.phases == 2
        assert trajectory.prompt_mode == "matched"
        assert trajectory.match["pattern_id"] == "template_4"
        assert [r.phase for r in trajectory.history] == [0, 0, 1, 1, 1, 1]
        assert [r.agent for r in trajectory.history][-1] is AgentKind.INTERACTOR
        ledger = deps.llm.ledger
        assert ledger.calls("match") == 1
        assert ledger.calls("plan") == 1
        assert ledger.calls("replan") == 1
        assert ledger.calls("interpreter") == 4
        assert ledger.calls("searcher") == 2
        assert ledger.calls("retriever_prefs") == 2
        assert ledger.calls("interactor") == 1

    def test_replan_prompt_carries_history(self, make_deps, golden_provider):
        run_session(GATHERING_QUERY, PlannerStrategy(), make_deps(golden_provider))
        replan = golden_provider.requests_for("replan")[0].user_prompt
        assert "history of tasks executed so far" in replan
        assert "Attributes: Blouses, Casual, Semi-Formal" in replan
        assert 'The re-plan goal is: "Generate a recommendation plan for casual blouses' in replan

    def test_matched_prompt_has_template(self, make_deps, golden_provider):
        run_session(GATHERING_QUERY, PlannerStrategy(), make_deps(golden_provider))
        plan_prompt = golden_provider.requests_for("plan")[0].user_prompt
        assert "Thought template:" in plan_prompt
        assert "- PlannerAgent:" in plan_prompt

    def test_novel_prompt_has_solutions(self, make_deps, golden_provider):
        store = make_deps().store.remove_by_scenario("ambiguous")
        result = run_session(GATHERING_QUERY, PlannerStrategy(), make_deps(golden_provider, store=store))
        assert result.trajectory.prompt_mode == "novel"
        plan_prompt = golden_provider.requests_for("plan")[0].user_prompt
        assert "Solution description 1:" in plan_prompt
        assert "Thought template:" not in plan_prompt

    def test_without_thought_patterns(self, make_deps, golden_provider):
        strategy = PlannerStrategy().ablated(["T"])
        result = run_session(GATHERING_QUERY, strategy, make_deps(golden_provider))
        assert result.succeeded
        assert result.trajectory.prompt_mode == "none"
        assert result.trajectory.match is None
        assert golden_provider.requests_for("match") == []

    def test_without_hierarchy(self, make_deps, golden_provider):
        strategy = PlannerStrategy().ablated(["H"])
        result = run_session(GATHERING_QUERY, strategy, make_deps(golden_provider))
        assert result.succeeded
        assert result.trajectory.phases == 1
        assert golden_provider.requests_for("replan") == []
        first = golden_provider.requests_for("plan")[0].user_prompt
        assert "- PlannerAgent:" not in first

    def test_plan_and_solve(self, make_deps, golden_provider):
        result = run_session(GATHERING_QUERY, PlannerStrategy.from_name("plan-solve"),
                             make_deps(golden_provider))
        assert result.succeeded
        assert result.trajectory.prompt_mode == "none"
        assert "devise a complete plan" in golden_provider.requests_for("plan")[0].user_prompt

    def test_single_phase_session(self, make_deps):
        result = run_session(WEEKEND_QUERY, PlannerStrategy(), make_deps())
        assert result.succeeded
        assert result.response.item_ids == CASUAL
        assert result.trajectory.phases == 1
        assert result.trajectory.prompt_mode == "novel"

    def test_malformed_plan(self, make_deps):
        deps = make_deps()
        result = run_session(SLEEPOVER_QUERY, PlannerStrategy(), deps)
        assert not result.succeeded
        assert result.failure_reason is FailureReason.MALFORMED_OUTPUT
        assert result.response is None
        assert deps.llm.ledger.calls("plan") == 3

    def test_iteration_threshold(self, make_deps):
        result = run_session(GATHERING_QUERY, PlannerStrategy(), make_deps(max_phases=1))
        assert result.failure_reason is FailureReason.ITERATION_THRESHOLD
        assert result.trajectory.failure_reason == "iteration_threshold"

    def test_executor_failure_after_retries(self, make_deps):
        provider = ScriptedProvider.from_dict({"rules": [
            {"tag": "plan", "reply": {"sub_tasks": {
                "task_1": {"content": "retrieve tuxedos", "agent": "ItemRetrievalAgent"},
                "task_2": {"content": "respond", "agent": "InteractorAgent"}}}},
            {"tag": "interpreter", "reply": {"query": "a black tuxedo"}},
            {"tag": "retriever_prefs", "reply": "tuxedo; black"},
        ]})
        deps = make_deps(provider, store=ThoughtStore(), retry_limit=2)
        result = run_session("a tuxedo please", PlannerStrategy(), deps)
        assert result.failure_reason is FailureReason.EXECUTOR_FAILURE
        assert deps.llm.ledger.calls("retriever_prefs") == 2
        task = result.trajectory.plans[0].sub_tasks[0]
        assert task.status is SubTaskStatus.FAILED
        assert task.attempts == 2

    def test_trajectory_round_trips(self, make_deps):
        result = run_session(GATHERING_QUERY, PlannerStrategy(), make_deps())
        restored = Trajectory.from_dict(result.to_dict()["trajectory"])
        assert restored.phases == 2
        assert len(restored.history) == 6
