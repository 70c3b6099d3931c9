"""
Unit tests for thought patterns, matching, distillation and the pattern store files.
"""

import json

import numpy as np
import pytest

from src.core.plans import AgentKind, TaskRecord, Trajectory
from src.core.retrieval import HashingEmbedding
from src.core.thought_store import (
    EXPERT_SOURCES,
    MatchResult,
    PatternSource,
    ThoughtPattern,
    ThoughtStore,
    distill,
    match,
    mint_pattern_id,
)
from src.errors import MalformedOutput, PatternStoreError
from src.io.pattern_io import (
    load_bootstrap_patterns,
    load_or_bootstrap,
    load_pattern_store,
    save_pattern_store,
)

from tests.conftest import GATHERING_QUERY, scripted_gateway

DISTILLED = {
    "task_description": "The user wants one product type but the usage scene is unclear.",
    "solution_description": "Enumerate the likely scenes and recommend per scene.",
    "thought_template": "Step 1: Search for scenes.\nStep 2: Re-plan per scene.",
}


def _pattern(pid, task="find shoes for running", source="agent_success", tag="occasions"):
    return ThoughtPattern(pid, task, "solution", "Step 1: do it", source, tag)


def _route(succeeded=True):
    trajectory = Trajectory(query=GATHERING_QUERY, strategy="TAIRA", scenario_tag="ambiguous")
    trajectory.history.append(TaskRecord("search", AgentKind.SEARCHER, "q", "Attributes: Casual", 0))
    if not succeeded:
        trajectory.failure_reason = "executor_failure"
    return trajectory


class TestThoughtPattern:
    """Tests for pattern validation."""

    def test_empty_field(self):
        with pytest.raises(PatternStoreError, match="task_description"):
            ThoughtPattern("p", " ", "s", "Step 1", "agent_success")

    def test_template_needs_step(self):
        with pytest.raises(PatternStoreError, match="Step"):
            ThoughtPattern("p", "t", "s", "just do it", "agent_success")

    def test_unknown_source(self):
        with pytest.raises(PatternStoreError):
            ThoughtPattern.from_dict({"id": "p", "task_description": "t", "solution_description": "s",
                                      "thought_template": "Step 1", "source": "crowd"})

    def test_missing_tag_defaults(self):
        pattern = ThoughtPattern.from_dict({"id": "p", "task_description": "t", "solution_description": "s",
                                            "thought_template": "Step 1", "source": "expert_direct"})
        assert pattern.scenario_tag == "untagged"


class TestThoughtStore:
    """Tests for store operations."""

    def test_commit_replaces_in_place(self):
        store = ThoughtStore([_pattern("a"), _pattern("b")])
        store.commit(_pattern("a", task="revised"))
        assert store.ids == ["a", "b"]
        assert store.get("a").task_description == "revised"

    def test_snapshot_is_stable(self):
        store = ThoughtStore([_pattern("a")])
        snapshot = store.snapshot()
        store.commit(_pattern("b"))
        assert [p.id for p in snapshot] == ["a"]

    def test_delete(self):
        store = ThoughtStore([_pattern("a")])
        store.delete("a")
        assert len(store) == 0
        with pytest.raises(PatternStoreError):
            store.delete("a")

    def test_remove_by_scenario(self):
        store = ThoughtStore([_pattern("a", tag="bundle"), _pattern("b", tag="occasions")])
        reduced = store.remove_by_scenario("bundle")
        assert reduced.ids == ["b"]
        assert store.ids == ["a", "b"]
        with pytest.raises(PatternStoreError, match="unknown scenario tag"):
            store.remove_by_scenario("matching")

    def test_filter_sources(self):
        store = load_bootstrap_patterns()
        experts = store.filter_sources(EXPERT_SOURCES)
        assert experts.ids == ["template_2", "template_3", "template_4", "template_7"]
        agents = store.filter_sources([PatternSource.AGENT_SUCCESS])
        assert agents.sources == ["agent_success"]

    def test_top_k_jaccard(self):
        store = load_bootstrap_patterns()
        ranked = store.top_k(GATHERING_QUERY, 5)
        assert len(ranked) == 5
        assert ranked[0][0] == "template_4"
        assert [s for _, s in ranked] == sorted((s for _, s in ranked), reverse=True)

    def test_top_k_ties_by_id(self):
        store = ThoughtStore([_pattern("b"), _pattern("a")])
        assert [pid for pid, _ in store.top_k("running shoes", 5)] == ["a", "b"]

    def test_top_k_cosine(self):
        store = ThoughtStore([_pattern("a", task="sandals for the beach"),
                              _pattern("b", task="warm pajamas for winter")],
                             embedder=HashingEmbedding(128))
        assert store.top_k("warm pajamas for winter nights", 1)[0][0] == "b"
        assert store.get("a").embedding.shape == (128,)

    def test_invalid_k(self):
        with pytest.raises(PatternStoreError):
            ThoughtStore([_pattern("a")]).top_k("q", 0)


class TestMatch:
    """Tests for selector-based matching."""

    def test_matched(self):
        llm = scripted_gateway([{"tag": "match", "reply": {"selected": "template_4"}}])
        result = match(GATHERING_QUERY, load_bootstrap_patterns(), 5, llm)
        assert result.is_matched
        assert result.pattern_id == "template_4"
        assert "template_4" in llm.provider.requests[0].user_prompt

    def test_none_is_novel(self):
        llm = scripted_gateway([{"tag": "match", "reply": {"selected": "none"}}])
        result = match(GATHERING_QUERY, load_bootstrap_patterns(), 5, llm)
        assert result.outcome == MatchResult.NOVEL
        assert len(result.nearest_ids) == 5

    def test_non_candidate_is_novel(self):
        llm = scripted_gateway([{"tag": "match", "reply": {"selected": "template_4"}}])
        store = load_bootstrap_patterns().remove_by_scenario("ambiguous")
        result = match(GATHERING_QUERY, store, 5, llm)
        assert not result.is_matched
        assert "template_4" not in result.nearest_ids

    def test_empty_store_skips_selector(self):
        llm = scripted_gateway([])
        result = match("anything", ThoughtStore(), 5, llm)
        assert result.outcome == MatchResult.NOVEL
        assert llm.ledger.calls("match") == 0

    def test_unparseable_selector(self):
        llm = scripted_gateway([{"tag": "match", "reply": "template_4"}])
        with pytest.raises(MalformedOutput):
            match(GATHERING_QUERY, load_bootstrap_patterns(), 5, llm)


class TestDistill:
    """Tests for pattern distillation."""

    def _llm(self):
        return scripted_gateway([{"tag": "distill", "reply": DISTILLED}])

    def test_agent_success(self):
        pattern = distill(_route(), None, None, self._llm())
        assert pattern.source is PatternSource.AGENT_SUCCESS
        assert pattern.scenario_tag == "ambiguous"
        assert pattern.id == mint_pattern_id(DISTILLED["task_description"],
                                             DISTILLED["solution_description"])

    def test_expert_corrected_keeps_old_id(self):
        old = load_bootstrap_patterns().get("template_4")
        llm = self._llm()
        pattern = distill(_route(succeeded=False), "search scenes first", old, llm)
        assert pattern.id == "template_4"
        assert pattern.source is PatternSource.EXPERT_CORRECTED
        prompt = llm.provider.requests[0].user_prompt
        assert "Expert opinion: search scenes first" in prompt
        assert old.task_description in prompt

    def test_expert_direct(self):
        pattern = distill(None, "always check the season", None, self._llm(), scenario_tag="bundle")
        assert pattern.source is PatternSource.EXPERT_DIRECT
        assert pattern.scenario_tag == "bundle"

    def test_failed_route_needs_opinion(self):
        with pytest.raises(PatternStoreError, match="expert opinion"):
            distill(_route(succeeded=False), None, None, self._llm())

    def test_nothing_to_distill(self):
        with pytest.raises(PatternStoreError):
            distill(None, "  ", None, self._llm())

    def test_reply_without_steps_rejected(self):
        bad = dict(DISTILLED, thought_template="think hard")
        llm = scripted_gateway([{"tag": "distill", "reply": bad}])
        with pytest.raises(MalformedOutput):
            distill(_route(), None, None, llm)


class TestPatternStoreFiles:
    """Tests for patterns.json and the embeddings sidecar."""

    def test_bootstrap_set(self):
        store = load_bootstrap_patterns()
        assert store.ids == [f"template_{i}" for i in range(1, 8)]
        assert len(store.scenario_tags) == 7

    def test_save_load_with_embeddings(self, tmp_path):
        store = load_bootstrap_patterns(HashingEmbedding(32))
        save_pattern_store(store, str(tmp_path))
        assert (tmp_path / "embeddings.npz").exists()
        loaded = load_pattern_store(str(tmp_path), HashingEmbedding(32))
        assert loaded.ids == store.ids
        assert np.array_equal(loaded.get("template_1").embedding, store.get("template_1").embedding)

    def test_sidecar_removed_without_embeddings(self, tmp_path):
        save_pattern_store(load_bootstrap_patterns(HashingEmbedding(8)), str(tmp_path))
        save_pattern_store(load_bootstrap_patterns(), str(tmp_path))
        assert not (tmp_path / "embeddings.npz").exists()

    def test_duplicate_ids(self, tmp_path):
        record = _pattern("dup").to_dict()
        (tmp_path / "patterns.json").write_text(json.dumps([record, record]))
        with pytest.raises(PatternStoreError, match="duplicate"):
            load_pattern_store(str(tmp_path))

    def test_load_or_bootstrap(self, tmp_path):
        assert len(load_or_bootstrap(str(tmp_path / "empty"))) == 7
        save_pattern_store(ThoughtStore([_pattern("only")]), str(tmp_path / "one"))
        assert load_or_bootstrap(str(tmp_path / "one")).ids == ["only"]

    def test_missing_store(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_pattern_store(str(tmp_path))
