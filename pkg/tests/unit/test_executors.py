"""
Unit tests for the executor agents.
"""

import json
import random
from unittest import mock

import pytest
import requests

from src.core.executors import (
    HttpSearchClient,
    OfflineSearchClient,
    RecommendationList,
    RecommendationResponse,
    SearchResult,
    format_ranked,
    interactor,
    interpret,
    item_retriever,
    parse_preferences,
    reorder_by_preferences,
    searcher,
    truncate_words,
)
from src.core.plans import AgentKind, TaskHistory, TaskRecord
from src.errors import ExecutorFailure, MalformedOutput

from tests.conftest import scripted_gateway

CASUAL = [f"C{i:02d}" for i in range(1, 11)]
SEMI = [f"S{i:02d}" for i in range(1, 11)]


def _history(*id_lists):
    history = TaskHistory()
    for ids in id_lists:
        history.append(TaskRecord("retrieve", AgentKind.ITEM_RETRIEVER, "q", "items", 0, item_ids=list(ids)))
    return history


def _lists(*id_lists, label="Blouses"):
    return {"lists": [{"recommendation": label, "items": [{"id": i} for i in ids]} for ids in id_lists]}


class TestSearchClients:
    """Tests for offline and online search."""

    def test_bundled_corpus(self):
        results = OfflineSearchClient.from_file().search("Blouses for a GATHERING")
        assert results
        assert all(isinstance(r, SearchResult) for r in results)

    def test_no_match(self):
        assert OfflineSearchClient.from_file().search("quantum chromodynamics") == []

    def test_custom_corpus(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text(json.dumps({"pattern": "hat", "results": [{"title": "Hats", "snippet": "Sun hats"}]}) + "\n")
        client = OfflineSearchClient.from_file(str(path))
        assert client.search("a straw hat") == [SearchResult("Hats", "Sun hats")]

    def test_malformed_corpus(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"pattern": "x"}\n')
        with pytest.raises(ExecutorFailure, match=":1:"):
            OfflineSearchClient.from_file(str(path))

    def test_http_failure(self):
        client = HttpSearchClient("https://search.example", "NO_KEY")
        with mock.patch("src.core.executors.requests.get",
                        side_effect=requests.ConnectionError("down")):
            with pytest.raises(ExecutorFailure, match="search request failed"):
                client.search("blouses")

    def test_http_items(self):
        response = mock.Mock()
        response.json.return_value = {"items": [{"title": "T", "snippet": "S"}]}
        client = HttpSearchClient("https://search.example", "NO_KEY")
        with mock.patch("src.core.executors.requests.get", return_value=response):
            assert client.search("blouses") == [SearchResult("T", "S")]


class TestSearcher:
    """Tests for the Searcher agent."""

    def test_maps_summary_to_vocab(self, retriever):
        llm = scripted_gateway([{"tag": "searcher", "reply": "Casual blouses Semi-Formal blouses"}])
        attributes = searcher("blouses for a gathering", OfflineSearchClient.from_file(), retriever, llm)
        assert attributes == ["Blouses", "Casual", "Semi-Formal", "Athletic", "Clothing"]
        assert "Search results:" in llm.provider.requests[0].user_prompt

    def test_summary_truncated(self, retriever):
        words = " ".join(["filler"] * 25) + " Sandals"
        llm = scripted_gateway([{"tag": "searcher", "reply": words}])
        attributes = searcher("beach trip", OfflineSearchClient.from_file(), retriever, llm)
        # Only the filler words survive, so nothing overlaps and the order is lexicographic.
        assert attributes == ["Athletic", "Blouses", "Casual", "Clothing", "Sandals"]

    def test_no_results_maps_query(self, retriever):
        llm = scripted_gateway([])
        attributes = searcher("thermal sleepwear", OfflineSearchClient([]), retriever, llm)
        assert attributes[:2] == ["Sleepwear", "Thermal"]
        assert llm.ledger.total().calls == 0

    def test_empty_query(self, retriever):
        with pytest.raises(ExecutorFailure):
            searcher("  ", OfflineSearchClient([]), retriever, scripted_gateway([]))

    def test_truncate_words(self):
        assert truncate_words("a b c d", 2) == "a b"


class TestSearcherClosure:
    """Randomised Searcher output is vocabulary-closed and retrievable."""

    WORDS = ("gathering", "beach", "office", "winter", "party", "sleep", "friends",
             "quantum", "vintage", "cozy", "42", "weekend")

    def test_random_queries(self, retriever, catalog):
        rng = random.Random(99)
        vocab = sorted(catalog.vocab.entries)
        client = OfflineSearchClient.from_file()
        for _ in range(200):
            query = " ".join(rng.sample(self.WORDS, rng.randint(1, 4)))
            summary = rng.sample(self.WORDS, rng.randint(0, 3)) + rng.sample(vocab, rng.randint(0, 3))
            rng.shuffle(summary)
            llm = scripted_gateway([{"tag": "searcher", "reply": " ".join(summary) or "nothing useful"}])

            attributes = searcher(query, client, retriever, llm)
            assert attributes, query
            assert set(attributes) <= catalog.vocab.entries
            assert len(set(attributes)) == len(attributes) <= 5

            follow_up = scripted_gateway([{
                "tag": "retriever_prefs",
                "reply": f"{attributes[0]}; {' '.join(attributes[1:])}",
            }])
            ranked = item_retriever(", ".join(attributes), catalog, retriever, follow_up)
            assert 0 < len(ranked) <= 10
            assert all(item_id in catalog for item_id in ranked.item_ids)


class TestItemRetriever:
    """Tests for the Item Retriever agent."""

    def test_parse_preferences(self):
        parse = parse_preferences("[blouses women]; [casual, cotton]")
        assert parse.item_type == "blouses women"
        assert parse.preferences == ["casual", "cotton"]

    def test_parse_without_preferences(self):
        assert parse_preferences("sneakers").preferences == []

    def test_parse_truncates_to_fifteen_words(self):
        parse = parse_preferences("a b c d e f g h i j; k l m n o p q")
        assert parse.word_count == 15

    def test_empty_type(self):
        with pytest.raises(ExecutorFailure):
            parse_preferences("; casual")

    def test_reorder_is_stable(self, retriever, catalog):
        base = retriever.candidates("blouses")
        reordered = reorder_by_preferences(base, catalog, ["semi-formal"], 10)
        assert reordered.item_ids == SEMI
        scores = [s for _, s in reordered.entries]
        assert scores == sorted(scores, reverse=True)

    def test_retrieves_ten(self, retriever, catalog):
        llm = scripted_gateway([{"tag": "retriever_prefs", "reply": "blouses; casual"}])
        ranked = item_retriever("Casual blouses for women", catalog, retriever, llm)
        assert ranked.item_ids == CASUAL
        assert "clothing type" in llm.provider.requests[0].user_prompt

    def test_no_candidates(self, retriever, catalog):
        llm = scripted_gateway([{"tag": "retriever_prefs", "reply": "tuxedo; black"}])
        with pytest.raises(ExecutorFailure, match="no candidates"):
            item_retriever("a tuxedo", catalog, retriever, llm)

    def test_domain_noun(self, retriever, catalog):
        llm = scripted_gateway([{"tag": "retriever_prefs", "reply": "blouses"}])
        item_retriever("blouses", catalog, retriever, llm, domain_noun="beauty product")
        assert "[beauty product type]" in llm.provider.requests[0].user_prompt


class TestInterpreter:
    """Tests for the Task Interpreter."""

    def test_returns_query(self):
        llm = scripted_gateway([{"tag": "interpreter", "reply": {"query": " casual blouses "}}])
        history = _history(CASUAL)
        query = interpret("Retrieve casual blouses", history, "ItemRetrievalAgent", llm)
        assert query == "casual blouses"
        prompt = llm.provider.requests[0].user_prompt
        assert 'The current task is "Retrieve casual blouses"' in prompt
        assert 'The previous task output is "items"' in prompt

    def test_planner_not_interpretable(self):
        with pytest.raises(ExecutorFailure):
            interpret("re-plan", TaskHistory(), AgentKind.PLANNER, scripted_gateway([]))

    def test_unknown_agent(self):
        with pytest.raises(ExecutorFailure, match="unknown next agent"):
            interpret("x", TaskHistory(), "OracleAgent", scripted_gateway([]))

    def test_empty_query_rejected(self):
        llm = scripted_gateway([{"tag": "interpreter", "reply": {"query": ""}}])
        with pytest.raises(MalformedOutput):
            interpret("x", TaskHistory(), "SearcherAgent", llm)


class TestInteractor:
    """Tests for the Interactor agent."""

    def test_two_lists(self, catalog):
        llm = scripted_gateway([{"tag": "interactor", "reply": _lists(CASUAL, SEMI)}])
        response = interactor(_history(CASUAL, SEMI), "recommend", llm, catalog)
        assert len(response.lists) == 2
        assert response.item_ids == CASUAL + SEMI
        assert response.lists[0].items[0] == ("C01", "Casual Cotton Blouse No. 01")

    def test_needs_retrieval(self):
        with pytest.raises(ExecutorFailure, match="item retrieval"):
            interactor(TaskHistory(), "recommend", scripted_gateway([]))

    def test_corrective_reprompt(self, catalog):
        llm = scripted_gateway([
            {"tag": "interactor", "contains": "previous response was rejected", "reply": _lists(CASUAL)},
            {"tag": "interactor", "reply": _lists(CASUAL[:9] + ["P01"])},
        ])
        response = interactor(_history(CASUAL), "recommend", llm, catalog)
        assert response.item_ids == CASUAL
        assert llm.ledger.calls("interactor") == 2

    def test_invalid_after_reprompt(self):
        llm = scripted_gateway([{"tag": "interactor", "reply": _lists(CASUAL[:5])}])
        with pytest.raises(ExecutorFailure, match="after re-prompt"):
            interactor(_history(CASUAL), "recommend", llm)

    def test_label_truncated(self, catalog):
        llm = scripted_gateway([{"tag": "interactor",
                                 "reply": _lists(CASUAL, label="one two three four five six")}])
        response = interactor(_history(CASUAL), "recommend", llm, catalog)
        assert response.lists[0].label == "one two three four five"

    def test_response_rules(self):
        items = [(i, "") for i in CASUAL]
        with pytest.raises(ExecutorFailure):
            RecommendationResponse([])
        with pytest.raises(ExecutorFailure):
            RecommendationResponse([RecommendationList("x", items[:9])])
        with pytest.raises(ExecutorFailure):
            RecommendationResponse([RecommendationList(" ", items)])

    def test_format_ranked(self, retriever, catalog):
        text = format_ranked(retriever.candidates("sandals"), catalog)
        assert text == "Retrieved items:\n1. [D01] Strappy Leather Sandals"
