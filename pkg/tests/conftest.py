"""
Shared fixtures: the toy catalog, scripted providers and session wiring.
"""

from pathlib import Path

import pytest

from src.core.executors import OfflineSearchClient
from src.core.retrieval import Retriever
from src.core.session import SessionDeps
from src.io.catalog_io import load_catalog_file
from src.io.pattern_io import load_bootstrap_patterns
from src.llm.gateway import LLMGateway, TokenLedger
from src.llm.providers import ScriptedProvider
from src.sim.queries import load_suite

FIXTURES = Path(__file__).resolve().parent / "fixtures"
GOLDEN_SCRIPT = FIXTURES / "scripts" / "golden.yaml"
SUITE12_SCRIPT = FIXTURES / "scripts" / "suite12.yaml"

GATHERING_QUERY = (
    "Can you suggest some blouses for a gathering with friends? "
    "I'm not sure about the specific wearing scene."
)
WEEKEND_QUERY = "I am looking for a casual cotton blouse for weekends."
SLEEPOVER_QUERY = "Show me pajamas for a winter sleepover."


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def catalog():
    return load_catalog_file(str(FIXTURES / "catalog.jsonl"), str(FIXTURES / "histories.jsonl"))


@pytest.fixture
def retriever(catalog):
    return Retriever(catalog)


@pytest.fixture
def golden_provider():
    return ScriptedProvider.from_files(GOLDEN_SCRIPT)


def scripted_gateway(rules):
    """Gateway over an inline rule list."""
    return LLMGateway(ScriptedProvider.from_dict({"rules": rules}), TokenLedger())


@pytest.fixture
def make_deps(catalog, retriever):
    """Build SessionDeps around a provider; overrides go to SessionDeps."""

    def _make(provider=None, store=None, **overrides):
        provider = provider or ScriptedProvider.from_files(GOLDEN_SCRIPT)
        return SessionDeps(
            store=store if store is not None else load_bootstrap_patterns(),
            catalog=catalog,
            retriever=retriever,
            search_client=OfflineSearchClient.from_file(),
            llm=LLMGateway(provider, TokenLedger()),
            **overrides,
        )

    return _make


@pytest.fixture
def suite():
    return load_suite(str(FIXTURES / "suite.jsonl"))


@pytest.fixture
def suite12():
    return load_suite(str(FIXTURES / "suite12.jsonl"))


def suite12_provider():
    """Golden sessions plus the wedding and office sessions of suite12."""
    return ScriptedProvider.from_files(GOLDEN_SCRIPT, SUITE12_SCRIPT)
