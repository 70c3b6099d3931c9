"""
Catalog Module

Item corpus, closed attribute vocabulary and user interaction histories.
Everything else in the package reads from a :class:`Catalog`; it is built once
by :func:`src.io.catalog_io.ingest_catalog` and never mutated afterwards.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterator, List, Optional, Tuple

from ..errors import CatalogError

if TYPE_CHECKING:
    from ..llm.gateway import LLMGateway

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Profiles summarise at most this many of the most recent history items.
DEFAULT_PROFILE_WINDOW = 20


def normalize_token(token: str) -> str:
    """Fold simple plurals so "blouses" and "blouse" share a term."""
    if len(token) > 3 and token.endswith("s") and not token.endswith("ss"):
        return token[:-1]
    return token


def tokenize(text: str) -> List[str]:
    """Lowercase alphanumeric tokens with plural folding."""
    return [normalize_token(t) for t in _TOKEN_RE.findall(text.lower())]


@dataclass(frozen=True)
class Item:
    """A catalog entry.

    Attributes
    ----------
    id : str
        Opaque identifier, unique within a catalog
    title : str
        Product title
    description : str
        Free-text description
    attribute_path : tuple of str
        Category hierarchy, most general first (never empty)
    meta : dict
        Extra key -> text fields carried through untouched
    """
    id: str
    title: str
    description: str
    attribute_path: Tuple[str, ...]
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise CatalogError("item id must be non-empty")
        if not self.attribute_path:
            raise CatalogError(f"item '{self.id}' has an empty attribute path")

    @property
    def attributes_text(self) -> str:
        return " | ".join(self.attribute_path)

    @property
    def search_text(self) -> str:
        """Document text used for lexical and dense retrieval."""
        return " ".join([self.title, self.description, " ".join(self.attribute_path)])

    def to_dict(self) -> Dict:
        data = {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "attributes": self.attributes_text,
        }
        if self.meta:
            data["meta"] = dict(self.meta)
        return data


@dataclass
class AttributeVocab:
    """Closed set of attribute strings plus optional usage notes."""
    entries: frozenset = field(default_factory=frozenset)
    usage_notes: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = frozenset(self.entries)
        if not self.entries:
            raise CatalogError("attribute vocabulary must be non-empty")

    def __contains__(self, attribute: str) -> bool:
        return attribute in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def sorted_entries(self) -> List[str]:
        return sorted(self.entries)

    def note(self, attribute: str) -> str:
        if attribute not in self.entries:
            raise CatalogError(f"unknown attribute '{attribute}'")
        return self.usage_notes.get(attribute, "")


@dataclass
class UserHistory:
    """Chronological interactions of one user; the last item is the target."""
    user_id: str
    interactions: List[str]
    profile_text: str = ""

    def __post_init__(self):
        if len(self.interactions) < 2:
            raise CatalogError(
                f"history too short for user '{self.user_id}': "
                f"{len(self.interactions)} interaction(s), need at least 2"
            )

    @property
    def target_item(self) -> str:
        return self.interactions[-1]

    @property
    def history_items(self) -> List[str]:
        return self.interactions[:-1]

    def to_dict(self) -> Dict:
        data = {"user_id": self.user_id, "interactions": list(self.interactions)}
        if self.profile_text:
            data["profile_text"] = self.profile_text
        return data


class Catalog:
    """Immutable item index with vocabulary and histories."""

    def __init__(
        self,
        items: List[Item],
        vocab: AttributeVocab,
        histories: Optional[List[UserHistory]] = None,
    ):
        self._items: Dict[str, Item] = {}
        for item in items:
            if item.id in self._items:
                raise CatalogError(f"duplicate item id '{item.id}'")
            missing = [a for a in item.attribute_path if a not in vocab]
            if missing:
                raise CatalogError(
                    f"item '{item.id}' uses attributes outside the vocabulary: {missing}"
                )
            self._items[item.id] = item
        self.vocab = vocab
        self._histories: Dict[str, UserHistory] = {}
        for history in histories or []:
            self._add_history(history)

    def _add_history(self, history: UserHistory) -> None:
        unknown = [i for i in history.interactions if i not in self._items]
        if unknown:
            raise CatalogError(
                f"history of user '{history.user_id}' references unknown item(s): {unknown}"
            )
        self._histories[history.user_id] = history

    def with_histories(self, histories: List[UserHistory]) -> "Catalog":
        """Return a new catalog sharing items and vocab with extra histories."""
        merged = list(self._histories.values()) + list(histories)
        return Catalog(list(self._items.values()), self.vocab, merged)

    def get(self, item_id: str) -> Item:
        try:
            return self._items[item_id]
        except KeyError:
            raise CatalogError(f"unknown item id '{item_id}'") from None

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._items

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Item]:
        return iter(self._items.values())

    @property
    def item_ids(self) -> List[str]:
        return list(self._items.keys())

    @property
    def histories(self) -> List[UserHistory]:
        return [self._histories[k] for k in sorted(self._histories)]

    def history(self, user_id: str) -> UserHistory:
        try:
            return self._histories[user_id]
        except KeyError:
            raise CatalogError(f"unknown user id '{user_id}'") from None


def target_item(history: UserHistory) -> str:
    return history.target_item


def render_item(item: Item, max_words: Optional[int] = None) -> str:
    """One-line rendering used inside prompts."""
    description = item.description
    if max_words is not None:
        description = " ".join(description.split()[:max_words])
    return f"{item.title} ({item.attributes_text}): {description}".strip()


def build_profile(
    history: UserHistory,
    catalog: Catalog,
    llm: "LLMGateway",
    window: int = DEFAULT_PROFILE_WINDOW,
    domain_noun: str = "clothing",
) -> str:
    """
    Summarise a user's preferences from their interaction history.

    Parameters
    ----------
    history : UserHistory
        History whose last interaction is the target (excluded from the profile)
    catalog : Catalog
        Catalog resolving every interaction id
    llm : LLMGateway
        Gateway used for the summarising call
    window : int
        Number of most recent history items to include
    domain_noun : str
        Product domain used in the prompt ("clothing", "beauty product", ...)

    Returns
    -------
    str
        Non-empty preference summary
    """
    from ..llm.gateway import CallTag, ChatRequest
    from ..llm.prompts import render

    if len(history.interactions) < 2:
        raise CatalogError("history too short")
    items = [catalog.get(item_id) for item_id in history.interactions]
    recent = items[:-1][-window:]

    request = ChatRequest(
        system_prompt=render("profile_system", domain_noun=domain_noun),
        user_prompt=render(
            "profile_user",
            items=[render_item(i, max_words=30) for i in recent],
            domain_noun=domain_noun,
        ),
        tag=CallTag.QUERY_GEN,
    )
    profile = llm.chat(request).strip()
    if not profile:
        raise CatalogError(f"empty profile returned for user '{history.user_id}'")
    return profile
