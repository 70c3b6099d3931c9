"""
Simulated User

Scores every recommended item 0, 0.5, 1 or 2 and emits a global fail tag.
Out-of-set scores are clamped, and a 2 on anything but the target item is
downgraded to 1.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple

from ..core.catalog import Catalog, Item
from ..core.executors import RecommendationResponse
from ..errors import MalformedOutput
from ..llm.gateway import CallTag, ChatRequest, LLMGateway
from ..llm.prompts import render
from .queries import QuerySpec

logger = logging.getLogger(__name__)

ALLOWED_SCORES = (0.0, 0.5, 1.0, 2.0)
SAMPLE_PRODUCT_WORDS = 40
UNPARSEABLE = "unparseable"


class _ShownItem(NamedTuple):
    id: str
    title: str


class _ShownList(NamedTuple):
    label: str
    items: List[_ShownItem]


@dataclass
class SimVerdict:
    failed: bool
    reason: str
    score_lists: List[List[float]] = field(default_factory=list)

    def __post_init__(self):
        if self.failed:
            self.score_lists = [[0.0] * len(scores) for scores in self.score_lists]

    @property
    def total_score(self) -> float:
        return float(sum(sum(scores) for scores in self.score_lists))

    def to_dict(self) -> Dict[str, Any]:
        return {"failed": self.failed, "reason": self.reason,
                "score_lists": [list(s) for s in self.score_lists]}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimVerdict":
        return cls(bool(data["failed"]), str(data.get("reason", "")),
                   [[float(x) for x in s] for s in data.get("score_lists", [])])


def clamp_score(raw: float) -> float:
    """Nearest allowed score; ties go to the lower value."""
    return min(ALLOWED_SCORES, key=lambda a: (abs(a - raw), a))


def sample_product(item: Item) -> str:
    words = item.description.split()[:SAMPLE_PRODUCT_WORDS]
    return f"{item.title}: {' '.join(words)}".strip().rstrip(":")


def _as_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("true", "yes", "1")
    return bool(value)


def _shape_check(expected: List[int]):
    def check(value: Any) -> bool:
        if not isinstance(value, dict) or "fail" not in value:
            return False
        scores = value.get("scores")
        if not isinstance(scores, list) or len(scores) != len(expected):
            return False
        for row, n in zip(scores, expected):
            if not isinstance(row, list) or len(row) != n:
                return False
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row):
                return False
        return True
    return check


def judge(
    spec: QuerySpec,
    response: RecommendationResponse,
    catalog: Catalog,
    llm: LLMGateway,
) -> SimVerdict:
    """
    Judge a response as the simulated user.

    Returns
    -------
    SimVerdict
        ``failed`` with reason "unparseable" when the simulator never returns
        usable JSON
    """
    expected = [len(rec.items) for rec in response.lists]
    target = catalog.get(spec.target_item_id)
    request = ChatRequest(
        system_prompt=render("simulator_system"),
        user_prompt=render(
            "simulator_user",
            query=spec.query_text,
            profile=spec.profile_text,
            sample_product=sample_product(target),
            scenario_description=spec.scenario_description,
            lists=[
                _ShownList(rec.label, [_ShownItem(i, t) for i, t in rec.items])
                for rec in response.lists
            ],
        ),
        tag=CallTag.SIMULATOR,
    )
    try:
        value = llm.complete_json(request, _shape_check(expected))
    except MalformedOutput as exc:
        logger.warning("simulator output unparseable for %s: %s", spec.query_id, exc)
        return SimVerdict(True, UNPARSEABLE, [[0.0] * n for n in expected])

    failed = _as_bool(value["fail"])
    score_lists = []
    for rec, row in zip(response.lists, value["scores"]):
        scores = []
        for position, ((item_id, _), raw) in enumerate(zip(rec.items, row), start=1):
            score = clamp_score(float(raw))
            if score != float(raw):
                logger.warning("%s: score %s at %s#%d clamped to %s",
                               spec.query_id, raw, rec.label, position, score)
            if score == 2.0 and item_id != spec.target_item_id:
                logger.warning("%s: score 2 on non-target item %s downgraded to 1",
                               spec.query_id, item_id)
                score = 1.0
            scores.append(score)
        score_lists.append(scores)

    return SimVerdict(failed, str(value.get("reason", "")).strip(), score_lists)
