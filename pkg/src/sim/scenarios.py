"""
Scenario and semantic-opener catalogues with seeded weighted samplers.

Weights and descriptions are loaded from ``src/resources/scenarios.yaml``.
"""

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from ..errors import SimulationError

SCENARIOS_PATH = Path(__file__).resolve().parent.parent / "resources" / "scenarios.yaml"


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


class Scenario(str, Enum):
    DIRECT_REFERENCE = "direct_reference"
    OCCASIONS = "occasions"
    MATCHING = "matching"
    MULTI_TYPES = "multi_types"
    BUNDLE = "bundle"
    AMBIGUOUS = "ambiguous"
    MULTI_OCCASIONS = "multi_occasions"


class Semantic(str, Enum):
    CAN_YOU_RECOMMEND = "can_you_recommend"
    I_AM_LOOKING_FOR = "i_am_looking_for"
    ANY_SUGGESTIONS = "any_suggestions"
    HELP_ME_CHOOSE = "help_me_choose"
    WHATS_THE_BEST = "whats_the_best"
    SHOW_ME = "show_me"
    ADVICE_ON_CHOOSING = "advice_on_choosing"
    WHERE_CAN_I_FIND = "where_can_i_find"


DIFFICULTY_OF: Dict[Scenario, Difficulty] = {
    Scenario.DIRECT_REFERENCE: Difficulty.EASY,
    Scenario.OCCASIONS: Difficulty.MEDIUM,
    Scenario.MATCHING: Difficulty.MEDIUM,
    Scenario.MULTI_TYPES: Difficulty.MEDIUM,
    Scenario.BUNDLE: Difficulty.HARD,
    Scenario.AMBIGUOUS: Difficulty.HARD,
    Scenario.MULTI_OCCASIONS: Difficulty.HARD,
}


@dataclass(frozen=True)
class ScenarioInfo:
    scenario: Scenario
    difficulty: Difficulty
    weight: float
    description: str


@dataclass(frozen=True)
class SemanticInfo:
    semantic: Semantic
    opener: str
    weight: float


def load_scenario_table(path: Optional[str] = None) -> Tuple[Dict[Scenario, ScenarioInfo],
                                                             Dict[Semantic, SemanticInfo]]:
    """Read scenario and opener tables; the difficulty column must agree with DIFFICULTY_OF."""
    path = Path(path) if path else SCENARIOS_PATH
    with open(path) as f:
        data = yaml.safe_load(f) or {}

    scenarios = {}
    for name, entry in (data.get("scenarios") or {}).items():
        scenario = Scenario(name)
        difficulty = Difficulty(entry["difficulty"])
        if difficulty is not DIFFICULTY_OF[scenario]:
            raise SimulationError(
                f"{path}: scenario '{name}' is {DIFFICULTY_OF[scenario].value}, not {difficulty.value}"
            )
        scenarios[scenario] = ScenarioInfo(scenario, difficulty, float(entry["weight"]),
                                           " ".join(str(entry["description"]).split()))
    semantics = {}
    for name, entry in (data.get("semantics") or {}).items():
        semantic = Semantic(name)
        semantics[semantic] = SemanticInfo(semantic, str(entry["opener"]), float(entry["weight"]))

    missing = [s.value for s in Scenario if s not in scenarios] + \
              [s.value for s in Semantic if s not in semantics]
    if missing:
        raise SimulationError(f"{path}: missing entries {missing}")
    return scenarios, semantics


SCENARIO_TABLE, SEMANTIC_TABLE = load_scenario_table()


def scenarios_for(difficulty: Difficulty) -> List[Scenario]:
    return [s for s in Scenario if DIFFICULTY_OF[s] is Difficulty(difficulty)]


def _normalized(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return w / w.sum()


def sample_scenarios(
    n: int,
    rng: np.random.Generator,
    difficulty: Optional[Difficulty] = None,
) -> List[Scenario]:
    """
    Draw ``n`` scenarios by table weight.

    With ``difficulty`` the weights are renormalized within that tier.
    """
    pool = scenarios_for(difficulty) if difficulty is not None else list(Scenario)
    probs = _normalized([SCENARIO_TABLE[s].weight for s in pool])
    picks = rng.choice(len(pool), size=n, p=probs)
    return [pool[i] for i in picks]


def sample_semantics(n: int, rng: np.random.Generator) -> List[Semantic]:
    pool = list(Semantic)
    probs = _normalized([SEMANTIC_TABLE[s].weight for s in pool])
    return [pool[i] for i in rng.choice(len(pool), size=n, p=probs)]


def opener_of(semantic: Semantic) -> str:
    return SEMANTIC_TABLE[Semantic(semantic)].opener


def description_of(scenario: Scenario) -> str:
    return SCENARIO_TABLE[Scenario(scenario)].description
