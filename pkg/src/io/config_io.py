"""
Configuration I/O Module

Load and save YAML configuration files with ``${VAR}`` / ``${VAR:-default}``
environment interpolation.
"""

import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..errors import ConfigError

CONFIG_ENV_VAR = "TAIRA_CONFIG"

_ENV_TOKEN = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")

PROVIDER_KINDS = ("http", "scripted")
RETRIEVAL_BACKENDS = ("bm25", "embedding")
EMBEDDING_KINDS = ("hashing", "sentence-transformer")
SEARCH_KINDS = ("offline", "online")


@dataclass
class StoresConfig:
    """Locations of the persisted stores."""

    catalog_dir: str = "store/catalog"
    pattern_store: str = "store/patterns"
    run_dir: str = "runs"


@dataclass
class ProviderConfig:
    """Chat-completion backend."""

    kind: str = "http"
    base_url: str = "https://api.openai.com"
    model: str = "gpt-4o"
    fixture_path: str = ""
    timeout: float = 60.0
    api_key_env: str = "TAIRA_API_KEY"
    transport_retries: int = 3
    reprompt_budget: int = 2


@dataclass
class RetrievalConfig:
    """Item ranking and attribute mapping."""

    backend: str = "bm25"
    embedding_kind: str = "hashing"
    embedding_model: str = "BAAI/bge-m3"
    embedding_dim: int = 256
    candidate_pool_size: int = 50
    map_m: int = 5


@dataclass
class SearchConfig:
    """External knowledge source for the Searcher."""

    kind: str = "offline"
    corpus_path: str = ""
    url: str = "https://www.googleapis.com/customsearch/v1"
    api_key_env: str = "TAIRA_SEARCH_KEY"


@dataclass
class PlanningConfig:
    """Manager agent and baseline planner bounds."""

    top_k: int = 5
    max_phases: int = 4
    retry_limit: int = 3
    react_max_steps: int = 8
    reflexion_max_reflections: int = 1
    domain_noun: str = "clothing"
    profile_window: int = 20


@dataclass
class EvaluationConfig:
    """Batch evaluation settings."""

    parallelism: int = 4
    seed: int = 0


@dataclass
class TairaConfig:
    """Full application configuration."""

    stores: StoresConfig = field(default_factory=StoresConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    planning: PlanningConfig = field(default_factory=PlanningConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def validate(self) -> "TairaConfig":
        """Check numeric bounds and enumerated kinds; returns self."""
        _check_choice("provider.kind", self.provider.kind, PROVIDER_KINDS)
        _check_choice("retrieval.backend", self.retrieval.backend, RETRIEVAL_BACKENDS)
        _check_choice("retrieval.embedding_kind", self.retrieval.embedding_kind, EMBEDDING_KINDS)
        _check_choice("search.kind", self.search.kind, SEARCH_KINDS)

        positive = {
            "provider.timeout": self.provider.timeout,
            "provider.transport_retries": self.provider.transport_retries,
            "retrieval.embedding_dim": self.retrieval.embedding_dim,
            "retrieval.candidate_pool_size": self.retrieval.candidate_pool_size,
            "retrieval.map_m": self.retrieval.map_m,
            "planning.top_k": self.planning.top_k,
            "planning.max_phases": self.planning.max_phases,
            "planning.retry_limit": self.planning.retry_limit,
            "planning.react_max_steps": self.planning.react_max_steps,
            "planning.reflexion_max_reflections": self.planning.reflexion_max_reflections,
            "planning.profile_window": self.planning.profile_window,
            "evaluation.parallelism": self.evaluation.parallelism,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.provider.reprompt_budget < 0:
            raise ConfigError("provider.reprompt_budget must be non-negative")
        if self.provider.kind == "scripted" and not self.provider.fixture_path:
            raise ConfigError("provider.fixture_path is required for the scripted provider")
        return self


_SECTIONS = {
    "stores": StoresConfig,
    "provider": ProviderConfig,
    "retrieval": RetrievalConfig,
    "search": SearchConfig,
    "planning": PlanningConfig,
    "evaluation": EvaluationConfig,
}


def _check_choice(name: str, value: str, choices) -> None:
    if value not in choices:
        raise ConfigError(f"{name} must be one of {list(choices)}, got '{value}'")


def interpolate_env(value: Any, environ: Optional[Dict[str, str]] = None) -> Any:
    """Replace ``${VAR}`` and ``${VAR:-default}`` tokens in strings, recursively."""
    env = os.environ if environ is None else environ

    if isinstance(value, dict):
        return {k: interpolate_env(v, env) for k, v in value.items()}
    if isinstance(value, list):
        return [interpolate_env(v, env) for v in value]
    if not isinstance(value, str):
        return value

    def _sub(match: "re.Match") -> str:
        name, default = match.group(1), match.group(2)
        if name in env:
            return env[name]
        if default is not None:
            return default
        raise ConfigError(f"environment variable '{name}' is not set")

    return _ENV_TOKEN.sub(_sub, value)


def config_from_dict(data: Dict[str, Any]) -> TairaConfig:
    """Build a config from a (possibly partial) nested mapping."""
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    sections = {}
    for name, cls in _SECTIONS.items():
        section = data.get(name) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"config section '{name}' must be a mapping")
        allowed = {f.name: f.type for f in fields(cls)}
        bad = set(section) - set(allowed)
        if bad:
            raise ConfigError(f"unknown key(s) in '{name}': {sorted(bad)}")
        defaults = cls()
        coerced = {}
        for key, value in section.items():
            default = getattr(defaults, key)
            coerced[key] = _coerce(f"{name}.{key}", value, default)
        sections[name] = cls(**coerced)
    return TairaConfig(**sections)


def _coerce(name: str, value: Any, default: Any) -> Any:
    # Env interpolation always yields strings; cast back to the field's type.
    if value is None:
        return default
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r}") from None


def load_config(config_path: str, environ: Optional[Dict[str, str]] = None) -> TairaConfig:
    """
    Load configuration from YAML file.

    Parameters
    ----------
    config_path : str
        Path to YAML config file
    environ : dict, optional
        Environment used for interpolation (defaults to ``os.environ``)

    Returns
    -------
    TairaConfig
        Loaded and validated configuration
    """
    config_path = Path(config_path)

    if not config_path.is_file():
        raise ConfigError(f"config file not found or unreadable: {config_path}")

    try:
        with open(config_path) as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc

    if not isinstance(data, dict):
        raise ConfigError(f"config {config_path} must contain a mapping")

    return config_from_dict(interpolate_env(data, environ)).validate()


def save_config(config: TairaConfig, output_path: str) -> None:
    """
    Save configuration to YAML file.

    Parameters
    ----------
    config : TairaConfig
        Configuration to save
    output_path : str
        Output path
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    with open(output_path, "w") as f:
        yaml.safe_dump(asdict(config), f, default_flow_style=False, sort_keys=False)


def get_default_config() -> TairaConfig:
    """Get default configuration."""
    return TairaConfig()


def resolve_config(path: Optional[str] = None, environ: Optional[Dict[str, str]] = None) -> TairaConfig:
    """Explicit path, else ``$TAIRA_CONFIG``, else defaults."""
    env = os.environ if environ is None else environ
    path = path or env.get(CONFIG_ENV_VAR)
    if path:
        return load_config(path, env)
    return get_default_config()
