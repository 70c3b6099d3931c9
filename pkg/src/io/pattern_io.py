"""
Pattern Store I/O Module

Persist a thought store as ``patterns.json`` plus an ``embeddings.npz``
sidecar keyed by pattern id, and load the bundled bootstrap patterns.
"""

import json
from pathlib import Path
from typing import Optional

import numpy as np

from ..core.retrieval import EmbeddingProvider
from ..core.thought_store import ThoughtPattern, ThoughtStore
from ..errors import PatternStoreError

PATTERNS_FILE = "patterns.json"
EMBEDDINGS_FILE = "embeddings.npz"

BOOTSTRAP_PATH = Path(__file__).resolve().parent.parent / "resources" / "patterns.json"


def save_pattern_store(store: ThoughtStore, store_dir: str) -> Path:
    """
    Save a thought store.

    Parameters
    ----------
    store : ThoughtStore
        Store to save
    store_dir : str
        Output directory (created if missing)

    Returns
    -------
    Path
        Path of the written ``patterns.json``
    """
    store_dir = Path(store_dir)
    store_dir.mkdir(parents=True, exist_ok=True)
    snapshot = store.snapshot()

    with open(store_dir / PATTERNS_FILE, "w") as f:
        json.dump([p.to_dict() for p in snapshot], f, indent=2, ensure_ascii=False)

    vectors = {p.id: p.embedding for p in snapshot if p.embedding is not None}
    sidecar = store_dir / EMBEDDINGS_FILE
    if vectors:
        with open(sidecar, "wb") as f:
            np.savez(f, **vectors)
    elif sidecar.exists():
        sidecar.unlink()

    return store_dir / PATTERNS_FILE


def _read_patterns(path: Path, embeddings: Optional[dict] = None):
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise PatternStoreError(f"{path}: not valid JSON ({exc.msg})") from None
    if not isinstance(data, list):
        raise PatternStoreError(f"{path}: expected a JSON array of patterns")
    patterns = []
    seen = set()
    for record in data:
        pattern = ThoughtPattern.from_dict(record, (embeddings or {}).get(str(record.get("id"))))
        if pattern.id in seen:
            raise PatternStoreError(f"{path}: duplicate pattern id '{pattern.id}'")
        seen.add(pattern.id)
        patterns.append(pattern)
    return patterns


def load_pattern_store(store_dir: str, embedder: Optional[EmbeddingProvider] = None) -> ThoughtStore:
    """Load a store written by :func:`save_pattern_store`."""
    store_dir = Path(store_dir)
    path = store_dir / PATTERNS_FILE
    if not path.exists():
        raise FileNotFoundError(f"Pattern store not found: {path}")

    embeddings = {}
    sidecar = store_dir / EMBEDDINGS_FILE
    if sidecar.exists():
        with np.load(sidecar) as npz:
            embeddings = {key: np.array(npz[key]) for key in npz.files}

    return ThoughtStore(_read_patterns(path, embeddings), embedder=embedder)


def load_bootstrap_patterns(embedder: Optional[EmbeddingProvider] = None) -> ThoughtStore:
    """The seven bundled patterns, one per interaction scenario."""
    return ThoughtStore(_read_patterns(BOOTSTRAP_PATH), embedder=embedder)


def load_or_bootstrap(store_dir: str, embedder: Optional[EmbeddingProvider] = None) -> ThoughtStore:
    """Load ``store_dir`` when it holds a store, else fall back to the bootstrap set."""
    if (Path(store_dir) / PATTERNS_FILE).exists():
        return load_pattern_store(store_dir, embedder)
    return load_bootstrap_patterns(embedder)
