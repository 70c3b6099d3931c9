"""
Catalog I/O Module

Parse line-delimited catalog and history records and persist the catalog
store (``items.jsonl``, ``vocab.txt``, ``histories.jsonl``).
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from ..core.catalog import AttributeVocab, Catalog, Item, UserHistory
from ..errors import CatalogError

logger = logging.getLogger(__name__)

ATTRIBUTE_SEPARATOR = " | "

ITEMS_FILE = "items.jsonl"
VOCAB_FILE = "vocab.txt"
HISTORIES_FILE = "histories.jsonl"
USAGE_NOTES_FILE = "usage_notes.json"


def split_attributes(raw) -> Tuple[str, ...]:
    """Split a ``" | "``-delimited attribute string (or accept a list)."""
    if isinstance(raw, list):
        parts = [str(p).strip() for p in raw]
    else:
        parts = [p.strip() for p in str(raw).split(ATTRIBUTE_SEPARATOR)]
    return tuple(p for p in parts if p)


def _parse_json_line(line: str, lineno: int) -> Optional[Dict]:
    line = line.strip()
    if not line:
        return None
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CatalogError(f"line {lineno}: malformed record ({exc.msg})") from None
    if not isinstance(record, dict):
        raise CatalogError(f"line {lineno}: record must be a JSON object")
    return record


def _record_to_item(record: Dict, lineno: int) -> Item:
    missing = [k for k in ("id", "title", "attributes") if k not in record]
    if missing:
        raise CatalogError(f"line {lineno}: missing field(s) {missing}")
    attributes = split_attributes(record["attributes"])
    if not attributes:
        raise CatalogError(f"line {lineno}: empty attributes")
    meta = record.get("meta") or {}
    if not isinstance(meta, dict):
        raise CatalogError(f"line {lineno}: meta must be an object")
    return Item(
        id=str(record["id"]),
        title=str(record["title"]),
        description=str(record.get("description", "")),
        attribute_path=attributes,
        meta={str(k): str(v) for k, v in meta.items()},
    )


def ingest_catalog(
    lines: Iterable[str],
    histories: Optional[Iterable[str]] = None,
    usage_notes: Optional[Dict[str, str]] = None,
) -> Catalog:
    """
    Build a catalog from line-delimited JSON records.

    Parameters
    ----------
    lines : iterable of str
        One ``{"id", "title", "description", "attributes"}`` object per line;
        ``attributes`` is pipe-delimited, optional ``meta`` is a string map
    histories : iterable of str, optional
        One ``{"user_id", "interactions"}`` object per line
    usage_notes : dict, optional
        Attribute -> knowledge text; keys outside the vocabulary are ignored

    Returns
    -------
    Catalog
        Catalog whose vocabulary is the union of all attribute paths
    """
    items: List[Item] = []
    seen = {}
    for lineno, line in enumerate(lines, start=1):
        record = _parse_json_line(line, lineno)
        if record is None:
            continue
        item = _record_to_item(record, lineno)
        if item.id in seen:
            raise CatalogError(
                f"line {lineno}: duplicate item id '{item.id}' (first seen on line {seen[item.id]})"
            )
        seen[item.id] = lineno
        items.append(item)

    if not items:
        raise CatalogError("empty catalog")

    entries = set()
    for item in items:
        entries.update(item.attribute_path)
    notes = {k: v for k, v in (usage_notes or {}).items() if k in entries}
    vocab = AttributeVocab(entries=frozenset(entries), usage_notes=notes)

    parsed_histories = parse_histories(histories) if histories is not None else []
    catalog = Catalog(items, vocab, parsed_histories)
    logger.info("ingested %d items, %d attributes, %d histories",
                len(catalog), len(vocab), len(parsed_histories))
    return catalog


def parse_histories(lines: Iterable[str]) -> List[UserHistory]:
    """Parse ``{"user_id", "interactions", "profile_text"?}`` records."""
    histories = []
    for lineno, line in enumerate(lines, start=1):
        record = _parse_json_line(line, lineno)
        if record is None:
            continue
        if "user_id" not in record or "interactions" not in record:
            raise CatalogError(f"history line {lineno}: needs user_id and interactions")
        interactions = record["interactions"]
        if not isinstance(interactions, list):
            raise CatalogError(f"history line {lineno}: interactions must be a list")
        histories.append(UserHistory(
            user_id=str(record["user_id"]),
            interactions=[str(i) for i in interactions],
            profile_text=str(record.get("profile_text", "")),
        ))
    return histories


def load_catalog_file(path: str, histories_path: Optional[str] = None,
                      usage_notes_path: Optional[str] = None) -> Catalog:
    """Ingest a catalog JSONL file from disk."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Catalog file not found: {path}")

    notes = None
    if usage_notes_path:
        with open(usage_notes_path) as f:
            notes = json.load(f)

    with open(path) as f:
        if histories_path:
            hist_path = Path(histories_path)
            if not hist_path.exists():
                raise FileNotFoundError(f"Histories file not found: {hist_path}")
            with open(hist_path) as hf:
                return ingest_catalog(f, hf, notes)
        return ingest_catalog(f, None, notes)


def save_store(catalog: Catalog, store_dir: str) -> Path:
    """
    Serialize a catalog to a store directory.

    Output is canonical (sorted keys, sorted vocab, items in ingestion order)
    so that ingesting the same stream twice produces identical files.
    """
    store_dir = Path(store_dir)
    store_dir.mkdir(parents=True, exist_ok=True)

    with open(store_dir / ITEMS_FILE, "w") as f:
        for item in catalog:
            f.write(json.dumps(item.to_dict(), sort_keys=True) + "\n")

    with open(store_dir / VOCAB_FILE, "w") as f:
        for entry in catalog.vocab.sorted_entries():
            f.write(entry + "\n")

    with open(store_dir / HISTORIES_FILE, "w") as f:
        for history in catalog.histories:
            f.write(json.dumps(history.to_dict(), sort_keys=True) + "\n")

    with open(store_dir / USAGE_NOTES_FILE, "w") as f:
        json.dump(catalog.vocab.usage_notes, f, indent=2, sort_keys=True)

    return store_dir


def load_store(store_dir: str) -> Catalog:
    """Load a catalog store written by :func:`save_store`."""
    store_dir = Path(store_dir)
    items_path = store_dir / ITEMS_FILE
    if not items_path.exists():
        raise FileNotFoundError(f"Catalog store not found: {items_path}")

    items = []
    with open(items_path) as f:
        for lineno, line in enumerate(f, start=1):
            record = _parse_json_line(line, lineno)
            if record is not None:
                items.append(_record_to_item(record, lineno))

    with open(store_dir / VOCAB_FILE) as f:
        entries = frozenset(line.rstrip("\n") for line in f if line.strip())

    notes = {}
    notes_path = store_dir / USAGE_NOTES_FILE
    if notes_path.exists():
        with open(notes_path) as f:
            notes = json.load(f)

    histories = []
    hist_path = store_dir / HISTORIES_FILE
    if hist_path.exists():
        with open(hist_path) as f:
            histories = parse_histories(f)

    return Catalog(items, AttributeVocab(entries=entries, usage_notes=notes), histories)
