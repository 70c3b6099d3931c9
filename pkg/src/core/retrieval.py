"""
Retrieval Module

Lexical (BM25) and dense (cosine) ranking over a catalog, plus the attribute
mapper that projects free text onto the closed attribute vocabulary.
"""

import hashlib
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from ..errors import RetrievalError
from .catalog import AttributeVocab, Catalog, tokenize

logger = logging.getLogger(__name__)

BM25_K1 = 1.2
BM25_B = 0.75

POSTINGS_FILE = "postings.jsonl"
BM25_META_FILE = "meta.json"
EMBEDDINGS_FILE = "embeddings.f32"
EMBEDDING_IDS_FILE = "embedding_ids.txt"


@dataclass
class RankedList:
    """Ranked (item_id, score) pairs, best first."""
    entries: List[Tuple[str, float]] = field(default_factory=list)
    query_terms: List[str] = field(default_factory=list)

    @property
    def item_ids(self) -> List[str]:
        return [item_id for item_id, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def to_dict(self) -> Dict:
        return {
            "query_terms": list(self.query_terms),
            "entries": [[item_id, round(score, 6)] for item_id, score in self.entries],
        }


def _top_k(scores: Dict[str, float], k: int) -> List[Tuple[str, float]]:
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]


# =============================================================================
# BM25
# =============================================================================

class BM25Index:
    """
    Inverted index over item title, description and attribute path.

    Parameters
    ----------
    postings : dict
        term -> list of (item_id, term frequency)
    doc_lengths : dict
        item_id -> token count
    """

    def __init__(self, postings: Dict[str, List[Tuple[str, int]]],
                 doc_lengths: Dict[str, int],
                 k1: float = BM25_K1, b: float = BM25_B):
        self.postings = postings
        self.doc_lengths = doc_lengths
        self.k1 = k1
        self.b = b
        self.n_docs = len(doc_lengths)
        self.avgdl = (sum(doc_lengths.values()) / self.n_docs) if self.n_docs else 0.0

    @classmethod
    def build(cls, catalog: Catalog) -> "BM25Index":
        postings: Dict[str, List[Tuple[str, int]]] = defaultdict(list)
        doc_lengths = {}
        for item in catalog:
            tokens = tokenize(item.search_text)
            doc_lengths[item.id] = len(tokens)
            for term, tf in sorted(Counter(tokens).items()):
                postings[term].append((item.id, tf))
        return cls(dict(postings), doc_lengths)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, terms: Sequence[str]) -> Dict[str, float]:
        """BM25 scores of every document containing at least one term."""
        scores: Dict[str, float] = defaultdict(float)
        for term in terms:
            plist = self.postings.get(term)
            if not plist:
                continue
            idf = self.idf(term)
            for item_id, tf in plist:
                norm = 1.0 - self.b + self.b * (self.doc_lengths[item_id] / self.avgdl)
                scores[item_id] += idf * (tf * (self.k1 + 1.0)) / (tf + self.k1 * norm)
        return {k: v for k, v in scores.items() if v > 0.0}

    def save(self, index_dir: str) -> None:
        index_dir = Path(index_dir)
        index_dir.mkdir(parents=True, exist_ok=True)
        with open(index_dir / POSTINGS_FILE, "w") as f:
            for term in sorted(self.postings):
                f.write(json.dumps({"term": term, "postings": self.postings[term]}) + "\n")
        meta = {"k1": self.k1, "b": self.b, "doc_lengths": self.doc_lengths}
        with open(index_dir / BM25_META_FILE, "w") as f:
            json.dump(meta, f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, index_dir: str) -> "BM25Index":
        index_dir = Path(index_dir)
        if not (index_dir / POSTINGS_FILE).exists():
            raise FileNotFoundError(f"BM25 index not found in {index_dir}")
        postings = {}
        with open(index_dir / POSTINGS_FILE) as f:
            for line in f:
                if line.strip():
                    record = json.loads(line)
                    postings[record["term"]] = [(i, int(tf)) for i, tf in record["postings"]]
        with open(index_dir / BM25_META_FILE) as f:
            meta = json.load(f)
        return cls(postings, {k: int(v) for k, v in meta["doc_lengths"].items()},
                   k1=meta["k1"], b=meta["b"])


def _query_tokens(query_terms: Sequence[str]) -> List[str]:
    seen = []
    for term in query_terms:
        for token in tokenize(term):
            if token not in seen:
                seen.append(token)
    return seen


def bm25_rank(
    query_terms: Sequence[str],
    catalog: Catalog,
    k: int,
    index: Optional[BM25Index] = None,
) -> RankedList:
    """
    Rank catalog items by BM25 (k1=1.2, b=0.75).

    Parameters
    ----------
    query_terms : list of str
        Keywords; multi-word terms are tokenized
    catalog : Catalog
        Catalog to rank
    k : int
        Maximum list length
    index : BM25Index, optional
        Prebuilt index for ``catalog``

    Returns
    -------
    RankedList
        Items with positive score, ties broken by ascending id
    """
    if k <= 0:
        raise RetrievalError(f"k must be positive, got {k}")
    if not query_terms:
        raise RetrievalError("query_terms must be non-empty")
    index = index or BM25Index.build(catalog)
    tokens = _query_tokens(query_terms)
    return RankedList(entries=_top_k(index.score(tokens), k), query_terms=list(query_terms))


# =============================================================================
# Embeddings
# =============================================================================

class EmbeddingProvider(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray:
        ...


class HashingEmbedding:
    """
    Deterministic signed feature-hashing embedding.

    Each token is hashed into one of ``dimension`` buckets with a +/-1 sign;
    the vector is L2 normalized. Needs no model download.
    """

    def __init__(self, dimension: int = 256):
        if dimension <= 0:
            raise RetrievalError("embedding dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float32)
        for token in tokenize(text):
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            sign = 1.0 if (value >> 63) & 1 == 0 else -1.0
            vec[value % self.dimension] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


class SentenceTransformerEmbedding:
    """Dense embedding via sentence-transformers (optional extra)."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise RetrievalError(
                "sentence-transformers is not installed; install thoughtrec[embeddings]"
            ) from exc
        self._model = SentenceTransformer(model_name)
        self.dimension = int(self._model.get_sentence_embedding_dimension())

    def embed(self, text: str) -> np.ndarray:
        vec = self._model.encode(
            [text], convert_to_numpy=True, normalize_embeddings=True, show_progress_bar=False
        )[0]
        return np.asarray(vec, dtype=np.float32)


def make_embedding_provider(kind: str, dimension: int = 256,
                            model_name: str = "") -> EmbeddingProvider:
    if kind == "hashing":
        return HashingEmbedding(dimension)
    if kind == "sentence-transformer":
        return SentenceTransformerEmbedding(model_name)
    raise RetrievalError(f"unknown embedding kind '{kind}'")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.dot(a, b) / denom)


@dataclass
class EmbeddingIndex:
    """Row-aligned item ids and embedding matrix."""
    ids: List[str]
    matrix: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1]) if self.matrix.ndim == 2 else 0

    @classmethod
    def build(cls, catalog: Catalog, provider: EmbeddingProvider) -> "EmbeddingIndex":
        ids = catalog.item_ids
        matrix = np.zeros((len(ids), provider.dimension), dtype=np.float32)
        for row, item_id in enumerate(ids):
            matrix[row] = provider.embed(catalog.get(item_id).search_text)
        return cls(ids, matrix)

    def save(self, index_dir: str) -> None:
        index_dir = Path(index_dir)
        index_dir.mkdir(parents=True, exist_ok=True)
        self.matrix.astype("<f4").tofile(index_dir / EMBEDDINGS_FILE)
        with open(index_dir / EMBEDDING_IDS_FILE, "w") as f:
            for item_id in self.ids:
                f.write(item_id + "\n")

    @classmethod
    def load(cls, index_dir: str) -> "EmbeddingIndex":
        index_dir = Path(index_dir)
        ids_path = index_dir / EMBEDDING_IDS_FILE
        if not ids_path.exists():
            raise FileNotFoundError(f"embedding index not found in {index_dir}")
        with open(ids_path) as f:
            ids = [line.rstrip("\n") for line in f if line.strip()]
        flat = np.fromfile(index_dir / EMBEDDINGS_FILE, dtype="<f4")
        if ids and flat.size % len(ids):
            raise RetrievalError("embedding matrix size does not match id manifest")
        matrix = flat.reshape(len(ids), -1) if ids else np.zeros((0, 0), dtype=np.float32)
        return cls(ids, matrix.astype(np.float32))


def embed_rank(
    query_text: str,
    catalog: Catalog,
    k: int,
    provider: EmbeddingProvider,
    index: Optional[EmbeddingIndex] = None,
) -> RankedList:
    """
    Rank catalog items by cosine similarity to the query embedding.

    Ties are broken by ascending item id, as in :func:`bm25_rank`.
    """
    if k <= 0:
        raise RetrievalError(f"k must be positive, got {k}")
    index = index or EmbeddingIndex.build(catalog, provider)
    if index.dimension != provider.dimension:
        raise RetrievalError(
            f"dimension mismatch: index has {index.dimension}, provider has {provider.dimension}"
        )
    query = np.asarray(provider.embed(query_text), dtype=np.float64)
    if query.shape != (provider.dimension,):
        raise RetrievalError(f"provider returned shape {query.shape}")

    matrix = index.matrix.astype(np.float64)
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query)
    dots = matrix @ query
    sims = np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
    scores = {item_id: float(sims[row]) for row, item_id in enumerate(index.ids)}
    return RankedList(entries=_top_k(scores, k), query_terms=tokenize(query_text))


# =============================================================================
# Attribute mapping
# =============================================================================

def map_attributes(
    free_text: str,
    vocab: AttributeVocab,
    m: int = 5,
    provider: Optional[EmbeddingProvider] = None,
) -> List[str]:
    """
    Project free text onto the ``m`` nearest vocabulary entries.

    Entries are ordered by token overlap (fraction of the entry's tokens found
    in the text), then cosine similarity when a provider is given, then
    lexicographically. The result is always a subset of ``vocab.entries``.
    """
    if m <= 0:
        raise RetrievalError(f"m must be positive, got {m}")
    text_tokens = set(tokenize(free_text))
    query_vec = provider.embed(free_text) if provider is not None else None

    ranked = []
    for entry in vocab.sorted_entries():
        entry_tokens = set(tokenize(entry))
        overlap = len(entry_tokens & text_tokens) / len(entry_tokens) if entry_tokens else 0.0
        dense = cosine_similarity(query_vec, provider.embed(entry)) if query_vec is not None else 0.0
        ranked.append((-overlap, -dense, entry))
    ranked.sort()

    selected = [entry for _, _, entry in ranked[:m]]
    if ranked and ranked[0][0] == 0.0 and query_vec is None:
        logger.debug("no attribute overlap for %r; using lexicographic order", free_text)
    return selected


# =============================================================================
# Facade
# =============================================================================

class Retriever:
    """
    Ranking backend bound to one catalog.

    Parameters
    ----------
    catalog : Catalog
        Catalog to rank
    backend : str
        "bm25" or "embedding"
    provider : EmbeddingProvider, optional
        Required for the embedding backend; also refines ``map``
    candidate_pool_size : int
        Default list length for :meth:`candidates`
    """

    def __init__(
        self,
        catalog: Catalog,
        backend: str = "bm25",
        provider: Optional[EmbeddingProvider] = None,
        candidate_pool_size: int = 50,
        map_m: int = 5,
        bm25_index: Optional[BM25Index] = None,
        embedding_index: Optional[EmbeddingIndex] = None,
    ):
        if backend not in ("bm25", "embedding"):
            raise RetrievalError(f"unknown retrieval backend '{backend}'")
        if backend == "embedding" and provider is None:
            raise RetrievalError("embedding backend needs an embedding provider")
        self.catalog = catalog
        self.backend = backend
        self.provider = provider
        self.candidate_pool_size = candidate_pool_size
        self.map_m = map_m
        self.bm25_index = bm25_index or BM25Index.build(catalog)
        self.embedding_index = embedding_index
        if backend == "embedding" and self.embedding_index is None:
            self.embedding_index = EmbeddingIndex.build(catalog, provider)

    def candidates(self, query_text: str, k: Optional[int] = None) -> RankedList:
        """Base candidate list for free-text keywords."""
        k = k or self.candidate_pool_size
        if self.backend == "embedding":
            return embed_rank(query_text, self.catalog, k, self.provider, self.embedding_index)
        terms = tokenize(query_text)
        if not terms:
            return RankedList(entries=[], query_terms=[])
        return bm25_rank(terms, self.catalog, k, self.bm25_index)

    def map(self, free_text: str, m: Optional[int] = None) -> List[str]:
        return map_attributes(free_text, self.catalog.vocab, m or self.map_m, self.provider)

    def save(self, index_dir: str) -> None:
        self.bm25_index.save(index_dir)
        if self.embedding_index is not None:
            self.embedding_index.save(index_dir)
