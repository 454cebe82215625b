"""Topic-tagged article corpus with deterministic lexical retrieval.

Backs the support-arguments tool: articles are chunked by whitespace token
count with a fixed overlap, indexed into an inverted term index, and queried
with a saturating tf-idf score. Everything is a pure function of the corpus
and the query — no randomness, no external services — so rankings are
byte-stable across runs.

Scoring, for query term t and chunk c::

    idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
    tf_part(t)  = tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(c) / avg_len))
    score(q, c) = sum over distinct query terms of idf(t) * tf_part(t)

with k1 = 1.5 and b = 0.75, where N and df count chunks. Chunks sharing no
term with the query are never returned. Ties break by (doc_id, chunk_index)
ascending.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

TOPICS = ("Drought", "Wildfire", "Crop", "Practices")
DEFAULT_CHUNK_TOKENS = 300
DEFAULT_OVERLAP_TOKENS = 50

_K1 = 1.5
_B = 0.75

_WORD_RE = re.compile(r"[a-z0-9]+")
_TOKEN_RE = re.compile(r"\S+")


def scoring_terms(text: str) -> list[str]:
    """Lowercased alphanumeric terms used for matching and scoring."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class ArticleDoc:
    doc_id: str
    title: str
    topic: str
    citation: str
    body: str

    def __post_init__(self):
        if self.topic not in TOPICS:
            raise DataError(
                f"doc {self.doc_id!r}: topic must be one of "
                f"{', '.join(TOPICS)}, got {self.topic!r}"
            )
        if not self.doc_id:
            raise DataError("doc_id must be non-empty")


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    chunk_index: int
    text: str
    token_count: int


@dataclass(frozen=True)
class SupportHit:
    chunk: Chunk
    score: float
    title: str
    topic: str
    citation: str

    @property
    def doc_id(self) -> str:
        return self.chunk.doc_id

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk.chunk_index,
            "title": self.title,
            "topic": self.topic,
            "citation": self.citation,
            "score": round(self.score, 6),
            "text": self.chunk.text,
        }


def load_corpus(directory) -> list[ArticleDoc]:
    """Articles from a directory of ``<doc_id>.json`` files, sorted by id."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"corpus directory not found: {directory}")
    docs = []
    for path in sorted(directory.glob("*.json")):
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"unparsable corpus file {path}: {exc}") from exc
        missing = {"title", "topic", "citation", "body"} - payload.keys()
        if missing:
            raise DataError(
                f"corpus file {path} missing keys: {', '.join(sorted(missing))}"
            )
        docs.append(ArticleDoc(
            doc_id=path.stem,
            title=payload["title"],
            topic=payload["topic"],
            citation=payload["citation"],
            body=payload["body"],
        ))
    if not docs:
        raise DataError(f"corpus directory {directory} contains no .json docs")
    return docs


def chunk_document(doc: ArticleDoc, chunk_tokens: int,
                   overlap_tokens: int) -> list[Chunk]:
    """Whitespace-token chunks starting every ``chunk_tokens - overlap_tokens``.

    Chunk text is the verbatim substring of the body spanning its tokens, so
    original spacing and punctuation survive.
    """
    spans = [m.span() for m in _TOKEN_RE.finditer(doc.body)]
    if not spans:
        return []
    stride = chunk_tokens - overlap_tokens
    chunks = []
    start = 0
    while start < len(spans):
        stop = min(start + chunk_tokens, len(spans))
        text = doc.body[spans[start][0]:spans[stop - 1][1]]
        chunks.append(Chunk(doc.doc_id, len(chunks), text, stop - start))
        start += stride
    return chunks


@dataclass
class KnowledgeIndex:
    """Immutable chunk index; build once with index_corpus, then query."""

    chunks: list[Chunk]
    doc_meta: dict[str, ArticleDoc]
    chunk_terms: list[Counter] = field(repr=False)
    chunk_lengths: list[int] = field(repr=False)
    avg_length: float = field(repr=False)
    postings: dict[str, list[int]] = field(repr=False)

    @property
    def n_chunks(self) -> int:
        return len(self.chunks)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.n_chunks - df + 0.5) / (df + 0.5))

    def support_arguments(self, query: str, topic_filter: str | None = None,
                          k: int = 4) -> list[SupportHit]:
        """Top-k chunks for the query, optionally restricted to one topic."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        terms = sorted(set(scoring_terms(query)))
        if not terms:
            raise DataError("query contains no searchable terms")
        topic = None
        if topic_filter is not None:
            matches = [t for t in TOPICS if t.lower() == str(topic_filter).lower()]
            if not matches:
                raise DataError(
                    f"unknown topic {topic_filter!r}; expected one of "
                    f"{', '.join(TOPICS)}"
                )
            topic = matches[0]

        scores: dict[int, float] = {}
        for term in terms:
            chunk_ids = self.postings.get(term)
            if not chunk_ids:
                continue
            idf = self.idf(term)
            for cid in chunk_ids:
                tf = self.chunk_terms[cid][term]
                length_norm = 1.0 - _B + _B * self.chunk_lengths[cid] / self.avg_length
                part = idf * tf * (_K1 + 1.0) / (tf + _K1 * length_norm)
                scores[cid] = scores.get(cid, 0.0) + part

        hits = []
        for cid, score in scores.items():
            chunk = self.chunks[cid]
            doc = self.doc_meta[chunk.doc_id]
            if topic is not None and doc.topic != topic:
                continue
            hits.append(SupportHit(chunk, score, doc.title, doc.topic,
                                   doc.citation))
        hits.sort(key=lambda h: (-h.score, h.doc_id, h.chunk.chunk_index))
        return hits[:k]


def index_corpus(docs: list[ArticleDoc],
                 chunk_tokens: int = DEFAULT_CHUNK_TOKENS,
                 overlap_tokens: int = DEFAULT_OVERLAP_TOKENS) -> KnowledgeIndex:
    if not docs:
        raise DataError("cannot index an empty corpus")
    if overlap_tokens < 0:
        raise ValueError(f"overlap_tokens must be >= 0, got {overlap_tokens}")
    if chunk_tokens <= overlap_tokens:
        raise ValueError(
            f"chunk_tokens ({chunk_tokens}) must exceed overlap_tokens "
            f"({overlap_tokens})"
        )
    seen = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise DataError(f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)

    chunks: list[Chunk] = []
    for doc in sorted(docs, key=lambda d: d.doc_id):
        chunks.extend(chunk_document(doc, chunk_tokens, overlap_tokens))
    if not chunks:
        raise DataError("corpus bodies are empty; nothing to index")

    chunk_terms = [Counter(scoring_terms(c.text)) for c in chunks]
    chunk_lengths = [sum(counts.values()) for counts in chunk_terms]
    avg_length = sum(chunk_lengths) / len(chunk_lengths)
    postings: dict[str, list[int]] = {}
    for cid, counts in enumerate(chunk_terms):
        for term in counts:
            postings.setdefault(term, []).append(cid)

    return KnowledgeIndex(
        chunks=chunks,
        doc_meta={d.doc_id: d for d in docs},
        chunk_terms=chunk_terms,
        chunk_lengths=chunk_lengths,
        avg_length=max(avg_length, 1e-9),
        postings=postings,
    )
