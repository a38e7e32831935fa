"""Non-parametric knowledge source: a TF-IDF index over a snippet corpus.

Weighting is raw term frequency times smoothed inverse document frequency
``idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1``, with document vectors
L2-normalized, so every retrieval score is a cosine in [0, 1]. The scheme
name is stored in the persisted index so results stay reproducible.

Long documents are split at ingestion into sentence groups of at most
``SNIPPET_TOKEN_LIMIT`` tokens; each group becomes its own retrievable
snippet, which keeps retrieved knowledge within the decoding length budget.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateDocumentError, EmptyQueryError, FormatVersionError
from .textmetrics import tokenize

FORMAT_VERSION = 1
WEIGHTING = "tf-raw.idf-smooth.l2"
SNIPPET_TOKEN_LIMIT = 60

_SENTENCE_RE = re.compile(r"[^.!?]+[.!?]*")


@dataclass
class Document:
    id: str
    text: str
    domain_tag: str | None = None


@dataclass
class IngestReport:
    doc_count: int = 0
    skipped_empty: int = 0


class TfIdfIndex:
    """Immutable-after-build index mapping terms to weighted postings."""

    def __init__(self) -> None:
        self.vocabulary: dict[str, int] = {}
        self.idf: np.ndarray = np.zeros(0)
        # doc id -> (term id array, l2-normalized weight array)
        self.doc_vectors: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.documents: dict[str, Document] = {}
        # term id -> list of (doc id, weight); built once for retrieval
        self.postings: dict[int, list[tuple[str, float]]] = {}
        self.doc_count = 0
        self.report = IngestReport()
        self.weighting = WEIGHTING

    def document(self, doc_id: str) -> Document:
        return self.documents[doc_id]


def ingest(documents: Iterable[Document]) -> TfIdfIndex:
    """Build an index in one pass over the document stream.

    Documents whose tokenization is empty are skipped and counted in the
    ingest report. A repeated id raises :class:`DuplicateDocumentError`.
    """
    index = TfIdfIndex()
    token_lists: dict[str, list[str]] = {}
    df: Counter[str] = Counter()
    for doc in documents:
        if doc.id in token_lists:
            raise DuplicateDocumentError(doc.id)
        tokens = tokenize(doc.text)
        if not tokens:
            token_lists[doc.id] = []
            index.report.skipped_empty += 1
            continue
        token_lists[doc.id] = tokens
        index.documents[doc.id] = doc
        df.update(set(tokens))

    index.doc_count = len(index.documents)
    index.report.doc_count = index.doc_count
    index.vocabulary = {t: i for i, t in enumerate(sorted(df))}
    n = index.doc_count
    index.idf = np.array(
        [math.log((1 + n) / (1 + df[t])) + 1.0 for t in sorted(df)]
    )

    for doc_id, tokens in token_lists.items():
        if not tokens:
            continue
        counts = Counter(tokens)
        tids = np.array(sorted(index.vocabulary[t] for t in counts), dtype=np.int64)
        weights = np.array(
            [counts[t] * index.idf[index.vocabulary[t]]
             for t in sorted(counts, key=index.vocabulary.get)]
        )
        weights /= np.linalg.norm(weights)
        index.doc_vectors[doc_id] = (tids, weights)
        for tid, w in zip(tids, weights):
            index.postings.setdefault(int(tid), []).append((doc_id, float(w)))
    return index


def query_vector(index: TfIdfIndex, query: str) -> tuple[np.ndarray, np.ndarray]:
    """Indexed-term ids and L2-normalized tf-idf weights for ``query``."""
    tokens = tokenize(query)
    if not tokens:
        raise EmptyQueryError(f"query has no tokens: {query!r}")
    counts = Counter(t for t in tokens if t in index.vocabulary)
    if not counts:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    tids = np.array(sorted(index.vocabulary[t] for t in counts), dtype=np.int64)
    weights = np.array(
        [counts[t] * index.idf[index.vocabulary[t]]
         for t in sorted(counts, key=index.vocabulary.get)]
    )
    weights /= np.linalg.norm(weights)
    return tids, weights


def retrieve(index: TfIdfIndex, query: str, top_n: int) -> list[tuple[Document, float]]:
    """Top ``top_n`` documents by cosine similarity, descending.

    Only documents with a nonzero score are returned; ties break by
    ascending document id so retrieval is fully deterministic.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    tids, weights = query_vector(index, query)
    scores: dict[str, float] = {}
    for tid, qw in zip(tids, weights):
        for doc_id, dw in index.postings.get(int(tid), ()):
            scores[doc_id] = scores.get(doc_id, 0.0) + qw * dw
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(index.documents[doc_id], min(score, 1.0))
            for doc_id, score in ranked[:top_n]]


def split_into_snippets(text: str, limit: int = SNIPPET_TOKEN_LIMIT) -> list[str]:
    """Greedy sentence groups of at most ``limit`` tokens.

    A single sentence longer than the limit is hard-truncated.
    """
    if len(tokenize(text)) <= limit:
        return [text.strip()] if text.strip() else []
    groups: list[str] = []
    current: list[str] = []
    current_len = 0
    for sentence in (m.group().strip() for m in _SENTENCE_RE.finditer(text)):
        if not sentence:
            continue
        n_tok = len(tokenize(sentence))
        if n_tok > limit:
            words = sentence.split()
            head: list[str] = []
            for w in words:
                head.append(w)
                if len(tokenize(" ".join(head))) >= limit:
                    break
            sentence, n_tok = " ".join(head), limit
        if current and current_len + n_tok > limit:
            groups.append(" ".join(current))
            current, current_len = [], 0
        current.append(sentence)
        current_len += n_tok
    if current:
        groups.append(" ".join(current))
    return groups


def read_corpus_file(path: str) -> Iterator[Document]:
    """Yield documents from a corpus file, splitting long texts.

    Two layouts are accepted, decided per line: tab-separated
    ``id<TAB>domain_tag<TAB>text`` records (empty domain_tag allowed), or
    plain text with one snippet per line and ids auto-assigned as
    ``<basename>:<lineno>``. Split parts get an index suffix ``#<i>``.
    """
    import os

    base = os.path.basename(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" in line:
                parts = line.split("\t", 2)
                if len(parts) != 3:
                    raise ValueError(
                        f"{path}:{lineno}: expected id<TAB>domain_tag<TAB>text"
                    )
                doc_id, tag, text = parts
                tag = tag or None
            else:
                doc_id, tag, text = f"{base}:{lineno}", None, line
            pieces = split_into_snippets(text)
            if len(pieces) <= 1:
                yield Document(doc_id, text.strip(), tag)
            else:
                for i, piece in enumerate(pieces):
                    yield Document(f"{doc_id}#{i}", piece, tag)


def save_index(index: TfIdfIndex, path: str) -> None:
    """Persist the index as versioned structured text (JSON)."""
    terms = sorted(index.vocabulary, key=index.vocabulary.get)
    payload = {
        "format_version": FORMAT_VERSION,
        "weighting": index.weighting,
        "doc_count": index.doc_count,
        "skipped_empty": index.report.skipped_empty,
        "terms": terms,
        "idf": index.idf.tolist(),
        "documents": [
            {"id": d.id, "text": d.text, "domain_tag": d.domain_tag}
            for d in index.documents.values()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)


def load_index(path: str) -> TfIdfIndex:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"index {path}: format version {version!r}, expected {FORMAT_VERSION}"
        )
    index = ingest(
        Document(d["id"], d["text"], d.get("domain_tag"))
        for d in payload["documents"]
    )
    index.report.skipped_empty = payload.get("skipped_empty", 0)
    return index
