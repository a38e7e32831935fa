"""Tokenization, n-gram utilities and diversity metrics.

Every other module funnels text through :func:`tokenize`, which keeps the
whole pipeline deterministic: lowercase word tokens split on runs of
non-alphanumeric characters, with apostrophes retained inside tokens
("don't" stays one token). Alphanumeric is decided by Unicode category;
there is no stemming and no smoothing anywhere in the metrics.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence

# Unicode letters/digits (\w minus underscore), optionally joined by single
# internal apostrophes. Leading/trailing apostrophes act as separators.
_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*")

# A sentence is a maximal run of non-terminators plus its trailing
# terminator run; text without terminators is one sentence.
_SENTENCE_RE = re.compile(r"[^.!?]+[.!?]*")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens of ``text``; empty input gives an empty list."""
    return _TOKEN_RE.findall(text.lower())


def surface_tokens(text: str) -> list[str]:
    """Word tokens with original casing preserved (same splits as tokenize)."""
    return _TOKEN_RE.findall(text)


def split_sentences(text: str) -> list[str]:
    """Sentence-ish spans of ``text``, stripped; drops whitespace-only spans."""
    return [s.strip() for s in _SENTENCE_RE.findall(text) if s.strip()]


def ngrams(tokens: Sequence[str], n: int) -> list[tuple[str, ...]]:
    """All contiguous n-grams of ``tokens`` as tuples; empty when too short."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def distinct_n(tokens: Sequence[str], n: int) -> float:
    """Fraction of distinct n-grams among all n-grams of the sequence.

    Returns 0.0 when the sequence has no n-grams at all, so callers ranking
    very short responses never have to special-case them.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    grams = ngrams(tokens, n)
    if not grams:
        return 0.0
    return len(set(grams)) / len(grams)


def _entropy(counts: Iterable[int]) -> float:
    """Shannon entropy (natural log) of an empirical count distribution."""
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log(p)
    return h


def entr(tokens: Sequence[str]) -> float:
    """Geometric mean of n-gram distribution entropies for n = 1, 2, 3.

    Natural-log entropies; requires at least 3 tokens so that trigrams
    exist. A constant sequence scores exactly 0.
    """
    if len(tokens) < 3:
        raise ValueError(f"entr needs at least 3 tokens, got {len(tokens)}")
    product = 1.0
    for n in (1, 2, 3):
        counts = Counter(ngrams(tokens, n))
        product *= _entropy(counts.values())
    return product ** (1.0 / 3.0)


def corpus_distinct_n(token_seqs: Iterable[Sequence[str]], n: int) -> float:
    """distinct-n pooled over many sequences; n-grams never cross sequences."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    seen: set[tuple[str, ...]] = set()
    total = 0
    for seq in token_seqs:
        grams = ngrams(seq, n)
        total += len(grams)
        seen.update(grams)
    if total == 0:
        return 0.0
    return len(seen) / total


def corpus_entr(token_seqs: Iterable[Sequence[str]]) -> float:
    """entr over pooled n-gram counts of many sequences (n = 1, 2, 3)."""
    counters = [Counter(), Counter(), Counter()]
    for seq in token_seqs:
        for n in (1, 2, 3):
            counters[n - 1].update(ngrams(seq, n))
    if not counters[2]:
        return 0.0
    product = 1.0
    for counter in counters:
        product *= _entropy(counter.values())
    return product ** (1.0 / 3.0)
