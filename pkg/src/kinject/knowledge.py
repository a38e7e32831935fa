"""Candidate knowledge snippets for one dialog turn.

Two sources feed one pool: *generated* snippets, sampled from a language
model prompted with key-phrase templates and ranked by their likelihood
after the dialog history, and *retrieved* snippets from a TF-IDF index
queried with history plus draft reply.  A token blocklist filters the
merged pool.  The generator can be swapped for an external HTTP service
without touching any scoring code.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import SourceUnavailableError
from .keyphrase import KeyPhrase
from .lm import LMParams, log_prob, sample_nucleus
from .textmetrics import split_sentences, tokenize
from .tfidf import TfIdfIndex, retrieve
from .vocab import EOS, KNOWLEDGE_SEP, Vocab

PROMPTS = (
    "{kp} is famous for",
    "The popular opinion about {kp} is",
    "Here is what I know about {kp}:",
    "My friend says that {kp} is:",
    "Here is some information about {kp}:",
    "Here are some reviews about {kp}:",
    "I think {kp} is:",
    "I read on the internet about {kp} and found that",
    "Today I learned about {kp} that",
)

SNIPPET_TOKEN_LIMIT = 100

PARAMETRIC = "parametric"
NONPARAMETRIC = "nonparametric"


@dataclass
class KnowledgeSnippet:
    text: str
    source: str       # PARAMETRIC or NONPARAMETRIC
    origin: str       # prompt used, or document id
    raw_score: float  # log-likelihood after history, or cosine


def build_prompts(phrase: KeyPhrase) -> list[str]:
    """All prompt templates instantiated with the phrase, in fixed order."""
    return [template.format(kp=phrase.text) for template in PROMPTS]


def encode_snippet(vocab: Vocab, text: str) -> list[int]:
    """Token ids used whenever a snippet is scored by the language model.

    Snippets are framed as a knowledge block -- separator token, words,
    terminator -- matching how knowledge text appears in training streams,
    so likelihoods conditioned on a snippet are computed in-distribution.
    """
    return [KNOWLEDGE_SEP] + vocab.encode(text) + [EOS]


def truncate_text(text: str, limit: int = SNIPPET_TOKEN_LIMIT) -> str:
    """Shorten to at most ``limit`` word tokens, preferring a sentence cut."""
    if len(tokenize(text)) <= limit:
        return text
    kept: list[str] = []
    used = 0
    for sentence in split_sentences(text):
        n = len(tokenize(sentence))
        if kept and used + n > limit:
            break
        if not kept and n > limit:
            return " ".join(tokenize(sentence)[:limit])
        kept.append(sentence)
        used += n
        if used >= limit:
            break
    return " ".join(kept)


def _call_seed(seed: int, phrase_idx: int, prompt_idx: int) -> int:
    """Distinct, stable per-call seed for each (phrase, prompt) slot."""
    return ((seed * 9973 + phrase_idx) * 9973 + prompt_idx) % (2**63)


class LocalGenerator:
    """Default parametric source: nucleus samples from the bundled model."""

    def __init__(self, params: LMParams, vocab: Vocab,
                 top_p: float = 0.95, max_len: int = 100):
        self.params = params
        self.vocab = vocab
        self.top_p = top_p
        self.max_len = max_len

    def complete(self, prompt: str, n: int, seed: int) -> list[str]:
        context = self.vocab.encode(prompt)
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(n):
            ids = sample_nucleus(self.params, context, rng,
                                 max_len=self.max_len, top_p=self.top_p)
            out.append(self.vocab.surface_text(ids))
        return out


class RemoteGenerator:
    """Parametric source behind a JSON-over-HTTP completion endpoint."""

    def __init__(self, url: str, top_p: float = 0.95, max_len: int = 100,
                 timeout: float = 10.0):
        self.url = url
        self.top_p = top_p
        self.max_len = max_len
        self.timeout = timeout

    def complete(self, prompt: str, n: int, seed: int) -> list[str]:
        payload = json.dumps({
            "prompt": prompt,
            "max_tokens": self.max_len,
            "n": n,
            "top_p": self.top_p,
            "seed": seed,
        }).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=payload,
            headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                if resp.status != 200:
                    raise SourceUnavailableError(
                        f"generator service returned status {resp.status}")
                body = json.loads(resp.read().decode("utf-8"))
        except SourceUnavailableError:
            raise
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise SourceUnavailableError(f"generator service unreachable: {exc}") from exc
        completions = body.get("completions")
        if not isinstance(completions, list) or not all(isinstance(c, str) for c in completions):
            raise SourceUnavailableError("generator service returned a malformed body")
        return completions


def parametric_snippets(scorer: LMParams, vocab: Vocab, phrases: list[KeyPhrase],
                        history_ids: list[int], per_phrase: int, seed: int,
                        generator) -> tuple[list[KnowledgeSnippet], bool]:
    """Generated snippets ranked by likelihood after the history.

    Returns the sorted snippets and a warning flag that is True when no
    key-phrases were available (empty pool, not an error).  Duplicate
    texts are kept once with their best score.
    """
    if per_phrase < 1:
        raise ValueError(f"per_phrase must be >= 1, got {per_phrase}")
    if not phrases:
        return [], True
    best: dict[str, KnowledgeSnippet] = {}
    for pi, phrase in enumerate(phrases):
        for qi, prompt in enumerate(build_prompts(phrase)):
            completions = generator.complete(prompt, per_phrase,
                                             _call_seed(seed, pi, qi))
            for completion in completions:
                text = truncate_text((prompt + " " + completion).strip())
                if not vocab.encode(text):
                    continue
                score = log_prob(scorer, encode_snippet(vocab, text), history_ids)
                kept = best.get(text)
                if kept is None or score > kept.raw_score:
                    best[text] = KnowledgeSnippet(
                        text=text, source=PARAMETRIC, origin=prompt,
                        raw_score=score)
    snippets = sorted(best.values(), key=lambda s: (-s.raw_score, s.text))
    return snippets, False


def nonparametric_snippets(index: TfIdfIndex, history_text: str,
                           initial_text: str, top_n: int
                           ) -> list[KnowledgeSnippet]:
    """Retrieved snippets for the concatenated history + draft reply."""
    query = (history_text + " " + initial_text).strip()
    results = retrieve(index, query, top_n)
    return [
        KnowledgeSnippet(text=doc.text, source=NONPARAMETRIC,
                         origin=doc.id, raw_score=score)
        for doc, score in results
    ]


def filter_snippets(snippets: list[KnowledgeSnippet],
                    blocklist: frozenset[str]
                    ) -> tuple[list[KnowledgeSnippet], int]:
    """Drop snippets containing a blocklisted token; order preserved."""
    if not blocklist:
        return list(snippets), 0
    kept = [s for s in snippets if not (set(tokenize(s.text)) & blocklist)]
    return kept, len(snippets) - len(kept)
