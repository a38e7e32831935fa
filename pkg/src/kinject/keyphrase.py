"""Statistical key-phrase extraction over a dialog plus draft reply.

Content terms are scored from three corpus statistics — frequency, first
occurrence position, and sentence spread — and phrase scores combine
their member terms so that *lower means more important*.  Candidates are
1–4 token spans inside a sentence that neither start nor end with a
stopword, which also guarantees at least one content token.  Stopwords
*inside* a span are allowed but carry a fixed bad term score, so a span
stretched across function words must be carried by strong content terms
to outrank its contiguous-content rivals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dialog import DialogHistory
from .textmetrics import split_sentences, surface_tokens
from .vocab import Vocab

MAX_PHRASE_LEN = 4

# Term score assigned to stopword members.  Content terms land well
# below 1, so any value comfortably above (1 + sum) / sum of a typical
# member-score sum keeps interior stopwords from ever helping a phrase.
STOPWORD_SCORE = 5.0


@dataclass
class KeyPhrase:
    text: str    # surface form, original casing preserved
    score: float  # positive; lower = more important


def _term_scores(sentences: list[list[str]]) -> dict[str, float]:
    """Per-term importance S(t) > 0, lower = better."""
    tf: dict[str, int] = {}
    first_sent: dict[str, int] = {}
    sent_count: dict[str, int] = {}
    for si, sent in enumerate(sentences):
        seen: set[str] = set()
        for w in sent:
            tf[w] = tf.get(w, 0) + 1
            first_sent.setdefault(w, si)
            if w not in seen:
                seen.add(w)
                sent_count[w] = sent_count.get(w, 0) + 1
    if not tf:
        return {}
    counts = list(tf.values())
    mean_tf = sum(counts) / len(counts)
    var = sum((c - mean_tf) ** 2 for c in counts) / len(counts)
    denom = mean_tf + math.sqrt(var)
    n_sent = len(sentences)
    scores: dict[str, float] = {}
    for term, count in tf.items():
        tf_norm = count / denom if denom > 0 else float(count)
        position = math.log(2.0 + first_sent[term])
        spread = sent_count[term] / n_sent
        scores[term] = position / (1.0 + tf_norm + spread)
    return scores


def extract_keyphrases(vocab: Vocab, history: DialogHistory, initial_ids,
                       stopwords: frozenset[str],
                       max_phrases: int = 5) -> list[KeyPhrase]:
    """Top ``max_phrases`` phrases from the history and the draft reply."""
    if max_phrases < 1:
        raise ValueError(f"max_phrases must be >= 1, got {max_phrases}")
    texts = [turn.text for turn in history.turns]
    reply_text = vocab.surface_text(initial_ids)
    if reply_text:
        texts.append(reply_text)
    sentences: list[list[str]] = []
    for text in texts:
        for sent in split_sentences(text):
            words = surface_tokens(sent)
            if words:
                sentences.append(words)
    lowered = [[w.lower() for w in sent] for sent in sentences]
    term_score = _term_scores(lowered)
    if not term_score:
        return []

    phrase_tf: dict[tuple[str, ...], int] = {}
    surface: dict[tuple[str, ...], str] = {}
    order: list[tuple[str, ...]] = []
    for sent, low in zip(sentences, lowered):
        for n in range(1, MAX_PHRASE_LEN + 1):
            for i in range(len(sent) - n + 1):
                gram = tuple(low[i:i + n])
                if gram[0] in stopwords or gram[-1] in stopwords:
                    continue
                phrase_tf[gram] = phrase_tf.get(gram, 0) + 1
                if gram not in surface:
                    surface[gram] = " ".join(sent[i:i + n])
                    order.append(gram)

    phrases: list[KeyPhrase] = []
    for gram in order:
        member = [STOPWORD_SCORE if t in stopwords else term_score[t]
                  for t in gram]
        product = math.prod(member)
        score = product / (phrase_tf[gram] * (1.0 + sum(member)))
        phrases.append(KeyPhrase(text=surface[gram], score=score))
    phrases.sort(key=lambda p: (p.score, p.text.lower()))
    return phrases[:max_phrases]
