"""Build trained toy artifacts (vocab, scorer, entailment head, index).

Shared by ``scripts/build_artifacts.py`` and the test suite so both train
exactly the same models from the generated corpora.

The one substantive trick lives in :func:`training_streams`: a slice of
the language-model training streams is prefixed with knowledge blocks --
``<know> review words <eos>`` -- quoting reviews about the entity the
dialog concerns.  A scorer trained this way genuinely profits from
conditioning on related knowledge (the block names the entity, and entity
pairs are otherwise indistinguishable from the user's request alone), so
relevance scores of matched snippets come out positive.  Streams with two
blocks always quote the same entity, which teaches the model that
same-entity knowledge is mutually predictable -- the redundancy signal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from kinject.dialog import DialogHistory, encode_history, read_dialog_file
from kinject.entail import (evaluate_entailment, init_head, save_head,
                            synthesize_pairs, train_entailment, CONTRADICTIONS)
from kinject.knowledge import encode_snippet
from kinject.lm import init_params, save_params, train_lm
from kinject.tfidf import ingest, read_corpus_file, save_index
from kinject.vocab import Vocab, build_vocab, save_vocab

FIXTURE_DIR = Path(__file__).resolve().parent
DIALOGS = FIXTURE_DIR / "dialogs.jsonl"
REVIEWS = FIXTURE_DIR / "reviews.tsv"
EVAL_DIALOGS = FIXTURE_DIR / "eval_dialogs.jsonl"

DIM = 96
LM_EPOCHS = 120
LM_LR = 0.5
ENTAIL_EPOCHS = 60
KNOW_PREFIX_PROB = 0.7
TWO_BLOCK_PROB = 0.5


@dataclass
class BuildResult:
    vocab_path: str
    model_path: str
    head_path: str
    index_path: str
    vocab_size: int
    lm_losses: list[float]
    entail_val_accuracy: float


def read_reviews(path: str | Path = REVIEWS) -> list[tuple[str, str, str]]:
    """Raw (id, tag, text) rows of the review corpus."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for rec in csv.reader(fh, delimiter="\t"):
            if len(rec) == 3:
                rows.append((rec[0], rec[1], rec[2]))
    return rows


def reviews_by_entity(rows: list[tuple[str, str, str]]) -> dict[str, list[str]]:
    """Review texts grouped by the entity slug in their domain tag."""
    grouped: dict[str, list[str]] = {}
    for _, tag, text in rows:
        slug = tag.split(":", 1)[1] if ":" in tag else tag
        grouped.setdefault(slug, []).append(text)
    return grouped


def match_entity(text: str, slugs: list[str]) -> str | None:
    """The slug whose surface name occurs in ``text`` (longest name wins)."""
    best = None
    for slug in slugs:
        name = slug.replace("-", " ")
        if name in text and (best is None or len(name) > len(best.replace("-", " "))):
            best = slug
    return best


def fixture_vocab(dialogs: list[DialogHistory],
                  review_rows: list[tuple[str, str, str]]) -> Vocab:
    texts = [t.text for d in dialogs for t in d.turns]
    texts += [text for _, _, text in review_rows]
    texts += list(CONTRADICTIONS)
    return build_vocab(texts, min_count=1)


def training_streams(vocab: Vocab, dialogs: list[DialogHistory],
                     grouped: dict[str, list[str]], seed: int = 0,
                     know_prob: float = KNOW_PREFIX_PROB) -> list[list[int]]:
    rng = np.random.default_rng(seed)
    slugs = sorted(grouped)
    streams: list[list[int]] = []
    for dialog in dialogs:
        ids = encode_history(vocab, dialog)
        prefix: list[int] = []
        slug = match_entity(dialog.plain_text(), slugs)
        if slug is not None and rng.random() < know_prob:
            pool = grouped[slug]
            count = 2 if rng.random() < TWO_BLOCK_PROB else 1
            picks = rng.choice(len(pool), size=min(count, len(pool)), replace=False)
            for j in picks:
                prefix += encode_snippet(vocab, pool[j])
        streams.append(prefix + ids)
    return streams


def split_dialogs(dialogs: list[DialogHistory], fold: int = 5
                  ) -> tuple[list[DialogHistory], list[DialogHistory]]:
    """Deterministic interleaved train/validation split (every ``fold``-th)."""
    train = [d for i, d in enumerate(dialogs) if i % fold != 0]
    val = [d for i, d in enumerate(dialogs) if i % fold == 0]
    return train, val


def build_artifacts(out_dir: str | Path, dialogs_path: str | Path = DIALOGS,
                    reviews_path: str | Path = REVIEWS, dim: int = DIM,
                    lm_epochs: int = LM_EPOCHS, seed: int = 0,
                    log=None) -> BuildResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dialogs, skipped = read_dialog_file(str(dialogs_path))
    if skipped:
        raise ValueError(f"{skipped} malformed dialog records in {dialogs_path}")
    review_rows = read_reviews(reviews_path)

    vocab = fixture_vocab(dialogs, review_rows)
    grouped = reviews_by_entity(review_rows)
    streams = training_streams(vocab, dialogs, grouped, seed=seed)

    params = init_params(len(vocab), dim=dim, seed=seed)
    params, losses = train_lm(params, streams, epochs=lm_epochs, lr=LM_LR,
                              seed=seed)
    if log:
        log(f"scorer: vocab={len(vocab)} loss {losses[0]:.3f} -> {losses[-1]:.3f}")

    train_d, val_d = split_dialogs(dialogs)
    train_pairs = synthesize_pairs(vocab, train_d, seed=seed)
    val_pairs = synthesize_pairs(vocab, val_d, seed=seed + 1)
    head = init_head(dim, seed=seed)
    head, _ = train_entailment(params, head, train_pairs,
                               epochs=ENTAIL_EPOCHS, seed=seed)
    accuracy = evaluate_entailment(params, head, val_pairs)
    if log:
        log(f"entailment: {len(train_pairs)} train pairs, "
            f"val accuracy {accuracy:.3f}")

    index = ingest(read_corpus_file(str(reviews_path)))

    vocab_path = out / "vocab.txt"
    model_path = out / "model.npz"
    head_path = out / "head.npz"
    index_path = out / "index.json"
    save_vocab(vocab, str(vocab_path))
    save_params(params, str(model_path))
    save_head(head, str(head_path))
    save_index(index, str(index_path))

    return BuildResult(
        vocab_path=str(vocab_path), model_path=str(model_path),
        head_path=str(head_path), index_path=str(index_path),
        vocab_size=len(vocab), lm_losses=losses,
        entail_val_accuracy=accuracy)


CONFIG_TEMPLATE = """\
# Reduced-size settings for the bundled toy corpus: small candidate pools
# and a short decode keep a full response under a few seconds.
vocab_path = {vocab}
model_path = {model}
head_path = {head}
index_path = {index}
n_nonparametric = 12
per_phrase = 1
max_phrases = 2
select_size = 3
max_len = 40
seed = 0
# The toy recurrent model lives at a much smaller logit scale than the
# full-size networks the default was tuned for, so the state nudge needs
# to be larger before a decoded token ever changes.
step_size = 0.3
"""


def write_fixture_config(path: str | Path, result: BuildResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CONFIG_TEMPLATE.format(
            vocab=result.vocab_path, model=result.model_path,
            head=result.head_path, index=result.index_path))
