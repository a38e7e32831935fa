"""Token vocabulary with reserved control ids.

The file format is one token per line, line number = id; the reserved
control tokens always occupy the first seven lines so a vocab file is
self-describing.
"""

from __future__ import annotations

from collections.abc import Iterable

from .errors import FormatVersionError
from .textmetrics import tokenize

PAD, BOS, EOS, UNK, SPEAKER_USER, SPEAKER_SYSTEM, KNOWLEDGE_SEP = range(7)
RESERVED = ["<pad>", "<bos>", "<eos>", "<unk>", "<user>", "<system>", "<know>"]
SPECIAL_IDS = frozenset(range(len(RESERVED)))


class Vocab:
    def __init__(self, tokens: list[str]):
        if tokens[: len(RESERVED)] != RESERVED:
            raise FormatVersionError("vocab must start with the reserved tokens")
        if len(tokens) < 8:
            raise ValueError("vocab needs at least one non-reserved token")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocab tokens must be unique")
        self.id_to_token = list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, text: str) -> list[int]:
        """Plain word-token ids for ``text``; unknown words map to UNK."""
        return [self.token_to_id.get(t, UNK) for t in tokenize(text)]

    def decode(self, ids: Iterable[int], skip_special: bool = True) -> str:
        words = []
        for i in ids:
            if skip_special and i in SPECIAL_IDS:
                continue
            words.append(self.id_to_token[i])
        return " ".join(words)

    def surface_text(self, ids: Iterable[int]) -> str:
        """Rendered response text: stops at the first EOS, drops specials."""
        words = []
        for i in ids:
            if i == EOS:
                break
            if i in SPECIAL_IDS:
                continue
            words.append(self.id_to_token[i])
        return " ".join(words)


def build_vocab(texts: Iterable[str], min_count: int = 1) -> Vocab:
    counts: dict[str, int] = {}
    for text in texts:
        for tok in tokenize(text):
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted(t for t, c in counts.items() if c >= min_count)
    return Vocab(RESERVED + kept)


def save_vocab(vocab: Vocab, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.id_to_token:
            fh.write(tok + "\n")


def load_vocab(path: str) -> Vocab:
    with open(path, encoding="utf-8") as fh:
        tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    return Vocab(tokens)
