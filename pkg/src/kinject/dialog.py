"""Dialog turns, their JSON-lines serialization, and token encodings.

One encoding convention is shared by training, decoding and scoring:
each utterance is rendered as ``<user>``/``<system>`` speaker token,
then its word tokens, then ``<eos>``.  The decode context for a reply is
the encoded history followed by a bare ``<system>`` token, so the model
terminates replies with ``<eos>`` on its own.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DialogParseError
from .vocab import EOS, SPEAKER_SYSTEM, SPEAKER_USER, Vocab

SPEAKERS = ("user", "system")
_SPEAKER_TOKEN = {"user": SPEAKER_USER, "system": SPEAKER_SYSTEM}


@dataclass
class DialogTurn:
    speaker: str
    text: str

    def __post_init__(self) -> None:
        if self.speaker not in SPEAKERS:
            raise DialogParseError(f"unknown speaker {self.speaker!r}")


@dataclass
class DialogHistory:
    turns: list[DialogTurn] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.turns)

    def add(self, speaker: str, text: str) -> None:
        self.turns.append(DialogTurn(speaker, text))

    def trimmed(self, max_turns: int) -> "DialogHistory":
        """Last ``max_turns`` turns; ``max_turns <= 0`` keeps everything."""
        if max_turns <= 0 or len(self.turns) <= max_turns:
            return DialogHistory(list(self.turns))
        return DialogHistory(list(self.turns[-max_turns:]))

    def plain_text(self) -> str:
        return " ".join(t.text for t in self.turns)

    def to_json(self) -> str:
        obj = {"turns": [{"speaker": t.speaker, "text": t.text} for t in self.turns]}
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "DialogHistory":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DialogParseError(f"invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or "turns" not in obj:
            raise DialogParseError("dialog record must be an object with a 'turns' list")
        turns = obj["turns"]
        if not isinstance(turns, list):
            raise DialogParseError("'turns' must be a list")
        history = cls()
        for i, raw in enumerate(turns):
            if (not isinstance(raw, dict) or "speaker" not in raw
                    or "text" not in raw or not isinstance(raw["text"], str)):
                raise DialogParseError(f"turn {i} must have 'speaker' and 'text' strings")
            history.add(raw["speaker"], raw["text"])
        return history


def encode_history(vocab: Vocab, history: DialogHistory) -> list[int]:
    """Speaker-tagged, EOS-terminated token stream for all turns."""
    ids: list[int] = []
    for turn in history.turns:
        ids.append(_SPEAKER_TOKEN[turn.speaker])
        ids.extend(vocab.encode(turn.text))
        ids.append(EOS)
    return ids


def encode_context(vocab: Vocab, history: DialogHistory) -> list[int]:
    """Decode-ready context: encoded history plus an opening reply tag."""
    return encode_history(vocab, history) + [SPEAKER_SYSTEM]


def read_dialog_file(path: str) -> tuple[list[DialogHistory], int]:
    """All well-formed dialogs in a JSON-lines file plus the skip count."""
    dialogs: list[DialogHistory] = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                dialogs.append(DialogHistory.from_json(line))
            except DialogParseError:
                skipped += 1
    return dialogs, skipped
