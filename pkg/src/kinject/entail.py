"""Consistency head: does a candidate reply agree with its dialog history?

A logistic layer over three cheap features of a (history, reply) pair:
the reply's mean-pooled hidden states, the history's mean-pooled word
embeddings, and the elementwise product of the two after the history
vector is projected into state space by the scorer's own candidate-gate
block.  The product term is what lets a linear readout detect
*agreement* between history and reply rather than scoring each side
separately.  Because the logit is linear in the pooled states, the
gradient of the log probability with respect to each hidden-state row
has a closed form, and the constrained decoder can fold this head into
its objective analytically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatVersionError, NumericFailure
from .lm import LMParams, generating_states
from .vocab import SPECIAL_IDS

logger = logging.getLogger(__name__)

HEAD_VERSION = 1


@dataclass
class EntailmentHead:
    w_state: np.ndarray  # (d,) weights over mean-pooled hidden states
    w_hist: np.ndarray   # (d,) weights over mean-pooled history embeddings
    w_cross: np.ndarray  # (d,) weights over the state x history product
    bias: float = 0.0

    @property
    def dim(self) -> int:
        return self.w_state.shape[0]

    def clone(self) -> "EntailmentHead":
        return EntailmentHead(self.w_state.copy(), self.w_hist.copy(),
                              self.w_cross.copy(), self.bias)


def zero_head(dim: int) -> EntailmentHead:
    return EntailmentHead(np.zeros(dim), np.zeros(dim), np.zeros(dim), 0.0)


def init_head(dim: int, seed: int = 0, scale: float = 0.1) -> EntailmentHead:
    rng = np.random.default_rng(seed)
    return EntailmentHead(
        w_state=rng.normal(0.0, scale, size=dim),
        w_hist=rng.normal(0.0, scale, size=dim),
        w_cross=rng.normal(0.0, scale, size=dim),
        bias=0.0,
    )


def _pool_history(params: LMParams, history_ids) -> np.ndarray:
    """Mean embedding of the history's word tokens (specials excluded)."""
    content = [i for i in history_ids if i not in SPECIAL_IDS]
    if not content:
        return np.zeros(params.dim)
    return params.embedding[np.asarray(content, dtype=np.intp)].mean(axis=0)


def _history_features(params: LMParams, history_ids
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Pooled history embedding and its state-space projection.

    The projection reuses the candidate-gate third of the scorer's input
    matrix, i.e. the same map the recurrence applies to incoming words,
    so the product feature compares like with like.
    """
    pooled = _pool_history(params, history_ids)
    d = params.dim
    projected = np.tanh(pooled @ params.w_in[:, 2 * d:3 * d])
    return pooled, projected


def _score(head: EntailmentHead, fz: np.ndarray, fh: np.ndarray,
           fhc: np.ndarray) -> float:
    return float(head.w_state @ fz + head.w_hist @ fh
                 + head.w_cross @ (fz * fhc) + head.bias)


def entail_logit(params: LMParams, head: EntailmentHead, z: np.ndarray,
                 history_ids) -> float:
    fh, fhc = _history_features(params, history_ids)
    return _score(head, z.mean(axis=0), fh, fhc)


def entail_prob(params: LMParams, head: EntailmentHead, z: np.ndarray,
                history_ids) -> tuple[float, np.ndarray]:
    """Probability that the reply behind ``z`` is consistent with the
    history, and the gradient of its log w.r.t. every row of ``z``.

    ``z`` is a (T, d) matrix of hidden states, T >= 1.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("z must be a non-empty (T, d) matrix")
    fh, fhc = _history_features(params, history_ids)
    s = _score(head, z.mean(axis=0), fh, fhc)
    theta = 1.0 / (1.0 + math.exp(-s))
    # d log(theta) / d z_t = (1 - theta) (w_state + w_cross * fhc) / T,
    # the same vector for every row.
    row = (1.0 - theta) * (head.w_state + head.w_cross * fhc) / z.shape[0]
    grad = np.tile(row, (z.shape[0], 1))
    return theta, grad


@dataclass
class EntailmentPair:
    history_ids: list[int]
    response_ids: list[int]
    label: int  # 1 consistent, 0 not


def _featurize(params: LMParams, pair: EntailmentPair
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = generating_states(params, pair.history_ids, pair.response_ids)
    pooled_z = z.mean(axis=0) if z.shape[0] else np.zeros(params.dim)
    fh, fhc = _history_features(params, pair.history_ids)
    return pooled_z, fh, fhc


def train_entailment(params: LMParams, head: EntailmentHead,
                     pairs: list[EntailmentPair], epochs: int = 40,
                     lr: float = 0.2, seed: int = 0
                     ) -> tuple[EntailmentHead, list[float]]:
    """Binary cross-entropy SGD on a trained copy of ``head``.

    Features are precomputed once (the language model is frozen here).
    Returns the head and per-epoch mean loss; ``epochs=0`` is a no-op copy.
    """
    if not pairs:
        raise ValueError("no training pairs")
    work = head.clone()
    feats = [_featurize(params, p) for p in pairs]
    labels = np.array([p.label for p in pairs], dtype=float)
    rng = np.random.default_rng(seed)
    history: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(len(pairs))
        losses = []
        for i in order:
            fz, fh, fhc = feats[i]
            s = _score(work, fz, fh, fhc)
            theta = 1.0 / (1.0 + math.exp(-s))
            y = labels[i]
            eps = 1e-12
            loss = -(y * math.log(theta + eps) + (1 - y) * math.log(1 - theta + eps))
            if not math.isfinite(loss):
                raise NumericFailure("non-finite consistency-head loss",
                                     {"epoch": epoch, "pair": int(i)})
            err = theta - y
            work.w_state -= lr * err * fz
            work.w_hist -= lr * err * fh
            work.w_cross -= lr * err * (fz * fhc)
            work.bias -= lr * err
            losses.append(loss)
        history.append(float(np.mean(losses)))
        logger.info("consistency head epoch %d: loss %.4f", epoch, history[-1])
    return work, history


def evaluate_entailment(params: LMParams, head: EntailmentHead,
                        pairs: list[EntailmentPair]) -> float:
    """Accuracy of thresholding the head at 0.5 over labeled pairs."""
    if not pairs:
        raise ValueError("no evaluation pairs")
    correct = 0
    for pair in pairs:
        fz, fh, fhc = _featurize(params, pair)
        predicted = 1 if _score(head, fz, fh, fhc) > 0 else 0
        correct += int(predicted == pair.label)
    return correct / len(pairs)


# Utterances inconsistent with any history: negation-heavy denials used
# to synthesize hard negatives alongside cross-dialog mismatches.
CONTRADICTIONS = (
    "no that is wrong there is nothing like that",
    "i do not know anything about that and it does not exist",
    "that is not available and never was",
    "nothing here matches and i cannot help with that",
)


def synthesize_pairs(vocab, dialogs, seed: int = 0,
                     ) -> list[EntailmentPair]:
    """Labeled (history, reply) pairs from whole dialogs.

    For every system turn with preceding context: one positive (the true
    reply), one cross-dialog negative (a reply lifted from a different
    dialog), and one templated denial negative.
    """
    from .dialog import DialogHistory, encode_context
    from .vocab import EOS as _EOS

    rng = np.random.default_rng(seed)
    slots = []
    for di, dia in enumerate(dialogs):
        for ti, turn in enumerate(dia.turns):
            if turn.speaker == "system" and ti >= 1:
                slots.append((di, ti))
    pairs: list[EntailmentPair] = []

    def encode_reply(text: str) -> list[int]:
        return vocab.encode(text) + [_EOS]

    for si, (di, ti) in enumerate(slots):
        context = encode_context(vocab, DialogHistory(dialogs[di].turns[:ti]))
        true_reply = dialogs[di].turns[ti].text
        pairs.append(EntailmentPair(context, encode_reply(true_reply), 1))
        foreign = [s for s in slots if s[0] != di]
        if foreign:
            fj, ft = foreign[int(rng.integers(len(foreign)))]
            other = dialogs[fj].turns[ft].text
            pairs.append(EntailmentPair(context, encode_reply(other), 0))
        denial = CONTRADICTIONS[si % len(CONTRADICTIONS)]
        pairs.append(EntailmentPair(context, encode_reply(denial), 0))
    return pairs


def save_head(head: EntailmentHead, path: str) -> None:
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.int64(HEAD_VERSION),
            w_state=head.w_state,
            w_hist=head.w_hist,
            w_cross=head.w_cross,
            bias=np.float64(head.bias),
        )


def load_head(path: str, expected_dim: int | None = None) -> EntailmentHead:
    with np.load(path) as data:
        if "format_version" not in data or int(data["format_version"]) != HEAD_VERSION:
            raise FormatVersionError(f"unsupported consistency-head format in {path}")
        head = EntailmentHead(
            w_state=data["w_state"].copy(),
            w_hist=data["w_hist"].copy(),
            w_cross=data["w_cross"].copy(),
            bias=float(data["bias"]),
        )
    if expected_dim is not None and head.dim != expected_dim:
        raise ConfigError(
            f"consistency head dimension {head.dim} does not match model dimension "
            f"{expected_dim}"
        )
    return head
