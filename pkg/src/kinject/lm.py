"""Tiny recurrent language model with tied input/output embeddings.

A single-layer gated recurrent unit over word ids.  The same (V, d)
matrix embeds input tokens and produces output logits (``states @ W.T``
divided by a temperature).  All sequence-advancing code paths share one
cached per-token pre-activation table so that stepwise decoding and
batched teacher-forced replay of the same tokens produce bitwise
identical hidden states.

Hidden-state convention used throughout: row ``t`` of a state matrix for
a sequence is the *generating* state — the state from which token ``t``
is emitted, i.e. the state after consuming the context plus tokens
``0 .. t-1``.  Under greedy decoding this makes ``argmax(W @ z_t)`` equal
the emitted token, a property the constrained decoder relies on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatVersionError, InvalidTokenError, NumericFailure
from .lmkernels import gru_backward, gru_forward
from .vocab import EOS

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class LMParams:
    """Model weights.  ``embedding`` is tied: input lookup and output
    projection use the same matrix."""

    embedding: np.ndarray  # (V, d)
    w_in: np.ndarray       # (d, 3d) input-side gate projections
    u_rec: np.ndarray      # (d, 3d) recurrent gate projections
    b_gate: np.ndarray     # (3d,)
    tau: float = 1.0
    _pre: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def vocab_size(self) -> int:
        return self.embedding.shape[0]

    @property
    def dim(self) -> int:
        return self.embedding.shape[1]

    def pre_table(self) -> np.ndarray:
        """(V, 3d) input-side pre-activations for every token id, cached.

        Both the stepwise decode loop and batched replay index rows out
        of this one table, which keeps their recurrence inputs bitwise
        identical.
        """
        if self._pre is None:
            self._pre = self.embedding @ self.w_in + self.b_gate
        return self._pre

    def invalidate(self) -> None:
        self._pre = None

    def clone(self) -> "LMParams":
        return LMParams(
            embedding=self.embedding.copy(),
            w_in=self.w_in.copy(),
            u_rec=self.u_rec.copy(),
            b_gate=self.b_gate.copy(),
            tau=self.tau,
        )


@dataclass
class HiddenSeq:
    """Generating states for a token sequence: row t emits token t."""

    states: np.ndarray  # (T, d)
    origin: str = ""


def init_params(vocab_size: int, dim: int = 64, seed: int = 0,
                scale: float = 0.1) -> LMParams:
    rng = np.random.default_rng(seed)
    return LMParams(
        embedding=rng.normal(0.0, scale, size=(vocab_size, dim)),
        w_in=rng.normal(0.0, scale, size=(dim, 3 * dim)),
        u_rec=rng.normal(0.0, scale, size=(dim, 3 * dim)),
        b_gate=np.zeros(3 * dim),
    )


def zero_params(vocab_size: int, dim: int = 64) -> LMParams:
    """All-zero weights: every conditional distribution is uniform."""
    return LMParams(
        embedding=np.zeros((vocab_size, dim)),
        w_in=np.zeros((dim, 3 * dim)),
        u_rec=np.zeros((dim, 3 * dim)),
        b_gate=np.zeros(3 * dim),
    )


def _check_ids(params: LMParams, ids) -> list[int]:
    out = list(ids)
    v = params.vocab_size
    for i in out:
        if not 0 <= i < v:
            raise InvalidTokenError(f"token id {i} outside vocabulary of size {v}")
    return out


def run_states(params: LMParams, ids, h0: np.ndarray | None = None) -> np.ndarray:
    """States after consuming each of ``ids`` in order: shape (len(ids), d)."""
    ids = _check_ids(params, ids)
    if h0 is None:
        h0 = np.zeros(params.dim)
    if not ids:
        return np.zeros((0, params.dim))
    pre = params.pre_table()[np.asarray(ids, dtype=np.intp)]
    return gru_forward(pre, params.u_rec, h0)


def state_after(params: LMParams, ids, h0: np.ndarray | None = None) -> np.ndarray:
    """Single state after consuming all of ``ids`` (h0 / zeros if empty)."""
    if h0 is None:
        h0 = np.zeros(params.dim)
    if not list(ids):
        return np.asarray(h0, dtype=float).copy()
    return run_states(params, ids, h0)[-1]


def generating_states(params: LMParams, context_ids, seq_ids,
                      h0: np.ndarray | None = None) -> np.ndarray:
    """Row t = state that emits ``seq_ids[t]`` after ``context_ids``."""
    context_ids = _check_ids(params, context_ids)
    seq_ids = _check_ids(params, seq_ids)
    if h0 is None:
        h0 = np.zeros(params.dim)
    t = len(seq_ids)
    if t == 0:
        return np.zeros((0, params.dim))
    consumed = context_ids + seq_ids[:-1]
    states = run_states(params, consumed, h0)
    full = np.vstack([h0[None, :], states])
    return full[len(context_ids):len(context_ids) + t]


def output_logits(params: LMParams, states: np.ndarray,
                  apply_tau: bool = True) -> np.ndarray:
    """(T, V) logits from (T, d) states; optionally temperature-scaled."""
    logits = states @ params.embedding.T
    if apply_tau:
        logits = logits / params.tau
    return logits


def forward(params: LMParams, context_ids) -> tuple[HiddenSeq, np.ndarray]:
    """Teacher-forced pass over ``context_ids``: the generating state for
    each position and its temperature-scaled logits."""
    context_ids = _check_ids(params, context_ids)
    if not context_ids:
        raise ValueError("forward requires a non-empty token sequence")
    states = generating_states(params, [], context_ids)
    return HiddenSeq(states=states, origin="model-decoded"), output_logits(params, states)


def _log_softmax_picks(logits: np.ndarray, ids: list[int]) -> np.ndarray:
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return logits[np.arange(len(ids)), ids] - lse


def token_log_probs(params: LMParams, seq_ids, context_ids=(),
                    h0: np.ndarray | None = None) -> np.ndarray:
    """Per-position conditional log-probabilities of ``seq_ids``."""
    seq_ids = _check_ids(params, seq_ids)
    if not seq_ids:
        return np.zeros(0)
    states = generating_states(params, context_ids, seq_ids, h0=h0)
    logits = output_logits(params, states)
    return _log_softmax_picks(logits, seq_ids)


def log_prob(params: LMParams, seq_ids, context_ids=(),
             h0: np.ndarray | None = None) -> float:
    """Total conditional log-probability, summed with compensated addition."""
    return math.fsum(token_log_probs(params, seq_ids, context_ids, h0=h0).tolist())


def _step(params: LMParams, h: np.ndarray, token_id: int) -> np.ndarray:
    pre = params.pre_table()[token_id][None, :]
    return gru_forward(pre, params.u_rec, h)[-1]


def greedy_decode(params: LMParams, context_ids, max_len: int = 100
                  ) -> tuple[list[int], HiddenSeq]:
    """Argmax decoding until EOS or ``max_len`` tokens.

    Returns the emitted ids (EOS included when reached) and their
    generating states, recomputed in one batched replay so downstream
    consumers see exactly the states a teacher-forced replay would.
    """
    context_ids = _check_ids(params, context_ids)
    h = state_after(params, context_ids)
    seq: list[int] = []
    for _ in range(max_len):
        logits = (params.embedding @ h) / params.tau
        tok = int(np.argmax(logits))
        seq.append(tok)
        if tok == EOS:
            break
        h = _step(params, h, tok)
    states = generating_states(params, context_ids, seq)
    return seq, HiddenSeq(states=states, origin="model-decoded")


def sample_nucleus(params: LMParams, context_ids, rng: np.random.Generator,
                   max_len: int = 100, top_p: float = 0.95) -> list[int]:
    """Top-p sampling.  Candidates are ordered by descending probability
    with ties broken by ascending token id, so as ``top_p`` approaches 0
    the sampler degenerates to greedy decoding."""
    if not 0.0 < top_p <= 1.0:
        raise ValueError(f"top_p must be in (0, 1], got {top_p}")
    context_ids = _check_ids(params, context_ids)
    h = state_after(params, context_ids)
    seq: list[int] = []
    for _ in range(max_len):
        logits = (params.embedding @ h) / params.tau
        shifted = logits - logits.max()
        probs = np.exp(shifted)
        probs /= probs.sum()
        order = np.argsort(-probs, kind="stable")
        cdf = np.cumsum(probs[order])
        keep = int(np.searchsorted(cdf, top_p, side="left")) + 1
        keep = min(keep, len(order))
        kept = probs[order[:keep]]
        kept = kept / kept.sum()
        u = rng.random()
        pick = int(np.searchsorted(np.cumsum(kept), u, side="right"))
        pick = min(pick, keep - 1)
        tok = int(order[pick])
        seq.append(tok)
        if tok == EOS:
            break
        h = _step(params, h, tok)
    return seq


def grads_like(params: LMParams) -> LMParams:
    return zero_params(params.vocab_size, params.dim)


def lm_loss_and_grads(params: LMParams, sequences: list[list[int]],
                      contexts: list[list[int]] | None = None
                      ) -> tuple[float, LMParams]:
    """Mean cross-entropy over the batch and its parameter gradients.

    Per sequence the loss is the mean per-token cross-entropy (position 0
    is predicted from the start state); the batch loss is the mean of the
    per-sequence losses.  Gradients flow through both roles of the tied
    embedding matrix.
    """
    if not sequences:
        raise ValueError("empty batch")
    if contexts is None:
        contexts = [[] for _ in sequences]
    if len(contexts) != len(sequences):
        raise ValueError("contexts and sequences length mismatch")
    v, d = params.vocab_size, params.dim
    w = params.embedding
    grads = grads_like(params)
    losses = []
    n = len(sequences)
    h0 = np.zeros(d)
    for ctx, seq in zip(contexts, sequences):
        ctx = _check_ids(params, ctx)
        seq = _check_ids(params, seq)
        if not seq:
            raise ValueError("cannot score an empty sequence")
        t_seq, c = len(seq), len(ctx)
        consumed = ctx + seq[:-1]
        idx = np.asarray(consumed, dtype=np.intp)
        x = w[idx]                                     # (C+T-1, d)
        pre = x @ params.w_in + params.b_gate
        h_all, cache = gru_forward(pre, params.u_rec, h0, want_cache=True)
        gen = np.vstack([h0[None, :], h_all])[c:c + t_seq]
        logits = gen @ w.T / params.tau                # (T, V)
        m = logits.max(axis=1, keepdims=True)
        exps = np.exp(logits - m)
        z = exps.sum(axis=1, keepdims=True)
        probs = exps / z
        rows = np.arange(t_seq)
        ce = (m[:, 0] + np.log(z[:, 0])) - logits[rows, seq]
        losses.append(float(ce.mean()))

        dlogits = probs.copy()
        dlogits[rows, seq] -= 1.0
        dlogits /= t_seq * n
        grads.embedding += dlogits.T @ gen / params.tau
        dgen = dlogits @ w / params.tau                # (T, d)

        if len(consumed) > 0:
            dh_all = np.zeros_like(h_all)
            for t in range(t_seq):
                pos = c + t - 1
                if pos >= 0:
                    dh_all[pos] += dgen[t]
                # pos == -1 is the fixed start state: nothing to train.
            dpre, dqrec, _ = gru_backward(dh_all, params.u_rec, h0, h_all, cache)
            h_prev = np.vstack([h0[None, :], h_all[:-1]])
            grads.u_rec += h_prev.T @ dqrec
            dx = dpre @ params.w_in.T
            grads.w_in += x.T @ dpre
            grads.b_gate += dpre.sum(axis=0)
            np.add.at(grads.embedding, idx, dx)
    return float(np.mean(losses)), grads


def _grad_norm(grads: LMParams) -> float:
    total = 0.0
    for a in (grads.embedding, grads.w_in, grads.u_rec, grads.b_gate):
        total += float(np.sum(a * a))
    return math.sqrt(total)


def train_lm(params: LMParams, sequences: list[list[int]], epochs: int = 10,
             lr: float = 0.5, batch_size: int = 16, clip: float = 5.0,
             seed: int = 0, contexts: list[list[int]] | None = None
             ) -> tuple[LMParams, list[float]]:
    """Plain SGD with gradient-norm clipping.  Returns a trained copy of
    ``params`` and the per-epoch mean batch loss; ``epochs=0`` is a no-op
    copy."""
    work = params.clone()
    if contexts is None:
        contexts = [[] for _ in sequences]
    rng = np.random.default_rng(seed)
    history: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(len(sequences))
        batch_losses = []
        for start in range(0, len(order), batch_size):
            chosen = order[start:start + batch_size]
            batch_seq = [sequences[i] for i in chosen]
            batch_ctx = [contexts[i] for i in chosen]
            loss, grads = lm_loss_and_grads(work, batch_seq, batch_ctx)
            if not math.isfinite(loss):
                raise NumericFailure("non-finite training loss",
                                     {"epoch": epoch, "batch_start": int(start)})
            gnorm = _grad_norm(grads)
            scale = lr if gnorm <= clip else lr * clip / gnorm
            work.embedding -= scale * grads.embedding
            work.w_in -= scale * grads.w_in
            work.u_rec -= scale * grads.u_rec
            work.b_gate -= scale * grads.b_gate
            work.invalidate()
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))
        logger.info("epoch %d: loss %.4f", epoch, history[-1])
    return work, history


def save_params(params: LMParams, path: str) -> None:
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.int64(CHECKPOINT_VERSION),
            embedding=params.embedding,
            w_in=params.w_in,
            u_rec=params.u_rec,
            b_gate=params.b_gate,
            tau=np.float64(params.tau),
        )


def load_params(path: str, expected_vocab_size: int | None = None) -> LMParams:
    with np.load(path) as data:
        if "format_version" not in data or int(data["format_version"]) != CHECKPOINT_VERSION:
            raise FormatVersionError(f"unsupported checkpoint format in {path}")
        params = LMParams(
            embedding=data["embedding"].copy(),
            w_in=data["w_in"].copy(),
            u_rec=data["u_rec"].copy(),
            b_gate=data["b_gate"].copy(),
            tau=float(data["tau"]),
        )
    if expected_vocab_size is not None and params.vocab_size != expected_vocab_size:
        raise ConfigError(
            f"checkpoint vocabulary size {params.vocab_size} does not match "
            f"vocabulary file size {expected_vocab_size}"
        )
    return params
