"""Steer a decoded reply toward a knowledge snippet via its hidden states.

Each round climbs the objective  alpha * log(consistency) - lambda * CE
by a normalized gradient step on the hidden-state matrix z (backward
pass), re-decodes and replays the perturbed states through the model
(forward pass), and blends the two:  z <- gamma * z_bw + (1-gamma) * z_fw.
With both weights zero or zero rounds, the reply is untouched — the
draft reply's own states are a fixed point of the forward replay.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entail import EntailmentHead, entail_prob
from .errors import NumericFailure
from .lm import HiddenSeq, LMParams, generating_states, output_logits
from .vocab import EOS

GRAD_NORM_FLOOR = 1e-12


@dataclass
class DecodeConfig:
    alpha: float = 1.0          # consistency weight
    lam: float = 1.0            # fidelity weight
    gamma: float = 0.45         # backward share in the state blend
    iterations: int = 5
    step_size: float = 0.02
    tau: float = 1.0
    max_len: int = 100
    deterministic_final: bool = True

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass
class CandidateResponse:
    tokens: list[int]
    kind: str               # "initial" or "injected"
    snippet_origin: str | None = None

    def trimmed(self) -> list[int]:
        """Tokens up to and including the first EOS."""
        if EOS in self.tokens:
            return self.tokens[: self.tokens.index(EOS) + 1]
        return list(self.tokens)


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    fidelity_ce: float        # before this round's update
    entail_logprob: float
    grad_norm: float
    fidelity_ce_after: float  # after this round's update


@dataclass
class InjectionTrace:
    snippet_origin: str
    iterations: list[IterationRecord] = field(default_factory=list)
    final_tokens: list[int] = field(default_factory=list)
    initial_ce: float = 0.0
    final_ce: float = 0.0


def fidelity_loss(snippet_ids, z: np.ndarray, w: np.ndarray
                  ) -> tuple[float, np.ndarray]:
    """Mean cross entropy pushing ``z`` to decode the snippet tokens.

    Aligned positions t = 0..min(len(snippet), len(z))-1 score logits
    ``w @ z_t`` (no temperature) against snippet token t; the returned
    gradient is zero beyond the aligned span.
    """
    snippet_ids = list(snippet_ids)
    if not snippet_ids:
        raise ValueError("cannot target an empty snippet")
    z = np.asarray(z, dtype=float)
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("z must be a non-empty (T, d) matrix")
    m = min(len(snippet_ids), z.shape[0])
    targets = np.asarray(snippet_ids[:m], dtype=np.intp)
    logits = z[:m] @ w.T
    shift = logits.max(axis=1, keepdims=True)
    exps = np.exp(logits - shift)
    norms = exps.sum(axis=1, keepdims=True)
    rows = np.arange(m)
    ce = float(np.mean((shift[:, 0] + np.log(norms[:, 0])) - logits[rows, targets]))
    dlogits = exps / norms
    dlogits[rows, targets] -= 1.0
    dlogits /= m
    grad = np.zeros_like(z)
    grad[:m] = dlogits @ w
    return ce, grad


def total_objective(params: LMParams, head: EntailmentHead, history_ids,
                    snippet_ids, z: np.ndarray, cfg: DecodeConfig
                    ) -> tuple[float, np.ndarray]:
    """alpha * log(consistency) - lambda * CE and its gradient w.r.t. z.

    Either term is skipped entirely when its weight is exactly zero, so
    a zero-weight objective returns an exactly zero gradient.
    """
    z = np.asarray(z, dtype=float)
    if cfg.alpha == 0.0 and cfg.lam == 0.0:
        return 0.0, np.zeros_like(z)
    value = 0.0
    grad = np.zeros_like(z)
    if cfg.alpha != 0.0:
        theta, dlog = entail_prob(params, head, z, history_ids)
        value += cfg.alpha * float(np.log(theta))
        grad += cfg.alpha * dlog
    if cfg.lam != 0.0:
        ce, dce = fidelity_loss(snippet_ids, z, params.embedding)
        value -= cfg.lam * ce
        grad -= cfg.lam * dce
    return value, grad


def backward_pass(z: np.ndarray, grad: np.ndarray, step_size: float,
                  iteration: int | None = None) -> np.ndarray:
    """Ascent step with each position's gradient row rescaled to unit
    norm; near-zero rows contribute nothing."""
    if not np.all(np.isfinite(grad)):
        raise NumericFailure("non-finite objective gradient",
                             {"iteration": iteration})
    norms = np.linalg.norm(grad, axis=1, keepdims=True)
    scaled = np.where(norms >= GRAD_NORM_FLOOR, grad / np.maximum(norms, GRAD_NORM_FLOOR), 0.0)
    return z + step_size * scaled


def forward_pass(params: LMParams, history_ids, z: np.ndarray) -> np.ndarray:
    """Re-anchor perturbed states to the model: hard-decode every
    position, then replay those tokens teacher-forced after the history.
    The result has the same length as ``z``."""
    z = np.asarray(z, dtype=float)
    if z.shape[0] == 0:
        raise ValueError("z must be non-empty")
    tokens = np.argmax(z @ params.embedding.T, axis=1).tolist()
    return generating_states(params, list(history_ids), tokens)


def inject(params: LMParams, head: EntailmentHead, history_ids,
           initial_tokens: list[int], initial_states: HiddenSeq,
           snippet_ids, cfg: DecodeConfig, origin: str = "",
           seed: int = 0) -> tuple[CandidateResponse, InjectionTrace]:
    """Full backward/forward refinement of one reply toward one snippet."""
    z = np.array(initial_states.states, dtype=float, copy=True)
    if z.shape[0] != len(initial_tokens):
        raise ValueError("initial states and tokens are inconsistent")
    trace = InjectionTrace(snippet_origin=origin)
    ce_current, dce = fidelity_loss(snippet_ids, z, params.embedding)
    trace.initial_ce = float(ce_current)
    for it in range(cfg.iterations):
        theta, dlog = entail_prob(params, head, z, history_ids)
        # Same assembly as total_objective: a zero weight contributes
        # exactly nothing to the value or the gradient.
        value = 0.0
        grad = np.zeros_like(z)
        if cfg.alpha != 0.0:
            value += cfg.alpha * float(np.log(theta))
            grad += cfg.alpha * dlog
        if cfg.lam != 0.0:
            value -= cfg.lam * ce_current
            grad -= cfg.lam * dce
        z_bw = backward_pass(z, grad, cfg.step_size, iteration=it)
        z_fw = forward_pass(params, history_ids, z_bw)
        z = cfg.gamma * z_bw + (1.0 - cfg.gamma) * z_fw
        ce_next, dce_next = fidelity_loss(snippet_ids, z, params.embedding)
        trace.iterations.append(IterationRecord(
            iteration=it,
            objective=float(value),
            fidelity_ce=float(ce_current),
            entail_logprob=float(np.log(theta)),
            grad_norm=float(np.linalg.norm(grad)),
            fidelity_ce_after=float(ce_next),
        ))
        ce_current, dce = ce_next, dce_next
    trace.final_ce = float(ce_current)
    if cfg.deterministic_final:
        tokens = [int(t) for t in np.argmax(output_logits(params, z), axis=1)]
    else:
        logits = output_logits(params, z)
        shift = logits.max(axis=1, keepdims=True)
        probs = np.exp(logits - shift)
        probs /= probs.sum(axis=1, keepdims=True)
        rng = np.random.default_rng(seed)
        tokens = []
        for p in probs:
            k = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
            tokens.append(min(k, p.shape[0] - 1))
    trace.final_tokens = tokens
    candidate = CandidateResponse(tokens=tokens, kind="injected", snippet_origin=origin)
    return candidate, trace
