"""Pick the best reply: diversity plus likelihood, each standardized.

Every candidate (the injected rewrites and always the untouched draft)
gets a distinct-bigram ratio and a conditional log-likelihood given the
history.  Each column is Z-normalized with the population deviation over
the candidate set — a zero-deviation column contributes nothing — and
the two standardized scores are summed.  Including the draft in the pool
means the winner can never score below it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .injection import CandidateResponse
from .lm import LMParams, log_prob
from .textmetrics import distinct_n
from .vocab import SPECIAL_IDS


@dataclass
class RankedCandidate:
    candidate: CandidateResponse
    distinct2: float
    cond_loglik: float
    z_distinct2: float
    z_loglik: float
    combined: float
    rank: int


# Combined scores are rounded to this many decimals before ordering.
# Standardized scores sit at unit scale, so anything below the rounding
# unit is float noise; collapsing it to a true tie keeps the ordering
# stable under rescalings of the raw columns and lets ties resolve by
# likelihood rather than by accumulated rounding error.
COMBINED_DECIMALS = 9


def _zscores(values: np.ndarray) -> np.ndarray:
    std = float(np.std(values))
    if std == 0.0:
        return np.zeros_like(values)
    return (values - float(np.mean(values))) / std


def score_candidates(scorer: LMParams, history_ids,
                     candidates: list[CandidateResponse]
                     ) -> list[RankedCandidate]:
    """All candidates scored, standardized, and sorted best-first.

    Ties on the combined score go to the higher conditional
    log-likelihood, then to the earlier input position.
    """
    if not candidates:
        raise ValueError("no candidates to rank")
    history_ids = list(history_ids)
    distinct = np.zeros(len(candidates))
    loglik = np.zeros(len(candidates))
    for i, cand in enumerate(candidates):
        trimmed = cand.trimmed()
        content = [t for t in trimmed if t not in SPECIAL_IDS]
        distinct[i] = distinct_n(content, 2)
        loglik[i] = log_prob(scorer, trimmed, history_ids) if trimmed else 0.0
    z_d = _zscores(distinct)
    z_l = _zscores(loglik)
    combined = np.round(z_d + z_l, COMBINED_DECIMALS)
    order = sorted(range(len(candidates)),
                   key=lambda i: (-combined[i], -loglik[i], i))
    ranked = []
    for rank, i in enumerate(order, start=1):
        ranked.append(RankedCandidate(
            candidate=candidates[i],
            distinct2=float(distinct[i]),
            cond_loglik=float(loglik[i]),
            z_distinct2=float(z_d[i]),
            z_loglik=float(z_l[i]),
            combined=float(combined[i]),
            rank=rank,
        ))
    return ranked


def select_final(ranked: list[RankedCandidate]) -> CandidateResponse:
    """The rank-1 candidate."""
    if not ranked:
        raise ValueError("empty ranking")
    return ranked[0].candidate
