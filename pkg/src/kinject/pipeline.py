"""One full turn: draft, gather, select, steer, rank.

The Runner loads every artifact once and then serves turns: greedy
draft reply, knowledge pool from both sources, blocklist filter,
determinantal selection, per-snippet constrained decoding, standardized
ranking with the draft always in the pool.  Every stage appends one
JSON-able record to the trace; records carry no timestamps so the same
seed and inputs reproduce the trace byte for byte.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

from . import entail as entail_mod
from . import lm as lm_mod
from . import tfidf
from .config import PipelineConfig
from .dialog import DialogHistory, encode_context, encode_history, read_dialog_file
from .errors import (ConfigError, DialogParseError, NumericFailure,
                     SourceUnavailableError)
from .injection import CandidateResponse, InjectionTrace, inject
from .keyphrase import extract_keyphrases
from .knowledge import (LocalGenerator, RemoteGenerator, encode_snippet,
                        filter_snippets, nonparametric_snippets,
                        parametric_snippets)
from .ranking import score_candidates, select_final
from .selection import build_kernel, greedy_map, score_pool, selection_logdets
from .textmetrics import corpus_distinct_n, corpus_entr, distinct_n, tokenize
from .vocab import Vocab, load_vocab

SCHEMA_VERSION = 1


@dataclass
class Artifacts:
    vocab: Vocab
    model: lm_mod.LMParams
    scorer: lm_mod.LMParams
    head: entail_mod.EntailmentHead
    index: tfidf.TfIdfIndex
    stopwords: frozenset[str]
    blocklist: frozenset[str]


def _read_token_file(path: str) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


def _bundled_stopwords() -> frozenset[str]:
    text = resources.files("kinject").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


def load_artifacts(cfg: PipelineConfig) -> Artifacts:
    """Load everything a Runner needs; missing files name their path."""
    def require(name: str, value: str | None) -> str:
        if value is None:
            raise ConfigError(f"config key {name} is required")
        return value

    def must_exist(kind: str, path: str):
        try:
            return open(path, "rb")
        except OSError as exc:
            raise ConfigError(f"cannot open {kind} file {path}: {exc}") from exc

    vocab_path = require("vocab_path", cfg.vocab_path)
    with must_exist("vocabulary", vocab_path):
        pass
    vocab = load_vocab(vocab_path)

    model_path = require("model_path", cfg.model_path)
    with must_exist("model checkpoint", model_path):
        pass
    model = lm_mod.load_params(model_path, expected_vocab_size=len(vocab))

    scorer_path = cfg.scorer_path or model_path
    if scorer_path == model_path:
        scorer = model
    else:
        with must_exist("scorer checkpoint", scorer_path):
            pass
        scorer = lm_mod.load_params(scorer_path, expected_vocab_size=len(vocab))

    head_path = require("head_path", cfg.head_path)
    with must_exist("consistency head", head_path):
        pass
    head = entail_mod.load_head(head_path, expected_dim=model.dim)

    index_path = require("index_path", cfg.index_path)
    with must_exist("retrieval index", index_path):
        pass
    index = tfidf.load_index(index_path)

    if cfg.stopwords_path is not None:
        try:
            stopwords = _read_token_file(cfg.stopwords_path)
        except OSError as exc:
            raise ConfigError(
                f"cannot open stopword file {cfg.stopwords_path}: {exc}") from exc
    else:
        stopwords = _bundled_stopwords()

    if cfg.blocklist_path is not None:
        try:
            blocklist = _read_token_file(cfg.blocklist_path)
        except OSError as exc:
            raise ConfigError(
                f"cannot open blocklist file {cfg.blocklist_path}: {exc}") from exc
    else:
        blocklist = frozenset()

    return Artifacts(vocab=vocab, model=model, scorer=scorer, head=head,
                     index=index, stopwords=stopwords, blocklist=blocklist)


def _injection_record(pool_index: int, trace: InjectionTrace, skipped: bool,
                      error: str | None) -> dict:
    return {
        "stage": "injection",
        "schema_version": SCHEMA_VERSION,
        "snippet_index": pool_index,
        "origin": trace.snippet_origin,
        "skipped": skipped,
        "error": error,
        "initial_ce": trace.initial_ce,
        "final_ce": trace.final_ce,
        "final_tokens": trace.final_tokens,
        "iterations": [
            {
                "iteration": r.iteration,
                "objective": r.objective,
                "fidelity_ce": r.fidelity_ce,
                "entail_logprob": r.entail_logprob,
                "grad_norm": r.grad_norm,
                "fidelity_ce_after": r.fidelity_ce_after,
            }
            for r in trace.iterations
        ],
    }


class Runner:
    """Loaded artifacts plus config, serving respond() calls."""

    def __init__(self, cfg: PipelineConfig, artifacts: Artifacts | None = None):
        cfg.validate()
        self.cfg = cfg
        self.artifacts = artifacts if artifacts is not None else load_artifacts(cfg)
        if cfg.generator_url:
            self.generator = RemoteGenerator(
                cfg.generator_url, top_p=cfg.nucleus_p, max_len=cfg.max_len)
        else:
            self.generator = LocalGenerator(
                self.artifacts.model, self.artifacts.vocab,
                top_p=cfg.nucleus_p, max_len=cfg.max_len)

    def respond(self, history: DialogHistory,
                stop_after_selection: bool = False) -> tuple[str, list[dict]]:
        """Final reply text and the per-stage trace for one turn.

        With ``stop_after_selection`` the injections and ranking are
        skipped and the draft reply is returned (debugging aid).
        """
        if not history:
            raise DialogParseError("history must contain at least one turn")
        cfg = self.cfg
        art = self.artifacts
        vocab = art.vocab
        trace: list[dict] = [{
            "stage": "config",
            "schema_version": SCHEMA_VERSION,
            "config": cfg.as_dict(),
        }]

        trimmed = history.trimmed(cfg.max_history_turns)
        ctx_ids = encode_context(vocab, trimmed)
        hist_ids = encode_history(vocab, trimmed)
        initial_tokens, initial_states = lm_mod.greedy_decode(
            art.model, ctx_ids, cfg.max_len)
        initial_text = vocab.surface_text(initial_tokens)
        trace.append({
            "stage": "initial",
            "schema_version": SCHEMA_VERSION,
            "tokens": initial_tokens,
            "text": initial_text,
        })

        phrases = extract_keyphrases(vocab, trimmed, initial_tokens,
                                     art.stopwords, cfg.max_phrases)
        trace.append({
            "stage": "keyphrases",
            "schema_version": SCHEMA_VERSION,
            "phrases": [{"text": p.text, "score": p.score} for p in phrases],
            "no_phrases": not phrases,
        })

        nonparam = nonparametric_snippets(
            art.index, trimmed.plain_text(), initial_text, cfg.n_nonparametric)
        parametric_unavailable = False
        try:
            param, _ = parametric_snippets(
                art.scorer, vocab, phrases, hist_ids, cfg.per_phrase,
                cfg.seed, self.generator)
        except SourceUnavailableError:
            param = []
            parametric_unavailable = True
        pool = nonparam + param
        filtered, dropped = filter_snippets(pool, art.blocklist)
        trace.append({
            "stage": "acquisition",
            "schema_version": SCHEMA_VERSION,
            "nonparametric": len(nonparam),
            "parametric": len(param),
            "parametric_unavailable": parametric_unavailable,
            "dropped": dropped,
            "snippets": [
                {"text": s.text, "source": s.source, "origin": s.origin,
                 "raw_score": s.raw_score}
                for s in filtered
            ],
        })

        target_ids = [vocab.encode(s.text) for s in filtered]
        keep = [i for i, ids in enumerate(target_ids) if ids]
        filtered = [filtered[i] for i in keep]
        target_ids = [target_ids[i] for i in keep]
        score_ids = [encode_snippet(vocab, s.text) for s in filtered]

        no_injection = not filtered
        selected: list[int] = []
        selection_record = {
            "stage": "selection",
            "schema_version": SCHEMA_VERSION,
            "no_injection": no_injection,
            "rel": [],
            "red": [],
            "beta_used": None,
            "jitter_used": None,
            "selected": [],
            "logdets": [],
        }
        if filtered:
            scores = score_pool(art.scorer, score_ids, hist_ids)
            kernel = build_kernel(scores, cfg.beta_init)
            selected = greedy_map(kernel, cfg.select_size)
            selection_record.update({
                "rel": [float(v) for v in scores.rel],
                "red": [[float(v) for v in row] for row in scores.red],
                "beta_used": kernel.beta_used,
                "jitter_used": kernel.jitter_used,
                "selected": selected,
                "logdets": selection_logdets(kernel, selected),
            })
            if not selected:
                no_injection = True
                selection_record["no_injection"] = True
        trace.append(selection_record)
        if stop_after_selection:
            return initial_text, trace

        initial_candidate = CandidateResponse(
            tokens=list(initial_tokens), kind="initial")
        candidates = [initial_candidate]
        decode_cfg = cfg.decode()

        def run_one(pool_idx: int):
            snippet = filtered[pool_idx]
            try:
                candidate, inj_trace = inject(
                    art.model, art.head, ctx_ids, initial_tokens,
                    initial_states, target_ids[pool_idx], decode_cfg,
                    origin=snippet.origin, seed=cfg.seed)
                return candidate, inj_trace, None
            except NumericFailure as exc:
                return None, InjectionTrace(snippet_origin=snippet.origin), str(exc)

        if selected:
            if cfg.workers > 1:
                with ThreadPoolExecutor(max_workers=cfg.workers) as pool_exec:
                    results = list(pool_exec.map(run_one, selected))
            else:
                results = [run_one(i) for i in selected]
            for pool_idx, (candidate, inj_trace, error) in zip(selected, results):
                skipped = candidate is None
                trace.append(_injection_record(pool_idx, inj_trace, skipped, error))
                if candidate is not None:
                    candidates.append(candidate)

        ranked = score_candidates(art.scorer, ctx_ids, candidates)
        trace.append({
            "stage": "ranking",
            "schema_version": SCHEMA_VERSION,
            "table": [
                {
                    "kind": r.candidate.kind,
                    "origin": r.candidate.snippet_origin,
                    "tokens": r.candidate.trimmed(),
                    "text": vocab.surface_text(r.candidate.tokens),
                    "distinct2": r.distinct2,
                    "cond_loglik": r.cond_loglik,
                    "z_distinct2": r.z_distinct2,
                    "z_loglik": r.z_loglik,
                    "combined": r.combined,
                    "rank": r.rank,
                }
                for r in ranked
            ],
        })

        winner = select_final(ranked)
        final_text = vocab.surface_text(winner.tokens)
        trace.append({
            "stage": "final",
            "schema_version": SCHEMA_VERSION,
            "text": final_text,
            "tokens": winner.trimmed(),
            "no_injection": no_injection,
        })
        return final_text, trace

    def select_debug(self, history: DialogHistory) -> dict:
        """Selection internals for one turn, without running injections."""
        _, trace = self.respond(history, stop_after_selection=True)
        return next(r for r in trace if r["stage"] == "selection")


def serialize_trace(trace: list[dict]) -> str:
    """Canonical JSON-lines text; identical runs serialize identically."""
    return "".join(
        json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
        for record in trace
    )


def evaluate(runner: Runner, dialog_path: str) -> dict:
    """Respond to every dialog in a file; report diversity both ways.

    Each dialog contributes one (draft, final) reply pair.  Metrics are
    reported per set: the mean per-reply distinct-bigram ratio, the
    pooled corpus distinct-bigram ratio, and pooled n-gram entropy,
    plus the mean ranking-score lift of the winner over the draft.
    """
    dialogs, skipped = read_dialog_file(dialog_path)
    initial_texts: list[str] = []
    final_texts: list[str] = []
    lifts: list[float] = []
    for history in dialogs:
        final_text, trace = runner.respond(history)
        initial_text = next(r["text"] for r in trace if r["stage"] == "initial")
        table = next(r["table"] for r in trace if r["stage"] == "ranking")
        initial_combined = next(row["combined"] for row in table
                                if row["kind"] == "initial")
        winner_combined = next(row["combined"] for row in table if row["rank"] == 1)
        lifts.append(winner_combined - initial_combined)
        initial_texts.append(initial_text)
        final_texts.append(final_text)

    def metrics(texts: list[str]) -> dict:
        token_seqs = [tokenize(t) for t in texts]
        per_response = [distinct_n(seq, 2) for seq in token_seqs]
        return {
            "mean_distinct2": (sum(per_response) / len(per_response)
                               if per_response else 0.0),
            "corpus_distinct2": corpus_distinct_n(token_seqs, 2),
            "entr": corpus_entr(token_seqs),
        }

    return {
        "dialogs": len(dialogs),
        "skipped": skipped,
        "initial": metrics(initial_texts),
        "final": metrics(final_texts),
        "mean_combined_lift": (sum(lifts) / len(lifts)) if lifts else 0.0,
        "initial_responses": initial_texts,
        "final_responses": final_texts,
    }
