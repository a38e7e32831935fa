"""Command-line entry points for every pipeline stage.

Subcommands: ingest (build the retrieval index), train-lm, train-entail,
respond (one turn), chat (REPL), eval (batch metrics), select-debug
(selection internals).  Exit codes: 0 success, 2 configuration or
artifact problem, 3 input parse problem, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import entail as entail_mod
from . import lm as lm_mod
from . import tfidf
from .config import PipelineConfig, load_config, set_key
from .dialog import DialogHistory, encode_history, read_dialog_file
from .errors import (ConfigError, DialogParseError, FormatVersionError,
                     KinjectError, NumericFailure, SourceUnavailableError)
from .pipeline import Runner, evaluate, serialize_trace
from .vocab import build_vocab, load_vocab, save_vocab

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4


def _add_config_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key = value config file")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override one config key (repeatable)")


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return load_config(args.config, overrides)


def _load_history(args: argparse.Namespace) -> DialogHistory:
    if args.text is not None:
        history = DialogHistory()
        history.add("user", args.text)
        return history
    if args.dialogs is None:
        raise ConfigError("provide --text or --dialogs")
    dialogs, _ = read_dialog_file(args.dialogs)
    if not 0 <= args.line < len(dialogs):
        raise DialogParseError(
            f"dialog line {args.line} out of range (file has {len(dialogs)} dialogs)")
    return dialogs[args.line]


def cmd_ingest(args: argparse.Namespace) -> int:
    documents = list(tfidf.read_corpus_file(args.corpus))
    index = tfidf.ingest(documents)
    tfidf.save_index(index, args.out)
    print(f"ingested {index.doc_count} snippets "
          f"({index.report.skipped_empty} empty skipped) -> {args.out}")
    return EXIT_OK


def cmd_train_lm(args: argparse.Namespace) -> int:
    dialogs, skipped = read_dialog_file(args.dialogs)
    if not dialogs:
        raise DialogParseError(f"no dialogs in {args.dialogs}")
    texts = [turn.text for d in dialogs for turn in d.turns]
    if args.vocab_in:
        vocab = load_vocab(args.vocab_in)
    else:
        vocab = build_vocab(texts, min_count=args.min_count)
    sequences = [encode_history(vocab, d) for d in dialogs]
    params = lm_mod.init_params(len(vocab), dim=args.dim, seed=args.seed)
    trained, history = lm_mod.train_lm(
        params, sequences, epochs=args.epochs, lr=args.lr,
        batch_size=args.batch_size, seed=args.seed)
    lm_mod.save_params(trained, args.out)
    if args.vocab_out:
        save_vocab(vocab, args.vocab_out)
    first = history[0] if history else float("nan")
    last = history[-1] if history else float("nan")
    print(f"trained on {len(sequences)} dialogs ({skipped} skipped), "
          f"vocab {len(vocab)}, loss {first:.4f} -> {last:.4f}")
    return EXIT_OK


def cmd_train_entail(args: argparse.Namespace) -> int:
    dialogs, skipped = read_dialog_file(args.dialogs)
    if not dialogs:
        raise DialogParseError(f"no dialogs in {args.dialogs}")
    vocab = load_vocab(args.vocab)
    params = lm_mod.load_params(args.model, expected_vocab_size=len(vocab))
    pairs = entail_mod.synthesize_pairs(vocab, dialogs, seed=args.seed)
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(pairs))
    split = max(1, int(0.8 * len(pairs)))
    train_pairs = [pairs[i] for i in order[:split]]
    val_pairs = [pairs[i] for i in order[split:]] or train_pairs
    head = entail_mod.init_head(params.dim, seed=args.seed)
    trained, history = entail_mod.train_entailment(
        params, head, train_pairs, epochs=args.epochs, lr=args.lr,
        seed=args.seed)
    accuracy = entail_mod.evaluate_entailment(params, trained, val_pairs)
    entail_mod.save_head(trained, args.out)
    first = history[0] if history else float("nan")
    last = history[-1] if history else float("nan")
    print(f"trained on {len(train_pairs)} pairs ({skipped} dialogs skipped), "
          f"loss {first:.4f} -> {last:.4f}, validation accuracy {accuracy:.3f}")
    return EXIT_OK


def cmd_respond(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    history = _load_history(args)
    runner = Runner(cfg)
    final_text, trace = runner.respond(history)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write(serialize_trace(trace))
    print(final_text)
    return EXIT_OK


def cmd_chat(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    runner = Runner(cfg)
    history = DialogHistory()
    show_trace = False
    print("type /quit to exit, /trace to toggle snippet display")
    while True:
        try:
            line = input("you> ")
        except EOFError:
            break
        line = line.strip()
        if not line:
            continue
        if line == "/quit":
            break
        if line == "/trace":
            show_trace = not show_trace
            print(f"trace display {'on' if show_trace else 'off'}")
            continue
        history.add("user", line)
        try:
            final_text, trace = runner.respond(history)
        except KinjectError as exc:
            print(f"error: {exc}")
            continue
        if show_trace:
            acquisition = next(r for r in trace if r["stage"] == "acquisition")
            selection = next(r for r in trace if r["stage"] == "selection")
            for idx in selection["selected"]:
                snippet = acquisition["snippets"][idx]
                print(f"  [{snippet['source']}] {snippet['text']}")
        history.add("system", final_text)
        print(f"bot> {final_text}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    runner = Runner(cfg)
    report = evaluate(runner, args.dialogs)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK


def cmd_select_debug(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    history = _load_history(args)
    runner = Runner(cfg)
    record = runner.select_debug(history)
    print(json.dumps(record, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinject",
        description="knowledge-injected response generation")
    parser.add_argument("--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a retrieval index from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train-lm", help="train the reply model on dialogs")
    p.add_argument("--dialogs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab-out")
    p.add_argument("--vocab-in")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("train-entail", help="train the consistency head")
    p.add_argument("--dialogs", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_entail)

    p = sub.add_parser("respond", help="produce one reply")
    _add_config_args(p)
    p.add_argument("--text", help="single user utterance as the whole history")
    p.add_argument("--dialogs", help="JSON-lines dialog file")
    p.add_argument("--line", type=int, default=0, help="dialog index in the file")
    p.add_argument("--trace", help="write the JSON-lines trace here")
    p.set_defaults(func=cmd_respond)

    p = sub.add_parser("chat", help="interactive loop")
    _add_config_args(p)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("eval", help="batch metrics over a dialog file")
    _add_config_args(p)
    p.add_argument("--dialogs", required=True)
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("select-debug", help="print selection internals")
    _add_config_args(p)
    p.add_argument("--text")
    p.add_argument("--dialogs")
    p.add_argument("--line", type=int, default=0)
    p.set_defaults(func=cmd_select_debug)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, FormatVersionError, SourceUnavailableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DialogParseError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
