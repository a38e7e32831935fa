#!/usr/bin/env python3
"""Train the toy fixture artifacts (vocab, language model, consistency
head, retrieval index) from the bundled corpus and write a ready-to-use
config next to them.

The test suite trains its own copy into a temporary directory; this
script exists for hand-driven runs of the CLI, e.g.

    python3 scripts/build_artifacts.py --out build/fixture-artifacts
    python3 -m kinject.cli respond --config build/fixture-artifacts/fixture.cfg \
        --dialogs fixtures/eval_dialogs.jsonl
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "fixtures"))

import fixturelib


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--dialogs", default=str(fixturelib.DIALOGS),
                        help="training dialog corpus (jsonl)")
    parser.add_argument("--reviews", default=str(fixturelib.REVIEWS),
                        help="review snippet corpus (tsv)")
    parser.add_argument("--lm-epochs", type=int, default=fixturelib.LM_EPOCHS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = (lambda _msg: None) if args.quiet else print

    start = time.time()
    result = fixturelib.build_artifacts(
        out_dir, dialogs_path=args.dialogs, reviews_path=args.reviews,
        lm_epochs=args.lm_epochs, seed=args.seed, log=log)
    cfg_path = out_dir / "fixture.cfg"
    fixturelib.write_fixture_config(cfg_path, result)
    log(f"artifacts written to {out_dir} in {time.time() - start:.1f}s")
    log(f"config: {cfg_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
