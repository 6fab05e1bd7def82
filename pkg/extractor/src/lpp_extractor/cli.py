"""Extractor command line.

Subcommands: `contextual`, `static`, `pll`, plus `smoke-model` to build the
self-contained local test checkpoint. All read utterance JSON lines and write
ENC1 matrices with sidecars into --out.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .contextual import extract_contextual
from .corpus import load_utterances
from .pll import extract_pll
from .static_vectors import extract_static


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpp-extract")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--utterances", type=Path, required=True,
                        help="utterance JSON-lines file")
    common.add_argument("--model", type=Path, required=True,
                        help="local model directory (or vector model file)")
    common.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("contextual", parents=[common])
    p.add_argument("--layers", type=int, nargs="*", default=None)
    p.add_argument("--device", default="cpu")
    p.add_argument("--max-tokens", type=int, default=None)

    sub.add_parser("static", parents=[common])

    p = sub.add_parser("pll", parents=[common])
    p.add_argument("--device", default="cpu")
    p.add_argument("--max-tokens", type=int, default=None)

    p = sub.add_parser("smoke-model")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "smoke-model":
            from .smoke import build_smoke_model, train_smoke_tokenizer
            tokenizer = train_smoke_tokenizer(args.out)
            build_smoke_model(args.out, tokenizer, seed=args.seed)
            print(f"smoke model written to {args.out}")
            return 0
        utterances = load_utterances(args.utterances)
        if args.subcommand == "contextual":
            summary = extract_contextual(utterances, args.model, args.out,
                                         layers=args.layers, device=args.device,
                                         max_tokens=args.max_tokens)
            print(f"{summary.n_words} words x {summary.hidden_size} dims, "
                  f"{summary.n_layers} layer files, {len(summary.dropped)} dropped")
        elif args.subcommand == "static":
            out = extract_static(utterances, args.model, args.out)
            print(f"static matrix written to {out}")
        elif args.subcommand == "pll":
            summary = extract_pll(utterances, args.model, args.out,
                                  device=args.device, max_tokens=args.max_tokens)
            print(f"{summary.n_tokens} tokens x {summary.n_layers} layers")
    except Exception as e:  # noqa: BLE001
        print(f"lpp-extract: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
