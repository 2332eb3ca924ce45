"""CLI: dump pooled sentence embeddings to the EMBD interchange format."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionError, extract_embeddings
from .pooling import POOLING_MODES


def build_parser():
    parser = argparse.ArgumentParser(
        prog="embex",
        description="Pool sentence embeddings from a transformer encoder and "
                    "write them as an EMBD file plus an aligned sentence copy.")
    parser.add_argument("--model", required=True,
                        help="Hugging Face model id or local checkpoint directory")
    parser.add_argument("--sentences", required=True, help="one sentence per line")
    parser.add_argument("--pooling", choices=POOLING_MODES, default="last2avg")
    parser.add_argument("--max-len", type=int, default=64)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--out", required=True, help="output EMBD path")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        n = extract_embeddings(args.model, args.sentences, args.pooling,
                               args.out, max_len=args.max_len,
                               batch_size=args.batch_size)
    except ExtractionError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    print(f"wrote {n} embeddings ({args.pooling}) to {args.out}")
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
