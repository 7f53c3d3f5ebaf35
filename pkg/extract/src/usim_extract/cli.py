"""Command line for the extraction tool.

    usim-extract --instances i.jsonl --encoder bert-base-uncased \
        --layers last4 --out bundles.jsonl [--context-vectors]

Exit codes: 0 success, 1 usage error, 2 extraction error.
"""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractError, ExtractionSpec, extract, extract_context_vectors


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="usim-extract",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--instances", required=True,
                        help="instances JSONL (tokens + target_index per line)")
    parser.add_argument("--encoder", required=True,
                        help="model name or local path loadable by transformers")
    parser.add_argument("--layers", default="last4",
                        help="top, last4, all, or comma-separated hidden-state indices")
    parser.add_argument("--out", required=True, help="bundle JSONL to write")
    parser.add_argument("--context-vectors", action="store_true",
                        help="also write blank-slot context vectors (mask token)")
    parser.add_argument("--context-only", action="store_true",
                        help="write only context vectors, no per-token layers")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    spec = ExtractionSpec(encoder=args.encoder, layers=args.layers,
                          batch_size=args.batch_size, device=args.device)
    try:
        if args.context_only:
            written = extract_context_vectors(args.instances, spec, args.out)
        else:
            written = extract(args.instances, spec, args.out,
                              with_context=args.context_vectors)
    except FileNotFoundError as exc:
        print(f"usim-extract: missing file: {exc.filename}", file=sys.stderr)
        return 2
    except ExtractError as exc:
        print(f"usim-extract: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {written} bundles to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
