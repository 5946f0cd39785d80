"""ctxv-export command line: export / export-static."""

from __future__ import annotations

import argparse
import sys

from .backends import ModelLoadError
from .export import (ExportJob, InputFormatError, TokenizationMismatch,
                     export_context_vectors, export_static_vectors)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        print(f"error: {self.prog}: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(prog="ctxv-export",
                             description="Export contextual word vectors")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True,
                       help="hash:<d_ext>[:<seed>] or a transformers model id/path")
        p.add_argument("--input", required=True,
                       help="TSV: id<TAB>tokens, one sentence per line")
        p.add_argument("--output", required=True)
        p.add_argument("--layer", default="last",
                       help="'last' or a hidden-layer index (default: last)")

    p = sub.add_parser("export", help="write a CTXV1 file")
    common(p)
    p.set_defaults(runner=export_context_vectors, kind="ctxv1")

    p = sub.add_parser("export-static", help="write COUNT DIM text vectors")
    common(p)
    p.set_defaults(runner=export_static_vectors, kind="static")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code or 1
    layer = args.layer if args.layer == "last" else int(args.layer)
    job = ExportJob(args.model, args.input, args.output, layer)
    try:
        count = args.runner(job)
    except (InputFormatError, TokenizationMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ModelLoadError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {count} {'records' if args.kind == 'ctxv1' else 'vectors'} "
          f"to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
