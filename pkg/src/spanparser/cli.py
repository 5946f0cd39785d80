"""Command-line interface: train, parse, evaluate, ensemble, significance,
gradcheck, and inspect-vectors.

Exit codes: 0 success, 1 usage errors, 2 data-format errors, 3 numeric
failure (diverged loss / failed gradient check). Every run echoes its
resolved configuration and seed on stderr. A ``--config`` file supplies
``key=value`` defaults ('#' starts a comment); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        raise CliError(f"{self.prog}: {message}", EXIT_USAGE)


def read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value", EXIT_DATA)
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


_CONFIG_COERCE = {
    "seed": int, "batch-size": int, "epochs": int, "eval-interval": int,
    "d-model": int, "d-hidden": int, "num-layers": int, "num-heads": int,
    "d-ff": int, "resamples": int, "max-len": int, "warmup": int,
    "lr": float, "dropout": float, "target-f1": float, "sampling-exponent": float,
    "lowercase": lambda v: v.lower() in ("1", "true", "yes"),
}


def apply_config_defaults(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Fill flags still at their parser default from the --config file."""
    if not getattr(args, "config", None):
        return
    file_values = read_config_file(args.config)
    for key, raw in file_values.items():
        if key.startswith("lang."):
            continue  # language table, consumed by the train command
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise CliError(f"--config: unknown key {key!r}", EXIT_USAGE)
        if getattr(args, attr) == parser_defaults.get(attr):
            coerce = _CONFIG_COERCE.get(key, str)
            setattr(args, attr, coerce(raw))


def _echo_config(args: argparse.Namespace) -> None:
    shown = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print(f"# spanparser {args.command}: config={json.dumps(shown, default=str)} "
          f"seed={getattr(args, 'seed', 0)}", file=sys.stderr)


def _encoder_mode(flag: str) -> str:
    return {"scratch": "scratch", "static": "static_vectors",
            "context": "context_vectors"}[flag]


def _language_specs(args) -> list:
    from .training import LanguageSpec

    specs = []
    file_values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for spec_str in args.languages:
        parts = spec_str.split(":")
        if len(parts) < 2:
            raise CliError(f"language spec {spec_str!r} must be code:train[:dev]",
                           EXIT_USAGE)
        code, train_path = parts[0], parts[1]
        dev_path = parts[2] if len(parts) > 2 else None
        spec = LanguageSpec(code, train_path, dev_path)
        prefix = f"lang.{code}."
        for key, value in file_values.items():
            if not key.startswith(prefix):
                continue
            field = key[len(prefix):].replace("-", "_")
            if field not in ("train_path", "dev_path", "static_vectors",
                             "train_vectors", "dev_vectors"):
                raise CliError(f"--config: unknown language key {key!r}", EXIT_USAGE)
            setattr(spec, field, value)
        if args.vectors:
            if args.mode == "static":
                spec.static_vectors = args.vectors
            elif args.mode == "context":
                spec.train_vectors = spec.train_vectors or args.vectors
                spec.dev_vectors = spec.dev_vectors or args.vectors
        specs.append(spec)
    return specs


def cmd_train(args) -> int:
    from .encoder import EncoderConfig
    from .training import DivergedLoss, TrainConfig, train

    specs = _language_specs(args)
    mode = args.train_mode
    if mode == "auto":
        mode = "mono" if len(specs) == 1 else ("paired" if len(specs) == 2 else "joint")
    encoder = EncoderConfig(
        num_layers=args.num_layers, d_model=args.d_model, num_heads=args.num_heads,
        d_ff=args.d_ff, dropout=args.dropout, mode=_encoder_mode(args.mode),
        d_ext=args.d_ext, max_len=args.max_len, lowercase=args.lowercase,
        add_word_embeddings=args.add_word_embeddings,
    )
    config = TrainConfig(
        languages=specs, out_dir=args.out, mode=mode, encoder=encoder,
        d_hidden=args.d_hidden, batch_size=args.batch_size, lr=args.lr,
        epochs=args.epochs, eval_interval=args.eval_interval, seed=args.seed,
        sampling_exponent=args.sampling_exponent, warmup_steps=args.warmup,
        target_f1=args.target_f1,
    )
    try:
        result = train(config)
    except DivergedLoss as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"checkpoint={result.checkpoint_path} log={result.log_path} "
          f"steps={result.steps} best_mean_dev_f1={result.best_mean:.2f}")
    return 0


def _external_for_line(model, words, vectors, line_idx):
    from .encoder import align_subwords, external_from_static
    from .vectors import WordCountMismatch

    if model.config.mode == "scratch":
        return None
    if model.config.mode == "static_vectors":
        dim, table = vectors
        return external_from_static(words, table, dim, model.config.lowercase)
    records = vectors
    rec = records.get(str(line_idx))
    if rec is None:
        from .encoder import MissingVectors
        raise MissingVectors(str(line_idx))
    if len(rec.word_end_indices) != len(words):
        raise WordCountMismatch(str(line_idx), len(rec.word_end_indices), len(words))
    return align_subwords(rec, "last")


def _load_vectors_arg(model, path):
    from .vectors import load_static_vectors, read_ctxv1

    if model.config.mode == "scratch":
        return None
    if path is None:
        raise CliError("this checkpoint needs --vectors", EXIT_USAGE)
    if model.config.mode == "static_vectors":
        return load_static_vectors(path)
    _, records = read_ctxv1(path)
    return records


def _parse_stream(models, lang, vectors_list, lines, out=None) -> int:
    from .decoder import cky_decode
    from .scorer import ensemble_chart
    from .model import chart_for
    from .trees import expand_unaries, serialize

    if out is None:
        out = sys.stdout
    for idx, line in enumerate(lines):
        words = line.split()
        try:
            if not words:
                raise ValueError("empty input line")
            charts = [
                chart_for(m, lang, words, _external_for_line(m, words, v, idx),
                          sentence_id=str(idx))
                for m, v in zip(models, vectors_list)
            ]
            chart = charts[0] if len(charts) == 1 else ensemble_chart(charts)
            tree = expand_unaries(cky_decode(chart, [(w, "XX") for w in words]))
            out.write(serialize(tree) + "\n")
        except Exception as exc:  # keep output aligned with input
            fallback = " ".join(f"(XX {w})" for w in (words or ["_"]))
            out.write(f"(TOP {fallback})\n")
            print(f"warning: line {idx}: {exc}", file=sys.stderr)
    return 0


def cmd_parse(args) -> int:
    from .model import load_model

    model = load_model(args.model)
    if args.lang is None:
        if len(model.heads) != 1:
            raise CliError("--lang required for a multilingual checkpoint", EXIT_USAGE)
        args.lang = next(iter(model.heads))
    if args.lang not in model.heads:
        raise CliError(f"checkpoint has no head for language {args.lang!r}",
                       EXIT_USAGE)
    vectors = _load_vectors_arg(model, args.vectors)
    lines = [ln.rstrip("\n") for ln in (sys.stdin if args.input is None
                                        else open(args.input, encoding="utf-8"))]
    return _parse_stream([model], args.lang, [vectors], lines)


def cmd_ensemble(args) -> int:
    from .model import load_model

    paths = [p for p in args.models.split(",") if p]
    if not paths:
        raise CliError("--models requires at least one checkpoint", EXIT_USAGE)
    models = [load_model(p) for p in paths]
    if args.lang is None:
        if len(models[0].heads) != 1:
            raise CliError("--lang required for a multilingual checkpoint", EXIT_USAGE)
        args.lang = next(iter(models[0].heads))
    for path, m in zip(paths, models):
        if args.lang not in m.heads:
            raise CliError(f"{path}: no head for language {args.lang!r}", EXIT_USAGE)
    vectors_list = [_load_vectors_arg(m, args.vectors) for m in models]
    lines = [ln.rstrip("\n") for ln in (sys.stdin if args.input is None
                                        else open(args.input, encoding="utf-8"))]
    return _parse_stream(models, args.lang, vectors_list, lines)


def _ignore_set(args):
    from .evaluation import DEFAULT_IGNORE

    if args.ignore_labels is None:
        return DEFAULT_IGNORE
    return frozenset(x for x in args.ignore_labels.split(",") if x)


def cmd_evaluate(args) -> int:
    from .evaluation import labeled_prf
    from .trees import load_treebank

    gold = load_treebank(args.gold)
    pred = load_treebank(args.pred)
    report = labeled_prf(gold, pred, _ignore_set(args))
    print(f"P={report.precision:.2f} R={report.recall:.2f} F1={report.f1:.2f} "
          f"exact={report.exact_match:.2f} n={len(report.per_sentence)}")
    return 0


def cmd_significance(args) -> int:
    from .evaluation import bootstrap_significance
    from .trees import load_treebank

    gold = load_treebank(args.gold)
    pred_a = load_treebank(args.pred_a)
    pred_b = load_treebank(args.pred_b)
    result = bootstrap_significance(gold, pred_a, pred_b,
                                    resamples=args.resamples, seed=args.seed,
                                    ignore_labels=_ignore_set(args))
    print(f"delta={result.observed_delta:.4f} p={result.p_value:.4f} "
          f"resamples={result.resamples}")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import op_battery, pipeline_battery

    worst = op_battery(draws=args.draws, seed=args.seed)
    failed = False
    for name in sorted(worst):
        status = "ok" if worst[name] < 1e-4 else "FAIL"
        if status == "FAIL":
            failed = True
        print(f"{name}: max_rel_err={worst[name]:.3e} {status}")
    pipeline_err = pipeline_battery(draws=max(1, args.draws // 10), seed=args.seed)
    status = "ok" if pipeline_err < 1e-4 else "FAIL"
    if status == "FAIL":
        failed = True
    print(f"pipeline: max_rel_err={pipeline_err:.3e} {status}")
    return EXIT_NUMERIC if failed else 0


def cmd_inspect_vectors(args) -> int:
    from .vectors import load_static_vectors, validate_ctxv1

    with open(args.path, "rb") as fh:
        head = fh.read(6)
    if head == b"CTXV1\x00":
        dim, count = validate_ctxv1(args.path)
        print(f"format=ctxv1 dim={dim} count={count}")
    else:
        dim, table = load_static_vectors(args.path)
        print(f"format=static dim={dim} count={len(table)}")
    return 0


def build_parser() -> tuple[_ArgumentParser, dict]:
    parser = _ArgumentParser(prog="spanparser",
                             description="Span-based neural constituency parser")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="key=value defaults file")

    p = sub.add_parser("train", help="train a parser")
    common(p)
    p.add_argument("languages", nargs="+", metavar="CODE:TRAIN[:DEV]")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--mode", choices=["scratch", "static", "context"],
                   default="scratch")
    p.add_argument("--train-mode", choices=["auto", "mono", "joint", "paired"],
                   default="auto")
    p.add_argument("--vectors", help="static/CTXV1 vectors (single-language runs)")
    p.add_argument("--d-ext", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--eval-interval", type=int, default=20)
    p.add_argument("--d-model", type=int, default=512)
    p.add_argument("--d-hidden", type=int, default=250)
    p.add_argument("--num-layers", type=int, default=2)
    p.add_argument("--num-heads", type=int, default=8)
    p.add_argument("--d-ff", type=int, default=2048)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-len", type=int, default=512)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--sampling-exponent", type=float, default=0.7)
    p.add_argument("--target-f1", type=float, default=None)
    p.add_argument("--lowercase", action="store_true")
    p.add_argument("--add-word-embeddings", action="store_true",
                   help="in vector modes, sum a learned word embedding too")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse tokenized sentences from stdin")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--lang")
    p.add_argument("--vectors")
    p.add_argument("--input", help="read sentences from a file instead of stdin")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("ensemble", help="parse with averaged span scores")
    common(p)
    p.add_argument("--models", required=True, help="comma-separated checkpoints")
    p.add_argument("--lang")
    p.add_argument("--vectors")
    p.add_argument("--input")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="labeled bracket P/R/F1")
    common(p)
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--ignore-labels", help="comma-separated root labels to skip")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("significance", help="paired bootstrap test")
    common(p)
    p.add_argument("gold")
    p.add_argument("pred_a")
    p.add_argument("pred_b")
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--ignore-labels")
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("gradcheck", help="finite-difference battery")
    common(p)
    p.add_argument("--draws", type=int, default=10)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect-vectors", help="validate a vectors file")
    common(p)
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect_vectors)

    defaults = {}
    for action_group in sub.choices.values():
        for action in action_group._actions:
            if action.dest not in ("help",):
                defaults[action.dest] = action.default
    return parser, defaults


def main(argv=None) -> int:
    parser, defaults = build_parser()
    try:
        args = parser.parse_args(argv)
        apply_config_defaults(args, defaults)
        np.random.seed(args.seed)  # belt and braces; all code paths use Generators
        _echo_config(args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        from .checkpoint import CheckpointError
        from .trees import TreebankError
        from .vectors import VectorFormatError
        from .evaluation import SentenceCountMismatch, TokenCountMismatch

        if isinstance(exc, (TreebankError, VectorFormatError, CheckpointError,
                            SentenceCountMismatch, TokenCountMismatch)):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        raise


if __name__ == "__main__":
    sys.exit(main())
