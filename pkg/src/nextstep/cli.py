"""Command line front end.

One subcommand per pipeline stage:

    gen       write a synthetic corpus as JSON lines
    ingest    validate a corpus file and print its statistics
    train     count a frequency model and dump it as JSON
    predict   rank next-step concepts for one context
    evaluate  leave-one-out report (MR, MRR, CI, histogram)
    reorient  list steps the model failed to predict
    serve     run the HTTP API

Exit codes: 0 success, 1 usage error, 2 data error. A config file of
key=value lines can predefine any long flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .core import NextStepError, StepKind, canonical_taxonomies, load_taxonomy
from .evaluator import (
    EvalReport,
    ScoreParams,
    detect_reorientations,
    evaluate,
    histogram_csv,
    report_table,
)
from .ingest import AliasTable, load_aliases, load_corpus, write_corpus_lines
from .predictor import FrequencyModel, Method, rank, train
from .synthgen import GenParams, generate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract here is 1.
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


_METHOD_CHOICES = [m.value for m in Method]
_KIND_CHOICES = [k.value for k in StepKind]

# Flags a config file may predefine, with their value parsers. Booleans
# accept true/false, yes/no, 1/0.
_CONFIG_KEYS = {
    "corpus": str,
    "taxonomy_diploma": str,
    "taxonomy_job": str,
    "aliases": str,
    "kind": str,
    "method": str,
    "alpha": float,
    "pack_size": int,
    "pack_penalty": float,
    "rank_mode": str,
    "threshold": int,
    "seed": int,
    "users": int,
    "jobs": int,
    "json": bool,
    "out": str,
    "model": str,
    "context": str,
    "top": int,
    "histogram": str,
    "host": str,
    "port": int,
}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def _read_config(path: str) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip().lower().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        caster = _CONFIG_KEYS[key]
        if caster is bool:
            values[key] = _parse_bool(value)
        else:
            try:
                values[key] = caster(value.strip())
            except ValueError:
                raise UsageError(
                    f"{path}:{lineno}: bad value for {key}: {value.strip()!r}"
                ) from None
    return values


def _apply_config(args: argparse.Namespace, config: dict) -> None:
    for key, value in config.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file of default flags")
    parser.add_argument("--json", action="store_true", default=None,
                        help="machine-readable JSON output")


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", help="corpus file, JSON lines")
    parser.add_argument("--taxonomy-diploma", dest="taxonomy_diploma",
                        help="diploma taxonomy CSV (default: packaged)")
    parser.add_argument("--taxonomy-job", dest="taxonomy_job",
                        help="job taxonomy CSV (default: packaged)")
    parser.add_argument("--aliases", help="title alias CSV (default: packaged)")


def _add_score_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha", type=float, help="rank softening exponent")
    parser.add_argument("--pack-size", dest="pack_size", type=int,
                        help="propositions shown per pack")
    parser.add_argument("--pack-penalty", dest="pack_penalty", type=float,
                        help="credit multiplier per extra pack")
    parser.add_argument("--rank-mode", dest="rank_mode",
                        choices=["within_pack", "global"],
                        help="rank used inside the power term")


def build_parser() -> _Parser:
    parser = _Parser(prog="nextstep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen", parents=[], help="write a synthetic corpus")
    p.add_argument("--seed", type=int)
    p.add_argument("--users", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    _add_common(p)

    p = sub.add_parser("ingest", help="validate a corpus and print statistics")
    _add_data_flags(p)
    _add_common(p)

    p = sub.add_parser("train", help="dump a frequency model")
    _add_data_flags(p)
    p.add_argument("--kind", choices=_KIND_CHOICES)
    p.add_argument("--method", choices=_METHOD_CHOICES)
    p.add_argument("--out", help="output path (default: stdout)")
    _add_common(p)

    p = sub.add_parser("predict", help="rank concepts for one context")
    _add_data_flags(p)
    p.add_argument("--model", help="model dump from `train` (skips --corpus)")
    p.add_argument("--kind", choices=_KIND_CHOICES)
    p.add_argument("--method", choices=_METHOD_CHOICES)
    p.add_argument("--context",
                   help="context concepts, e.g. diploma:1,job:0 (empty: popularity)")
    p.add_argument("--top", type=int, help="print only the best N")
    _add_common(p)

    p = sub.add_parser("evaluate", help="leave-one-out evaluation report")
    _add_data_flags(p)
    p.add_argument("--kind", choices=_KIND_CHOICES)
    p.add_argument("--method", choices=_METHOD_CHOICES + ["all"])
    _add_score_flags(p)
    p.add_argument("--jobs", type=int, help="worker threads (result unchanged)")
    p.add_argument("--histogram", help="also write the rank histogram CSV here")
    _add_common(p)

    p = sub.add_parser("reorient", help="list poorly predicted steps")
    _add_data_flags(p)
    p.add_argument("--kind", choices=_KIND_CHOICES)
    p.add_argument("--method", choices=_METHOD_CHOICES)
    _add_score_flags(p)
    p.add_argument("--threshold", type=int,
                   help="flag ranks above this (default: pack size)")
    _add_common(p)

    p = sub.add_parser("serve", help="run the HTTP API")
    _add_data_flags(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    _add_common(p)

    return parser


# --- shared loading -----------------------------------------------------------


def _packaged(name: str) -> str:
    from importlib.resources import files

    return str(files("nextstep") / "data" / name)


def _taxonomies(args) -> dict:
    diploma_path = getattr(args, "taxonomy_diploma", None)
    job_path = getattr(args, "taxonomy_job", None)
    if diploma_path is None and job_path is None:
        return canonical_taxonomies()
    out = canonical_taxonomies()
    if diploma_path is not None:
        out[StepKind.DIPLOMA] = load_taxonomy(diploma_path, StepKind.DIPLOMA)
    if job_path is not None:
        out[StepKind.JOB] = load_taxonomy(job_path, StepKind.JOB)
    return out


def _aliases(args) -> AliasTable:
    path = getattr(args, "aliases", None)
    return load_aliases(path if path is not None else _packaged("aliases.csv"))


def _corpus(args, taxonomies) -> tuple:
    if getattr(args, "corpus", None) is None:
        raise UsageError("--corpus is required")
    return load_corpus(args.corpus, _aliases(args), taxonomies)


def _require_flag(args, name: str) -> str:
    value = getattr(args, name, None)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required")
    return value


def _score_params(args) -> ScoreParams:
    kwargs = {}
    for name in ("alpha", "pack_size", "pack_penalty", "rank_mode"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    return ScoreParams(**kwargs)


def _write_out(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# --- subcommands --------------------------------------------------------------


def _cmd_gen(args) -> int:
    params = GenParams(
        seed=args.seed if args.seed is not None else 0,
        n_users=args.users if args.users is not None else 1000,
    )
    corpus = generate(params)
    if args.out is None:
        write_corpus_lines(corpus, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
            write_corpus_lines(corpus, handle)
    return 0


def _cmd_ingest(args) -> int:
    taxonomies = _taxonomies(args)
    _, stats = _corpus(args, taxonomies)
    data = stats.to_dict()
    if args.json:
        print(json.dumps(data, sort_keys=True))
    else:
        width = max(len(k) for k in data)
        for key, value in data.items():
            shown = f"{value:.3f}" if isinstance(value, float) else value
            print(f"{key.ljust(width)}  {shown}")
    return 0


def _cmd_train(args) -> int:
    taxonomies = _taxonomies(args)
    corpus, _ = _corpus(args, taxonomies)
    kind = StepKind.parse(_require_flag(args, "kind"))
    method = Method.parse(_require_flag(args, "method"))
    model = train(corpus, kind, method)
    _write_out(model.dump_json(), args.out)
    return 0


def _parse_context(text: Optional[str], taxonomies) -> Optional[list]:
    if text is None or not text.strip():
        return None
    concepts = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        domain_text, _, index_text = item.partition(":")
        if not index_text:
            raise UsageError(f"context item {item!r} must look like domain:index")
        try:
            domain = StepKind.parse(domain_text)
            index = int(index_text)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        try:
            concepts.append(taxonomies[domain].by_index(index))
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    return concepts or None


def _cmd_predict(args) -> int:
    taxonomies = _taxonomies(args)
    method = Method.parse(args.method) if args.method is not None else None
    if args.model is not None:
        model = FrequencyModel.load_json(Path(args.model).read_text(encoding="utf-8"))
    else:
        corpus, _ = _corpus(args, taxonomies)
        kind = StepKind.parse(_require_flag(args, "kind"))
        if method is None:
            raise UsageError("--method is required when training from --corpus")
        model = train(corpus, kind, method)
    taxonomy = taxonomies[model.target_kind]
    context = _parse_context(args.context, taxonomies)
    prediction = rank(model, context, taxonomy, method=method)
    hypotheses = prediction.hypotheses
    if args.top is not None:
        if args.top < 1:
            raise UsageError(f"--top must be >= 1, got {args.top}")
        hypotheses = hypotheses[: args.top]
    if args.json:
        print(json.dumps({
            "target_kind": model.target_kind.value,
            "method": method.value if method else None,
            "backed_off": prediction.backed_off,
            "hypotheses": [
                {
                    "rank": pos,
                    "domain": h.concept.domain.value,
                    "index": h.concept.index,
                    "label": h.concept.label,
                    "count": h.count,
                }
                for pos, h in enumerate(hypotheses, start=1)
            ],
        }, sort_keys=True))
    else:
        if prediction.backed_off:
            print("(context unseen; showing overall popularity)")
        for pos, h in enumerate(hypotheses, start=1):
            print(f"{pos:3d}. {h.concept.label}  ({h.count})")
    return 0


def _evaluate_methods(args) -> List[Method]:
    method = getattr(args, "method", None)
    if method is None or method == "all":
        return list(Method)
    return [Method.parse(method)]


def _cmd_evaluate(args) -> int:
    taxonomies = _taxonomies(args)
    corpus, _ = _corpus(args, taxonomies)
    kind = StepKind.parse(_require_flag(args, "kind"))
    params = _score_params(args)
    jobs = args.jobs if args.jobs is not None else 1
    if jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {jobs}")
    methods = _evaluate_methods(args)
    reports = [
        evaluate(corpus, kind, m, params, taxonomy=taxonomies[kind], jobs=jobs)
        for m in methods
    ]
    if args.histogram is not None:
        if len(reports) != 1:
            raise UsageError("--histogram needs a single --method")
        Path(args.histogram).write_text(histogram_csv(reports[0]), encoding="utf-8")
    if args.json:
        if len(reports) == 1:
            sys.stdout.write(reports[0].to_json())
        else:
            print(json.dumps({"reports": [r.to_dict() for r in reports]},
                             sort_keys=True))
    else:
        sys.stdout.write(report_table(reports))
    return 0


def _cmd_reorient(args) -> int:
    taxonomies = _taxonomies(args)
    corpus, _ = _corpus(args, taxonomies)
    kind = StepKind.parse(_require_flag(args, "kind"))
    method = Method.parse(_require_flag(args, "method"))
    params = _score_params(args)
    flags = detect_reorientations(
        corpus, kind, method, params,
        threshold=args.threshold, taxonomy=taxonomies[kind],
    )
    if args.json:
        print(json.dumps([
            {
                "user_id": f.user_id,
                "step_index": f.step_index,
                "rank_of_truth": f.rank_of_truth,
                "threshold": f.threshold,
            }
            for f in flags
        ], sort_keys=True))
    else:
        print(f"{len(flags)} flagged step(s)")
        for f in flags:
            print(f"{f.user_id}  step {f.step_index}  "
                  f"rank {f.rank_of_truth} > {f.threshold}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    taxonomies = _taxonomies(args)
    corpus = None
    if getattr(args, "corpus", None) is not None:
        corpus, _ = load_corpus(args.corpus, _aliases(args), taxonomies)
    app = create_app(corpus=corpus, taxonomies=taxonomies)
    uvicorn.run(
        app,
        host=args.host if args.host is not None else "127.0.0.1",
        port=args.port if args.port is not None else 8000,
        log_level="warning",
    )
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "reorient": _cmd_reorient,
    "serve": _cmd_serve,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        if getattr(args, "config", None):
            _apply_config(args, _read_config(args.config))
        if getattr(args, "json", None) is None:
            args.json = False
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse -h
        return int(exc.code or 0)
    except (NextStepError, OSError, ValueError, KeyError) as exc:
        # Data problems: unreadable files, malformed corpora, bad counts.
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
