"""Command-line surface tying ingestion, linking, runs and review together.

Exit codes: 0 on success, 1 for anything the user can fix (bad flags,
unreadable files, invalid config), 2 for internal failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .evaluation import (
    METHOD_CLASSIC,
    METHOD_PROPOSED,
    EvalConfig,
    comparison_table,
    evaluate_kfold,
    report_to_dict,
    write_comparison,
)
from .features import build_gazetteers, extract_batch, semantic_item_to_dict
from .kb import KBError, load_kb
from .linking import DEFAULT_THRESHOLD, context_to_dict, contextualize
from .pipeline import (
    ConfigError,
    PipelineError,
    config_from_dict,
    run_pipeline,
)
from .records import (
    RowFormatError,
    deduplicate,
    kfold_split,
    parse_transactions,
    serialize_transactions,
    to_artifact,
)
from .risk import classify_artifact, verdict_to_dict
from .similarity import SimilarityMethod, build_idf
from .synth import CorpusSpec, generate_synthetic_corpus


class UsageError(Exception):
    """Bad invocation; the message already contains the usage text."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_kb_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--kb",
        action="append",
        default=[],
        metavar="PATH",
        help="entity file, repeatable; default: bundled fixtures",
    )
    parser.add_argument("--taxonomy", default=None, metavar="PATH")


def _load_kb_from(args: argparse.Namespace):
    return load_kb(args.kb or None, args.taxonomy)


def _add_link_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--method",
        default=SimilarityMethod.TFIDF_COSINE.value,
        choices=[m.value for m in SimilarityMethod],
        help="similarity method for fuzzy alias matching",
    )
    parser.add_argument(
        "--threshold",
        type=float,
        default=DEFAULT_THRESHOLD,
        help="minimum similarity for an accepted link",
    )


def _emit_lines(output: str | None, lines: list[str]) -> None:
    text = "".join(line + "\n" for line in lines)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _read_records(path: str, *, per_customer: bool = False):
    parsed = parse_transactions(path)
    for issue in parsed.issues:
        print(f"row {issue.row}: {issue.message}", file=sys.stderr)
    return deduplicate(parsed.records, per_customer=per_customer)


def _cmd_ingest(args: argparse.Namespace) -> int:
    parsed = parse_transactions(args.input, strict=args.strict)
    for issue in parsed.issues:
        print(f"row {issue.row}: {issue.message}", file=sys.stderr)
    records = deduplicate(parsed.records, per_customer=args.per_customer)
    text = serialize_transactions(records)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(
        f"{len(parsed.records)} rows parsed, {len(records)} kept",
        file=sys.stderr,
    )
    return 0


def _extracted_items(args: argparse.Namespace, kb):
    records = _read_records(args.input)
    artifacts = [to_artifact(record) for record in records]
    items = extract_batch(artifacts, build_gazetteers(kb.entities.values()))
    return records, items


def _cmd_extract(args: argparse.Namespace) -> int:
    _, items = _extracted_items(args, _load_kb_from(args))
    _emit_lines(
        args.output,
        [
            json.dumps(semantic_item_to_dict(item), sort_keys=True)
            for item in items
        ],
    )
    return 0


def _contextualized(args: argparse.Namespace, kb):
    records, items = _extracted_items(args, kb)
    idf = build_idf(items) if items else None
    method = SimilarityMethod(args.method)
    contexts = [
        contextualize(
            item, kb, threshold=args.threshold, method=method, idf=idf
        )
        for item in items
    ]
    return records, contexts


def _cmd_link(args: argparse.Namespace) -> int:
    _, contexts = _contextualized(args, _load_kb_from(args))
    _emit_lines(
        args.output,
        [json.dumps(context_to_dict(ctx), sort_keys=True) for ctx in contexts],
    )
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    kb = _load_kb_from(args)
    _, contexts = _contextualized(args, kb)
    _emit_lines(
        args.output,
        [
            json.dumps(verdict_to_dict(classify_artifact(ctx, kb)), sort_keys=True)
            for ctx in contexts
        ],
    )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    raw: dict = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ConfigError(f"config {args.config} must be a JSON object")
    if args.input is not None:
        raw["input"] = args.input
    if args.output is not None:
        raw["output"] = args.output
    if args.kb:
        raw["kb_paths"] = args.kb
    if args.taxonomy is not None:
        raw["taxonomy"] = args.taxonomy
    link = dict(raw.get("link") or {})
    if args.link_method is not None:
        link["method"] = args.link_method
    if args.link_threshold is not None:
        link["threshold"] = args.link_threshold
    if link:
        raw["link"] = link
    for key, value in [
        ("partitions", args.partitions),
        ("seed", args.seed),
        ("folds", args.folds),
        ("annotation_store", args.annotation_store),
    ]:
        if value is not None:
            raw[key] = value
    config = config_from_dict(raw)
    manifest = run_pipeline(config)
    for stage in manifest["stages"]:
        print(
            f"{stage['stage']:<11} in={stage['items_in']:<6} "
            f"out={stage['items_out']:<6} {stage['duration_seconds']:.3f}s"
        )
    print(f"manifest: {Path(config.output_dir) / 'manifest.json'}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = CorpusSpec(
        n=args.n,
        risky_fraction=args.risky_fraction,
        noise_rate=args.noise,
        seed=args.seed,
    )
    records, labels = generate_synthetic_corpus(spec, _load_kb_from(args))
    text = serialize_transactions(records)
    labels_path = args.labels
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        if labels_path is None:
            labels_path = str(Path(args.output).with_suffix(".labels.json"))
    else:
        sys.stdout.write(text)
    if labels_path:
        with open(labels_path, "w", encoding="utf-8") as fh:
            json.dump(labels, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"labels: {labels_path}", file=sys.stderr)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    kb = _load_kb_from(args)
    if args.input:
        if not args.labels:
            raise ConfigError("--labels is required together with --input")
        records = parse_transactions(args.input, strict=True).records
        raw_labels = json.loads(Path(args.labels).read_text(encoding="utf-8"))
        labels = {str(k): int(v) for k, v in raw_labels.items()}
    else:
        spec = CorpusSpec(
            n=args.n,
            risky_fraction=args.risky_fraction,
            noise_rate=args.noise,
            seed=args.seed,
        )
        records, labels = generate_synthetic_corpus(spec, kb)
    folds = kfold_split(records, args.k, args.seed)
    config = EvalConfig(
        threshold=args.threshold,
        similarity=SimilarityMethod(args.similarity),
        keywords_path=args.keywords,
    )
    arms = (
        [METHOD_PROPOSED, METHOD_CLASSIC]
        if args.method == "both"
        else [args.method]
    )
    reports = {
        arm: evaluate_kfold(records, labels, folds, method=arm, config=config, kb=kb)
        for arm in arms
    }
    out_dir = Path(args.output) if args.output else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    if args.method == "both":
        table = comparison_table(reports[METHOD_PROPOSED], reports[METHOD_CLASSIC])
        sys.stdout.write(table)
        if out_dir:
            write_comparison(
                reports[METHOD_PROPOSED],
                reports[METHOD_CLASSIC],
                out_dir / "report.json",
                out_dir / "report.txt",
            )
            print(f"report: {out_dir / 'report.json'}", file=sys.stderr)
    else:
        payload = report_to_dict(reports[arms[0]])
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        if out_dir:
            with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
    return 0


def _cmd_annotate_serve(args: argparse.Namespace) -> int:
    # Heavy web imports stay local so the batch commands start fast.
    import uvicorn

    from .annotations import AnnotationStore
    from .service import create_app, transaction_view

    run_dir = Path(args.run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"no manifest.json under {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("status") != "ok":
        raise ConfigError("pipeline run did not complete; re-run it first")
    config = config_from_dict(manifest["config"])
    kb = load_kb(config.kb_paths or None, config.taxonomy_path)
    records = _read_records(config.input_path)
    artifacts = [to_artifact(record) for record in records]
    items = extract_batch(artifacts, build_gazetteers(kb.entities.values()))
    idf = build_idf(items) if items else None
    views = {}
    for record, item in zip(records, items):
        ctx = contextualize(
            item,
            kb,
            threshold=config.link.threshold,
            method=config.link.method,
            idf=idf,
        )
        views[ctx.item_id] = transaction_view(
            record, classify_artifact(ctx, kb), ctx
        )
    store_root = manifest.get("outputs", {}).get("annotation_store") or str(
        run_dir / "annotations"
    )
    store = AnnotationStore(store_root, kb)
    app = create_app(store, views)
    print(f"serving on http://{args.host}:{args.port}", file=sys.stderr)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    report_txt = run_dir / "report.txt"
    if report_txt.is_file():
        sys.stdout.write(report_txt.read_text(encoding="utf-8"))
        return 0
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ConfigError(f"nothing to report under {run_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    print(f"status: {manifest.get('status')}")
    for stage in manifest.get("stages", []):
        print(
            f"{stage['stage']:<11} in={stage['items_in']:<6} "
            f"out={stage['items_out']:<6} {stage['duration_seconds']:.3f}s"
        )
    for name, path in sorted(manifest.get("outputs", {}).items()):
        print(f"{name}: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="txcurate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, validate and deduplicate a CSV")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--output", metavar="CSV", help="default: stdout")
    p.add_argument("--per-customer", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("extract", help="semantic feature extraction")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--output", metavar="JSONL", help="default: stdout")
    _add_kb_flags(p)
    p.set_defaults(handler=_cmd_extract)

    p = sub.add_parser("link", help="entity linking over extracted features")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--output", metavar="JSONL", help="default: stdout")
    _add_kb_flags(p)
    _add_link_flags(p)
    p.set_defaults(handler=_cmd_link)

    p = sub.add_parser("classify", help="risk verdicts for a CSV")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--output", metavar="JSONL", help="default: stdout")
    _add_kb_flags(p)
    _add_link_flags(p)
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("run", help="full staged pipeline run")
    p.add_argument("--config", metavar="JSON")
    p.add_argument("--input", metavar="CSV")
    p.add_argument("--output", metavar="DIR")
    p.add_argument("--kb", action="append", default=[], metavar="PATH")
    p.add_argument("--taxonomy", metavar="PATH")
    p.add_argument(
        "--link-method", choices=[m.value for m in SimilarityMethod]
    )
    p.add_argument("--link-threshold", type=float)
    p.add_argument("--partitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--annotation-store", metavar="DIR")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("synth", help="deterministic labeled test corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--risky-fraction", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", metavar="CSV", help="default: stdout")
    p.add_argument(
        "--labels",
        metavar="JSON",
        help="default: next to --output with a .labels.json suffix",
    )
    _add_kb_flags(p)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("evaluate", help="k-fold comparison of both methods")
    p.add_argument(
        "--method",
        choices=["both", METHOD_PROPOSED, METHOD_CLASSIC],
        default="both",
    )
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--input", metavar="CSV", help="default: synthetic corpus")
    p.add_argument("--labels", metavar="JSON", help="labels for --input")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--risky-fraction", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument(
        "--similarity",
        choices=[m.value for m in SimilarityMethod],
        default=SimilarityMethod.TFIDF_COSINE.value,
    )
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--keywords", metavar="TXT")
    p.add_argument("--output", metavar="DIR", help="also write report files")
    _add_kb_flags(p)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("annotate-serve", help="serve the review API for a run")
    p.add_argument("--run-dir", required=True, metavar="DIR")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(handler=_cmd_annotate_serve)

    p = sub.add_parser("report", help="print a run or evaluation summary")
    p.add_argument("--run-dir", required=True, metavar="DIR")
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:
        # argparse exits directly for --help; keep main() returning codes.
        return int(exc.code or 0)
    try:
        return args.handler(args) or 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, KBError, RowFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
