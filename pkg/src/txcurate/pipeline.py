"""Staged batch runner: raw CSV in, verdicts and micro-tasks out.

Five jobs run in sequence (Preprocess, Extract, Enrich, Annotate,
Classify). The map-shaped jobs split their input into contiguous
partitions, process each independently (in worker processes when more
than one partition is configured) and merge results back in input order,
so the partitioned run is byte-identical to the sequential one. The
annotation job only emits review tasks; it never waits for answers.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import time
import traceback
from dataclasses import dataclass, field, replace
from pathlib import Path

from .annotations import AnnotationStore, generate_microtasks
from .features import (
    SemanticItem,
    build_gazetteers,
    extract_features,
    partition_slices,
    semantic_item_to_dict,
)
from .kb import load_kb
from .linking import (
    DEFAULT_THRESHOLD,
    ContextualizedArtifact,
    context_to_dict,
    contextualize,
)
from .records import deduplicate, parse_transactions, to_artifact
from .risk import classify_artifact, verdict_to_dict
from .similarity import SimilarityMethod, build_idf

STAGE_PREPROCESS = "Preprocess"
STAGE_EXTRACT = "Extract"
STAGE_ENRICH = "Enrich"
STAGE_ANNOTATE = "Annotate"
STAGE_CLASSIFY = "Classify"

OUTPUT_FILES = {
    "semantic_items": "semantic_items.jsonl",
    "contextualized": "contextualized.jsonl",
    "verdicts": "verdicts.jsonl",
    "manifest": "manifest.json",
}


class PipelineError(Exception):
    """A stage failed; the manifest records how far the run got."""


class ConfigError(PipelineError):
    """The configuration is unusable; no stage was started."""


@dataclass(frozen=True, slots=True)
class LinkSettings:
    method: SimilarityMethod = SimilarityMethod.TFIDF_COSINE
    threshold: float = DEFAULT_THRESHOLD


@dataclass(frozen=True, slots=True)
class PipelineConfig:
    """Everything a run needs; JSON config and CLI flags both land here."""

    input_path: str
    output_dir: str
    kb_paths: tuple[str, ...] = ()
    taxonomy_path: str | None = None
    link: LinkSettings = field(default_factory=LinkSettings)
    partitions: int = 1
    seed: int = 0
    folds: int = 5
    annotation_store: str | None = None

    def validate(self) -> None:
        if not 0.0 < self.link.threshold <= 1.0:
            raise ConfigError(
                f"link.threshold must be in (0, 1], got {self.link.threshold}"
            )
        if self.partitions < 1:
            raise ConfigError(f"partitions must be >= 1, got {self.partitions}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if not Path(self.input_path).is_file():
            raise ConfigError(f"input file not found: {self.input_path}")
        for path in self.kb_paths:
            if not Path(path).is_file():
                raise ConfigError(f"kb file not found: {path}")
        if self.taxonomy_path and not Path(self.taxonomy_path).is_file():
            raise ConfigError(f"taxonomy file not found: {self.taxonomy_path}")

    def resolved(self) -> "PipelineConfig":
        """Copy with every path absolute.

        The manifest echoes its config, and later commands (serving the
        review queue) rebuild state from that echo, possibly from another
        working directory. Relative paths would silently point elsewhere.
        """
        return replace(
            self,
            input_path=str(Path(self.input_path).resolve()),
            output_dir=str(Path(self.output_dir).resolve()),
            kb_paths=tuple(str(Path(p).resolve()) for p in self.kb_paths),
            taxonomy_path=(
                str(Path(self.taxonomy_path).resolve())
                if self.taxonomy_path
                else None
            ),
            annotation_store=(
                str(Path(self.annotation_store).resolve())
                if self.annotation_store
                else None
            ),
        )

    def to_dict(self) -> dict:
        # Callers may hand in Path objects; the manifest echo must stay JSON.
        return {
            "input": str(self.input_path),
            "output": str(self.output_dir),
            "kb_paths": [str(p) for p in self.kb_paths],
            "taxonomy": (
                str(self.taxonomy_path) if self.taxonomy_path else None
            ),
            "link": {
                "method": self.link.method.value,
                "threshold": self.link.threshold,
            },
            "partitions": self.partitions,
            "seed": self.seed,
            "folds": self.folds,
            "annotation_store": (
                str(self.annotation_store) if self.annotation_store else None
            ),
        }


def config_from_dict(raw: dict) -> PipelineConfig:
    """Build a config from parsed JSON; unknown keys are rejected."""
    known = {
        "input",
        "output",
        "kb_paths",
        "taxonomy",
        "link",
        "partitions",
        "seed",
        "folds",
        "annotation_store",
    }
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
    for key in ("input", "output"):
        if not raw.get(key):
            raise ConfigError(f"config key {key!r} is required")
    link_raw = raw.get("link") or {}
    if not isinstance(link_raw, dict):
        raise ConfigError("config key 'link' must be an object")
    method_name = link_raw.get("method", SimilarityMethod.TFIDF_COSINE.value)
    try:
        method = SimilarityMethod(method_name)
    except ValueError:
        valid = ", ".join(m.value for m in SimilarityMethod)
        raise ConfigError(
            f"unknown link.method {method_name!r} (valid: {valid})"
        ) from None
    try:
        link = LinkSettings(
            method=method,
            threshold=float(link_raw.get("threshold", DEFAULT_THRESHOLD)),
        )
        return PipelineConfig(
            input_path=str(raw["input"]),
            output_dir=str(raw["output"]),
            kb_paths=tuple(str(p) for p in raw.get("kb_paths") or ()),
            taxonomy_path=raw.get("taxonomy"),
            link=link,
            partitions=int(raw.get("partitions", 1)),
            seed=int(raw.get("seed", 0)),
            folds=int(raw.get("folds", 5)),
            annotation_store=raw.get("annotation_store"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None


@dataclass(frozen=True, slots=True)
class StageResult:
    stage: str
    items_in: int
    items_out: int
    duration_seconds: float
    errors: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "items_in": self.items_in,
            "items_out": self.items_out,
            "duration_seconds": self.duration_seconds,
            "errors": list(self.errors),
        }


# -- partitioned fork-join -------------------------------------------------
#
# Worker payloads and functions must be picklable, so the per-stage chunk
# processors live at module level and receive everything they need as one
# argument tuple.


def _extract_chunk(payload: tuple) -> list[SemanticItem]:
    artifacts, gazetteers = payload
    return [extract_features(artifact, gazetteers) for artifact in artifacts]


def _enrich_chunk(payload: tuple) -> list[ContextualizedArtifact]:
    items, kb, threshold, method, idf = payload
    return [
        contextualize(item, kb, threshold=threshold, method=method, idf=idf)
        for item in items
    ]


def _classify_chunk(payload: tuple) -> list:
    contexts, kb = payload
    return [classify_artifact(ctx, kb) for ctx in contexts]


def _guarded(task: tuple):
    worker, index, payload = task
    try:
        return ("ok", index, worker(payload))
    except Exception:
        return ("error", index, traceback.format_exc())


def _fork_join(stage: str, worker, payloads: list[tuple], partitions: int) -> list:
    """Run one payload per partition and merge results in partition order."""
    tasks = [(worker, i, payload) for i, payload in enumerate(payloads)]
    if partitions == 1:
        outcomes = [_guarded(task) for task in tasks]
    else:
        processes = min(partitions, os.cpu_count() or 1)
        with multiprocessing.Pool(processes=processes) as pool:
            outcomes = pool.map(_guarded, tasks)
    merged: list = []
    for status, index, result in outcomes:
        if status != "ok":
            raise PipelineError(
                f"stage {stage} failed in partition {index}:\n{result}"
            )
        merged.extend(result)
    return merged


def _chunks(values: list, partitions: int) -> list[list]:
    return [values[s] for s in partition_slices(len(values), partitions)]


# -- output writing --------------------------------------------------------


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


# -- the run ---------------------------------------------------------------


class _StageClock:
    def __init__(self) -> None:
        self.started = time.perf_counter()

    def lap(self) -> float:
        now = time.perf_counter()
        elapsed = now - self.started
        self.started = now
        return round(elapsed, 6)


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute all five jobs and return the run manifest.

    The manifest is also written to ``manifest.json`` in the output
    directory; if a stage fails, the manifest still lands there with the
    completed stages and the failing stage's name before the error is
    re-raised.
    """
    config.validate()
    config = config.resolved()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kb = load_kb(config.kb_paths or None, config.taxonomy_path)
    stages: list[StageResult] = []
    manifest: dict = {
        "config": config.to_dict(),
        "stages": [],
        "outputs": {},
        "status": "running",
    }

    def fail(stage: str, exc: Exception) -> PipelineError:
        manifest["stages"] = [s.to_dict() for s in stages]
        manifest["status"] = "aborted"
        manifest["aborted_stage"] = stage
        manifest["error"] = str(exc)
        _write_json(out_dir / OUTPUT_FILES["manifest"], manifest)
        if isinstance(exc, PipelineError):
            return exc
        return PipelineError(f"stage {stage} failed: {exc}")

    clock = _StageClock()

    # Job 1: parse and deduplicate. Row issues are recorded, not fatal.
    stage = STAGE_PREPROCESS
    try:
        parsed = parse_transactions(config.input_path)
        records = deduplicate(parsed.records)
        artifacts = [to_artifact(record) for record in records]
    except Exception as exc:
        raise fail(stage, exc) from exc
    stages.append(
        StageResult(
            stage=stage,
            items_in=len(parsed.records) + len(parsed.issues),
            items_out=len(records),
            duration_seconds=clock.lap(),
            errors=tuple(
                f"row {issue.row}: {issue.message}" for issue in parsed.issues
            ),
        )
    )

    # Job 2: semantic feature extraction, partition-parallel.
    stage = STAGE_EXTRACT
    try:
        gazetteers = build_gazetteers(kb.entities.values())
        items = _fork_join(
            stage,
            _extract_chunk,
            [(chunk, gazetteers) for chunk in _chunks(artifacts, config.partitions)],
            config.partitions,
        )
        _write_jsonl(
            out_dir / OUTPUT_FILES["semantic_items"],
            [semantic_item_to_dict(item) for item in items],
        )
    except Exception as exc:
        raise fail(stage, exc) from exc
    stages.append(
        StageResult(stage, len(artifacts), len(items), clock.lap())
    )

    # Job 3: entity linking over the whole batch's IDF.
    stage = STAGE_ENRICH
    try:
        idf = build_idf(items) if items else None
        contexts = _fork_join(
            stage,
            _enrich_chunk,
            [
                (chunk, kb, config.link.threshold, config.link.method, idf)
                for chunk in _chunks(items, config.partitions)
            ],
            config.partitions,
        )
        _write_jsonl(
            out_dir / OUTPUT_FILES["contextualized"],
            [context_to_dict(ctx) for ctx in contexts],
        )
    except Exception as exc:
        raise fail(stage, exc) from exc
    stages.append(StageResult(stage, len(items), len(contexts), clock.lap()))

    # Job 4: emit review tasks for the risky slice; never waits on answers.
    stage = STAGE_ANNOTATE
    try:
        store_root = str(config.annotation_store or out_dir / "annotations")
        store = AnnotationStore(store_root, kb)
        context_map = {ctx.item_id: ctx for ctx in contexts}
        risky_verdicts = [
            classify_artifact(ctx, kb) for ctx in contexts if ctx.risky
        ]
        created = generate_microtasks(risky_verdicts, records, store, context_map)
    except Exception as exc:
        raise fail(stage, exc) from exc
    stages.append(StageResult(stage, len(contexts), len(created), clock.lap()))

    # Job 5: final verdicts, partition-parallel.
    stage = STAGE_CLASSIFY
    try:
        verdicts = _fork_join(
            stage,
            _classify_chunk,
            [(chunk, kb) for chunk in _chunks(contexts, config.partitions)],
            config.partitions,
        )
        _write_jsonl(
            out_dir / OUTPUT_FILES["verdicts"],
            [verdict_to_dict(verdict) for verdict in verdicts],
        )
    except Exception as exc:
        raise fail(stage, exc) from exc
    stages.append(StageResult(stage, len(contexts), len(verdicts), clock.lap()))

    manifest["stages"] = [s.to_dict() for s in stages]
    manifest["outputs"] = {
        key: str(out_dir / name)
        for key, name in OUTPUT_FILES.items()
        if key != "manifest"
    }
    manifest["outputs"]["annotation_store"] = store_root
    manifest["status"] = "ok"
    _write_json(out_dir / OUTPUT_FILES["manifest"], manifest)
    return manifest
