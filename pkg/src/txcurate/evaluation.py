"""Confusion counts, agreement metrics, k-fold comparison, aggregates."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Mapping, Sequence

from .features import build_gazetteers, extract_batch
from .kb import KnowledgeBase, load_kb
from .linking import DEFAULT_METHOD, DEFAULT_THRESHOLD, contextualize
from .records import FoldAssignment, TransactionRecord, serialize_transactions, to_artifact
from .risk import (
    KeywordIndex,
    build_keyword_index,
    classic_classify,
    classify_artifact,
    load_keywords,
)
from .similarity import IdfTable, SimilarityMethod, build_idf

METHOD_PROPOSED = "proposed"
METHOD_CLASSIC = "classic"


@dataclass(frozen=True, slots=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def add(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            tn=self.tn + other.tn,
            fp=self.fp + other.fp,
            fn=self.fn + other.fn,
        )


@dataclass(frozen=True, slots=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f_measure: float
    kappa: float
    # Agreement intermediates behind kappa: observed proportion and the
    # chance level implied by the marginals.
    observed_agreement: float
    chance_agreement: float
    # Names of metrics that hit a zero denominator and were reported as 0.
    degenerate: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True, slots=True)
class EvaluationReport:
    method: str
    fold_counts: tuple[ConfusionCounts, ...]
    fold_metrics: tuple[MetricSet, ...]
    aggregate_counts: ConfusionCounts
    aggregate: MetricSet
    corpus_fingerprint: str
    runtime_seconds: float


@dataclass(frozen=True, slots=True)
class MonthlyAggregate:
    customer_id: int
    month: str
    amr: Decimal
    ame: Decimal


@dataclass(frozen=True, slots=True)
class EvalConfig:
    """Fixed classifier settings shared by every fold of a run."""

    threshold: float = DEFAULT_THRESHOLD
    similarity: SimilarityMethod = DEFAULT_METHOD
    keywords_path: str | None = None


def confusion(
    predictions: Mapping[str, bool], labels: Mapping[str, int]
) -> ConfusionCounts:
    """Tally predicted flags against 0/1 labels by item id."""
    tp = tn = fp = fn = 0
    for item_id, predicted in predictions.items():
        if item_id not in labels:
            raise ValueError(f"prediction for unlabeled item {item_id!r}")
        actual = labels[item_id]
        if predicted and actual:
            tp += 1
        elif predicted and not actual:
            fp += 1
        elif not predicted and actual:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def metrics(counts: ConfusionCounts) -> MetricSet:
    """Accuracy, precision, recall, F-measure and Cohen's kappa.

    Chance agreement comes from the marginal products. Exact rational
    arithmetic throughout, rounded to float only at the end, so ratios of
    small integer counts come out bit-exact rather than carrying float
    subtraction artifacts into kappa. Any ratio with a zero denominator is
    reported as 0 and named in ``degenerate``.
    """
    total = counts.total
    if total == 0:
        raise ValueError("cannot compute metrics over zero items")
    degenerate: set[str] = set()

    def ratio(name: str, num, den) -> Fraction:
        if den == 0:
            degenerate.add(name)
            return Fraction(0)
        return Fraction(num) / Fraction(den)

    accuracy = Fraction(counts.tp + counts.tn, total)
    precision = ratio("precision", counts.tp, counts.tp + counts.fp)
    recall = ratio("recall", counts.tp, counts.tp + counts.fn)
    f_measure = ratio("f_measure", 2 * precision * recall, precision + recall)
    observed = accuracy
    chance = Fraction(
        (counts.tp + counts.fp) * (counts.tp + counts.fn)
        + (counts.tn + counts.fn) * (counts.tn + counts.fp),
        total * total,
    )
    kappa = ratio("kappa", observed - chance, 1 - chance)
    return MetricSet(
        accuracy=float(accuracy),
        precision=float(precision),
        recall=float(recall),
        f_measure=float(f_measure),
        kappa=float(kappa),
        observed_agreement=float(observed),
        chance_agreement=float(chance),
        degenerate=frozenset(degenerate),
    )


def corpus_fingerprint(
    records: Sequence[TransactionRecord], labels: Mapping[str, int]
) -> str:
    digest = hashlib.sha256()
    digest.update(serialize_transactions(records).encode("utf-8"))
    for item_id in sorted(labels):
        digest.update(f"{item_id}={labels[item_id]}\n".encode("ascii"))
    return digest.hexdigest()[:16]


def evaluate_kfold(
    records: Sequence[TransactionRecord],
    labels: Mapping[str, int],
    folds: Sequence[FoldAssignment],
    method: str = METHOD_PROPOSED,
    config: EvalConfig | None = None,
    kb: KnowledgeBase | None = None,
) -> EvaluationReport:
    """Score one classifier arm fold by fold.

    Each fold serves once as the test set. The linker arm rebuilds its IDF
    table from the training folds only, so no test document influences the
    weights it is scored with. Feature extraction is shared across folds
    because it depends on nothing learned.
    """
    if method not in (METHOD_PROPOSED, METHOD_CLASSIC):
        raise ValueError(f"unknown method {method!r}")
    config = config or EvalConfig()
    started = time.perf_counter()

    if len(folds) != len(records):
        raise ValueError("fold assignment does not cover the records")
    fold_ids = sorted({assignment.fold for assignment in folds})
    if fold_ids != list(range(len(fold_ids))) or len(fold_ids) < 2:
        raise ValueError("fold ids must be contiguous from 0 with k >= 2")

    artifacts = [to_artifact(record) for record in records]
    for artifact in artifacts:
        if artifact.item_id not in labels:
            raise ValueError(f"record {artifact.item_id!r} has no label")

    kb = kb or load_kb()
    index: KeywordIndex | None = None
    items = None
    if method == METHOD_CLASSIC:
        index = build_keyword_index(load_keywords(config.keywords_path))
    else:
        items = extract_batch(artifacts, build_gazetteers(kb.entities.values()))

    by_fold: dict[int, list[int]] = {fold: [] for fold in fold_ids}
    for assignment in folds:
        by_fold[assignment.fold].append(assignment.index)

    fold_counts: list[ConfusionCounts] = []
    for fold in fold_ids:
        test = by_fold[fold]
        predictions: dict[str, bool] = {}
        if method == METHOD_CLASSIC:
            assert index is not None
            for position in test:
                predictions[artifacts[position].item_id] = classic_classify(
                    records[position].description, index
                )
        else:
            assert items is not None
            test_set = set(test)
            train_items = [
                item
                for position, item in enumerate(items)
                if position not in test_set
            ]
            idf = build_idf(train_items)
            for position in test:
                ctx = contextualize(
                    items[position],
                    kb,
                    threshold=config.threshold,
                    method=config.similarity,
                    idf=idf,
                )
                verdict = classify_artifact(ctx, kb)
                predictions[ctx.item_id] = verdict.predicted_risky
        fold_counts.append(confusion(predictions, labels))

    aggregate_counts = fold_counts[0]
    for counts in fold_counts[1:]:
        aggregate_counts = aggregate_counts.add(counts)
    return EvaluationReport(
        method=method,
        fold_counts=tuple(fold_counts),
        fold_metrics=tuple(metrics(c) for c in fold_counts),
        aggregate_counts=aggregate_counts,
        aggregate=metrics(aggregate_counts),
        corpus_fingerprint=corpus_fingerprint(records, labels),
        runtime_seconds=time.perf_counter() - started,
    )


def compute_monthly_aggregates(
    records: Sequence[TransactionRecord],
) -> list[MonthlyAggregate]:
    """Per-customer, per-calendar-month revenue and expense totals."""
    zero = Decimal("0.00")
    sums: dict[tuple[int, str], list[Decimal]] = {}
    for record in records:
        month = record.transaction_date.strftime("%Y-%m")
        entry = sums.setdefault((record.customer_id, month), [zero, zero])
        if record.amount >= 0:
            entry[0] += record.amount
        else:
            entry[1] += -record.amount
    return [
        MonthlyAggregate(customer_id=customer_id, month=month, amr=amr, ame=ame)
        for (customer_id, month), (amr, ame) in sorted(sums.items())
    ]


def metric_set_to_dict(metric_set: MetricSet) -> dict:
    return {
        "accuracy": metric_set.accuracy,
        "precision": metric_set.precision,
        "recall": metric_set.recall,
        "f_measure": metric_set.f_measure,
        "kappa": metric_set.kappa,
        "observed_agreement": metric_set.observed_agreement,
        "chance_agreement": metric_set.chance_agreement,
        "degenerate": sorted(metric_set.degenerate),
    }


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "method": report.method,
        "corpus_fingerprint": report.corpus_fingerprint,
        "runtime_seconds": report.runtime_seconds,
        "folds": [
            {
                "counts": {"tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn},
                "metrics": metric_set_to_dict(m),
            }
            for c, m in zip(report.fold_counts, report.fold_metrics)
        ],
        "aggregate": {
            "counts": {
                "tp": report.aggregate_counts.tp,
                "tn": report.aggregate_counts.tn,
                "fp": report.aggregate_counts.fp,
                "fn": report.aggregate_counts.fn,
            },
            "metrics": metric_set_to_dict(report.aggregate),
        },
    }


def comparison_to_dict(
    proposed: EvaluationReport, classic: EvaluationReport
) -> dict:
    return {
        "corpus_fingerprint": proposed.corpus_fingerprint,
        "proposed": report_to_dict(proposed),
        "classic": report_to_dict(classic),
    }


def comparison_table(
    proposed: EvaluationReport, classic: EvaluationReport
) -> str:
    """Aligned two-column text table of the aggregate metrics."""
    rows = [
        ("Accuracy", "accuracy"),
        ("Recall", "recall"),
        ("Precision", "precision"),
        ("Kappa", "kappa"),
        ("F-Measures", "f_measure"),
    ]
    header = ("Metric", "Proposed Method", "Classic Approach")
    table = [header]
    for label, attr in rows:
        table.append(
            (
                label,
                f"{getattr(proposed.aggregate, attr):.4f}",
                f"{getattr(classic.aggregate, attr):.4f}",
            )
        )
    widths = [max(len(row[col]) for row in table) for col in range(3)]
    lines = []
    for row in table:
        lines.append(
            "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        )
    return "\n".join(lines) + "\n"


def write_comparison(
    proposed: EvaluationReport,
    classic: EvaluationReport,
    json_path,
    text_path,
) -> None:
    payload = comparison_to_dict(proposed, classic)
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write(comparison_table(proposed, classic))
