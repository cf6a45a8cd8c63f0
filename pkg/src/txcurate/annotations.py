"""Micro-task generation, expert feedback, and the event-sourced store.

The store's single source of truth is an append-only JSON-lines event
log; a line is the commit point for everything it implies. Task state,
labels and KB rating updates are all derived by replaying the log, so a
torn write at the tail is simply discarded on the next load and feedback
application is atomic by construction. A human-readable snapshot file is
rewritten (to a temp file, then renamed) after every commit.
"""

from __future__ import annotations

import json
import os
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .kb import KnowledgeBase, apply_risk_score
from .linking import ContextualizedArtifact
from .records import TransactionRecord, to_artifact
from .risk import RiskVerdict

KIND_VERIFY = "VerifyRisk"
KIND_RATE = "RateRisk"
STATUS_OPEN = "Open"
STATUS_ANSWERED = "Answered"
STATUS_SKIPPED = "Skipped"
SOURCE_EXPERT = "Expert"
SOURCE_FIXTURE = "Fixture"


class AnnotationError(Exception):
    """Base error for store operations; ``code`` keys the HTTP mapping."""

    code = "error"


class UnknownTaskError(AnnotationError):
    code = "not_found"


class ClosedTaskError(AnnotationError):
    code = "conflict"


class InvalidAnswerError(AnnotationError):
    code = "invalid_answer"


@dataclass(frozen=True, slots=True)
class MicroTask:
    task_id: str
    artifact_id: str
    kind: str
    payload: dict
    status: str
    created_at: str


@dataclass(frozen=True, slots=True)
class AnnotationFeedback:
    task_id: str
    answer: bool | int
    annotator_id: str
    answered_at: str


@dataclass(frozen=True, slots=True)
class LabeledExample:
    artifact_id: str
    label: int
    source: str


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def verify_task_id(artifact_id: str) -> str:
    return f"vr-{artifact_id}"


def rate_task_id(artifact_id: str) -> str:
    return f"rr-{artifact_id}"


class AnnotationStore:
    """Task and label state over one event log directory.

    The knowledge base handed in must be in its pristine (fixture) state;
    replaying the log re-applies every recorded rating, so a pre-scored
    KB would double count.
    """

    def __init__(
        self,
        root: str | Path,
        kb: KnowledgeBase,
        clock: Callable[[], str] = _utc_now,
    ) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.events_path = self.root / "events.jsonl"
        self.snapshot_path = self.root / "snapshot.json"
        self.kb = kb
        self.clock = clock
        self.tasks: dict[str, MicroTask] = {}
        self.labels: dict[str, LabeledExample] = {}
        self._task_order: list[str] = []
        self._replay()

    # -- persistence ------------------------------------------------------

    def _replay(self) -> None:
        if not self.events_path.exists():
            return
        with open(self.events_path, "r", encoding="utf-8") as fh:
            raw = fh.read()
        for line in raw.split("\n")[:-1]:
            # A crash can leave a torn final line; raw.split drops only a
            # trailing newline-less fragment together with this guard.
            try:
                event = json.loads(line)
            except json.JSONDecodeError:
                break
            self._apply(event)

    def _append(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":"))
        with open(self.events_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def _commit(self, event: dict) -> None:
        self._append(event)
        self._apply(event)
        self.write_snapshot()

    def _apply(self, event: dict) -> None:
        kind = event["type"]
        if kind == "task":
            task = MicroTask(
                task_id=event["task_id"],
                artifact_id=event["artifact_id"],
                kind=event["kind"],
                payload=event["payload"],
                status=STATUS_OPEN,
                created_at=event["created_at"],
            )
            if task.task_id in self.tasks:
                raise AnnotationError(f"duplicate task {task.task_id!r}")
            self.tasks[task.task_id] = task
            self._task_order.append(task.task_id)
        elif kind == "feedback":
            self._apply_feedback(
                AnnotationFeedback(
                    task_id=event["task_id"],
                    answer=event["answer"],
                    annotator_id=event["annotator_id"],
                    answered_at=event["answered_at"],
                )
            )
        else:
            raise AnnotationError(f"unknown event type {kind!r}")

    def _apply_feedback(self, feedback: AnnotationFeedback) -> None:
        task = self.tasks[feedback.task_id]
        self.tasks[feedback.task_id] = replace(task, status=STATUS_ANSWERED)
        if task.kind == KIND_VERIFY:
            label = 1 if feedback.answer else 0
            self.labels[task.artifact_id] = LabeledExample(
                artifact_id=task.artifact_id, label=label, source=SOURCE_EXPERT
            )
            if feedback.answer:
                follow_id = rate_task_id(task.artifact_id)
                # Replaying a log with duplicate answers must not spawn the
                # follow-up twice; the label above already resolved
                # latest-wins.
                if follow_id not in self.tasks:
                    self.tasks[follow_id] = MicroTask(
                        task_id=follow_id,
                        artifact_id=task.artifact_id,
                        kind=KIND_RATE,
                        payload=task.payload,
                        status=STATUS_OPEN,
                        created_at=feedback.answered_at,
                    )
                    self._task_order.append(follow_id)
        else:
            for entry in task.payload.get("evidence", []):
                apply_risk_score(self.kb, entry["entity_id"], [feedback.answer])

    def snapshot_state(self) -> dict:
        """Full derived state; replaying the same log reproduces it exactly."""
        return {
            "tasks": [task_to_dict(self.tasks[tid]) for tid in self._task_order],
            "labels": [
                {
                    "artifact_id": ex.artifact_id,
                    "label": ex.label,
                    "source": ex.source,
                }
                for ex in training_snapshot(self)
            ],
            "kb_version": self.kb.version,
            "ratings": {k: list(v) for k, v in sorted(self.kb.ratings.items())},
        }

    def write_snapshot(self) -> None:
        """Persist the derived state next to the log, atomically."""
        tmp = self.snapshot_path.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(self.snapshot_state(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.snapshot_path)

    # -- queries ----------------------------------------------------------

    def open_tasks(self, kind: str | None = None) -> list[MicroTask]:
        tasks = [self.tasks[tid] for tid in self._task_order]
        return [
            t
            for t in tasks
            if t.status == STATUS_OPEN and (kind is None or t.kind == kind)
        ]

    def counts(self) -> dict:
        open_count = sum(
            1 for t in self.tasks.values() if t.status == STATUS_OPEN
        )
        answered = sum(
            1 for t in self.tasks.values() if t.status == STATUS_ANSWERED
        )
        label_counts = {"0": 0, "1": 0}
        for example in self.labels.values():
            label_counts[str(example.label)] += 1
        return {
            "open": open_count,
            "answered": answered,
            "label_counts": label_counts,
            "kb_version": self.kb.version,
        }


def generate_microtasks(
    verdicts: Iterable[RiskVerdict],
    records: Iterable[TransactionRecord],
    store: AnnotationStore,
    contexts: Mapping[str, ContextualizedArtifact] | None = None,
) -> list[MicroTask]:
    """Open one VerifyRisk task per risky verdict not yet asked about.

    Task payloads carry the raw transaction alongside the linked summary
    (labels, evidence, and accepted-link spans when ``contexts`` is given)
    so an expert sees both sides of the question. Re-running with the same
    verdicts creates nothing new.
    """
    by_artifact = {}
    for record in records:
        artifact = to_artifact(record)
        by_artifact[artifact.item_id] = artifact
    created: list[MicroTask] = []
    for verdict in verdicts:
        if not verdict.predicted_risky:
            continue
        task_id = verify_task_id(verdict.item_id)
        if task_id in store.tasks:
            continue
        artifact = by_artifact.get(verdict.item_id)
        if artifact is None:
            raise AnnotationError(f"no record for verdict {verdict.item_id!r}")
        payload = {
            "transaction": dict(artifact.item_schema),
            "risk_labels": sorted(verdict.risk_labels),
            "evidence": [
                {"entity_id": entity_id, "score": score}
                for entity_id, score in verdict.evidence
            ],
        }
        if contexts is not None and verdict.item_id in contexts:
            payload["spans"] = _accepted_spans(contexts[verdict.item_id])
        event = {
            "type": "task",
            "task_id": task_id,
            "artifact_id": verdict.item_id,
            "kind": KIND_VERIFY,
            "payload": payload,
            "created_at": store.clock(),
        }
        # The log append is the commit point; refreshing the derived
        # snapshot per task would make bulk generation quadratic, so it
        # happens once after the batch.
        store._append(event)
        store._apply(event)
        created.append(store.tasks[task_id])
    if created:
        store.write_snapshot()
    return created


def _accepted_spans(ctx: ContextualizedArtifact) -> list[dict]:
    spans = []
    seen = set()
    for link in ctx.links:
        if not link.accepted:
            continue
        key = (link.feature.start, link.feature.end, link.entity_id)
        if key in seen:
            continue
        seen.add(key)
        spans.append(
            {
                "start": link.feature.start,
                "end": link.feature.end,
                "surface": link.feature.surface,
                "entity_id": link.entity_id,
                "kind": link.feature.kind.value,
            }
        )
    spans.sort(key=lambda s: (s["start"], s["end"], s["entity_id"]))
    return spans


def submit_feedback(
    task_id: str, feedback: AnnotationFeedback, store: AnnotationStore
) -> MicroTask:
    """Validate, commit, and apply one expert answer.

    Returns the answered task. A VerifyRisk "yes" also opens the RateRisk
    follow-up; a RateRisk rating feeds the score of every evidence entity.
    """
    task = store.tasks.get(task_id)
    if task is None:
        raise UnknownTaskError(f"no such task {task_id!r}")
    if task.status != STATUS_OPEN:
        raise ClosedTaskError(f"task {task_id!r} is already {task.status}")
    if feedback.task_id != task_id:
        raise InvalidAnswerError("feedback addressed to a different task")
    answer = feedback.answer
    if task.kind == KIND_VERIFY:
        if not isinstance(answer, bool):
            raise InvalidAnswerError("VerifyRisk expects a boolean answer")
    else:
        if isinstance(answer, bool) or not isinstance(answer, int):
            raise InvalidAnswerError("RateRisk expects an integer rating")
        if not 1 <= answer <= 5:
            raise InvalidAnswerError(f"rating {answer} outside 1..5")
    event = {
        "type": "feedback",
        "task_id": task_id,
        "answer": answer,
        "annotator_id": feedback.annotator_id,
        "answered_at": feedback.answered_at,
    }
    store._commit(event)
    return store.tasks[task_id]


def training_snapshot(store: AnnotationStore) -> list[LabeledExample]:
    """Current labels, one per artifact, ordered by artifact id."""
    return [store.labels[key] for key in sorted(store.labels)]


def task_to_dict(task: MicroTask) -> dict:
    return {
        "task_id": task.task_id,
        "artifact_id": task.artifact_id,
        "kind": task.kind,
        "payload": task.payload,
        "status": task.status,
        "created_at": task.created_at,
    }
