"""Review API behavior over a small pre-annotated corpus."""

from __future__ import annotations

from datetime import date
from decimal import Decimal

import pytest
from fastapi.testclient import TestClient

from txcurate.annotations import AnnotationStore, generate_microtasks
from txcurate.features import build_gazetteers, extract_features
from txcurate.kb import load_kb
from txcurate.linking import contextualize
from txcurate.records import TransactionRecord, TransactionType, to_artifact
from txcurate.risk import classify_artifact
from txcurate.service import create_app, transaction_view
from txcurate.similarity import build_idf
from txcurate.textnorm import tokenize

_DESCRIPTIONS = [
    "CROWN CASINO MELBOURNE VIC",
    "SPORTSBET WAGERING ACCOUNT",
    "WOOLWORTHS METRO SYDNEY",
]


def _record(description: str, row_index: int) -> TransactionRecord:
    return TransactionRecord(
        customer_id=8,
        bank_name="stbank",
        transaction_date=date(2020, 7, 1),
        transaction_type=TransactionType.DEBIT,
        description=description,
        amount=Decimal("-12.00"),
        row_index=row_index,
    )


def _ticking_clock():
    counter = iter(range(10_000))

    def clock() -> str:
        return f"2020-07-01T10:00:{next(counter):02d}.000000Z"

    return clock


@pytest.fixture()
def client(tmp_path):
    kb = load_kb()
    records = [_record(d, i) for i, d in enumerate(_DESCRIPTIONS)]
    gazetteers = build_gazetteers(kb.entities.values())
    idf = build_idf([tokenize(r.description) for r in records])
    contexts = {}
    verdicts = []
    for record in records:
        item = extract_features(to_artifact(record), gazetteers)
        ctx = contextualize(item, kb, idf=idf)
        contexts[ctx.item_id] = ctx
        verdicts.append(classify_artifact(ctx, kb))
    store = AnnotationStore(tmp_path / "annot", kb, clock=_ticking_clock())
    generate_microtasks(verdicts, records, store, contexts)
    views = {
        to_artifact(r).item_id: transaction_view(
            r, v, contexts[to_artifact(r).item_id]
        )
        for r, v in zip(records, verdicts)
    }
    return TestClient(create_app(store, views))


class TestNextTask:
    def test_returns_first_open_in_creation_order(self, client) -> None:
        response = client.get("/api/tasks/next")
        assert response.status_code == 200
        task = response.json()
        assert task["kind"] == "VerifyRisk"
        assert task["status"] == "Open"
        assert (
            task["payload"]["transaction"]["description"] == _DESCRIPTIONS[0]
        )

    def test_kind_filter_misses_give_204(self, client) -> None:
        assert client.get("/api/tasks/next?kind=RateRisk").status_code == 204

    def test_empty_kind_means_no_filter(self, client) -> None:
        assert client.get("/api/tasks/next?kind=").status_code == 200

    def test_queue_drains_to_204(self, client) -> None:
        while True:
            response = client.get("/api/tasks/next")
            if response.status_code == 204:
                break
            task = response.json()
            answer = False if task["kind"] == "VerifyRisk" else 3
            posted = client.post(
                f"/api/tasks/{task['task_id']}/response",
                json={"answer": answer, "annotator_id": "exp-1"},
            )
            assert posted.status_code == 200
        assert client.get("/api/tasks/next").status_code == 204


class TestTaskDetail:
    def test_detail_round_trip(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        detail = client.get(f"/api/tasks/{task['task_id']}")
        assert detail.status_code == 200
        assert detail.json() == task

    def test_unknown_task_is_404_with_error_shape(self, client) -> None:
        response = client.get("/api/tasks/vr-0000000000000000")
        assert response.status_code == 404
        body = response.json()
        assert body["code"] == "not_found"
        assert "message" in body


class TestRespond:
    def test_yes_returns_follow_up_and_updates_stats(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        before = client.get("/api/stats").json()
        response = client.post(
            f"/api/tasks/{task['task_id']}/response",
            json={"answer": True, "annotator_id": "exp-1"},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["task"]["status"] == "Answered"
        assert body["follow_up"]["kind"] == "RateRisk"
        assert body["follow_up"]["artifact_id"] == task["artifact_id"]
        after = client.get("/api/stats").json()
        assert after["answered"] == before["answered"] + 1
        assert after["label_counts"]["1"] == before["label_counts"]["1"] + 1

    def test_no_answer_has_no_follow_up(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        body = client.post(
            f"/api/tasks/{task['task_id']}/response",
            json={"answer": False, "annotator_id": "exp-1"},
        ).json()
        assert "follow_up" not in body
        assert client.get("/api/stats").json()["label_counts"]["0"] == 1

    def test_rating_bumps_kb_version(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        follow = client.post(
            f"/api/tasks/{task['task_id']}/response",
            json={"answer": True, "annotator_id": "exp-1"},
        ).json()["follow_up"]
        version_before = client.get("/api/stats").json()["kb_version"]
        response = client.post(
            f"/api/tasks/{follow['task_id']}/response",
            json={"answer": 4, "annotator_id": "exp-1"},
        )
        assert response.status_code == 200
        assert client.get("/api/stats").json()["kb_version"] > version_before

    def test_second_answer_conflicts(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        url = f"/api/tasks/{task['task_id']}/response"
        first = client.post(url, json={"answer": False, "annotator_id": "a"})
        second = client.post(url, json={"answer": True, "annotator_id": "b"})
        assert first.status_code == 200
        assert second.status_code == 409
        assert second.json()["code"] == "conflict"

    def test_wrong_answer_type_is_400(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        response = client.post(
            f"/api/tasks/{task['task_id']}/response",
            json={"answer": 1, "annotator_id": "exp-1"},
        )
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_answer"

    def test_out_of_range_rating_is_400(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        follow = client.post(
            f"/api/tasks/{task['task_id']}/response",
            json={"answer": True, "annotator_id": "exp-1"},
        ).json()["follow_up"]
        response = client.post(
            f"/api/tasks/{follow['task_id']}/response",
            json={"answer": 9, "annotator_id": "exp-1"},
        )
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_answer"

    def test_missing_fields_are_400(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        url = f"/api/tasks/{task['task_id']}/response"
        no_answer = client.post(url, json={"annotator_id": "exp-1"})
        no_annotator = client.post(url, json={"answer": True})
        assert no_answer.status_code == 400
        assert no_answer.json()["code"] == "invalid_request"
        assert no_annotator.status_code == 400
        assert no_annotator.json()["code"] == "invalid_request"

    def test_malformed_body_is_400(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        response = client.post(
            f"/api/tasks/{task['task_id']}/response",
            content=b"answer=yes",
            headers={"content-type": "application/json"},
        )
        assert response.status_code == 400
        assert response.json()["code"] == "invalid_request"

    def test_unknown_task_is_404(self, client) -> None:
        response = client.post(
            "/api/tasks/vr-0000000000000000/response",
            json={"answer": True, "annotator_id": "exp-1"},
        )
        assert response.status_code == 404
        assert response.json()["code"] == "not_found"


class TestTransactions:
    def test_view_carries_record_verdict_and_links(self, client) -> None:
        task = client.get("/api/tasks/next").json()
        response = client.get(f"/api/transactions/{task['artifact_id']}")
        assert response.status_code == 200
        view = response.json()
        assert view["record"]["description"] == _DESCRIPTIONS[0]
        assert view["verdict"]["predicted_risky"] is True
        accepted = [l for l in view["links"] if l["accepted"]]
        assert accepted
        description = view["record"]["description"]
        for link in accepted:
            feature = link["feature"]
            assert (
                description[feature["start"] : feature["end"]]
                == feature["surface"]
            )

    def test_unknown_artifact_is_404(self, client) -> None:
        response = client.get("/api/transactions/ffffffffffffffff")
        assert response.status_code == 404
        assert response.json()["code"] == "not_found"


def test_stats_shape(client) -> None:
    stats = client.get("/api/stats").json()
    assert set(stats) == {"open", "answered", "label_counts", "kb_version"}
    assert stats["open"] == 2
    assert stats["answered"] == 0
