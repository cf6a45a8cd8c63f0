"""Transaction ingestion: CSV parsing, artifacts, dedup and fold splits."""

from __future__ import annotations

import csv
import hashlib
import io
import random
from dataclasses import dataclass
from datetime import date
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import IO, Iterable

from .textnorm import normalize

CSV_COLUMNS = (
    "CustomerID",
    "BankName",
    "TransactionDate",
    "TransactionType",
    "TransactionDescription",
    "TransactionAmount",
)


class SchemaError(ValueError):
    """The CSV header does not carry the required columns."""


class RowFormatError(ValueError):
    """A row failed validation while parsing in strict mode."""


class TransactionType(str, Enum):
    CREDIT = "Credit"
    DEBIT = "Debit"


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    """One validated bank transaction.

    The amount sign is tied to the type: credits are positive, debits
    negative. ``row_index`` is the zero-based data-row position in the
    source file and feeds the artifact id.
    """

    customer_id: int
    bank_name: str
    transaction_date: date
    transaction_type: TransactionType
    description: str
    amount: Decimal
    row_index: int


@dataclass(frozen=True, slots=True)
class BusinessArtifact:
    item_id: str
    item_type: str
    item_schema: dict

    @property
    def description(self) -> str:
        return self.item_schema["description"]


@dataclass(frozen=True, slots=True)
class RowIssue:
    row: int
    message: str


@dataclass(slots=True)
class ParseResult:
    records: list[TransactionRecord]
    issues: list[RowIssue]


@dataclass(frozen=True, slots=True)
class FoldAssignment:
    index: int
    fold: int


def parse_transactions(
    source: str | Path | IO[str], *, strict: bool = False
) -> ParseResult:
    """Read transactions from CSV, validating every row.

    Columns may appear in any order but must all be present. Invalid rows
    are collected as issues and skipped, unless ``strict`` is set, in which
    case the first bad row raises RowFormatError.
    """
    if hasattr(source, "read"):
        return _parse_stream(source, strict=strict)  # type: ignore[arg-type]
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _parse_stream(fh, strict=strict)


def parse_transactions_text(text: str, *, strict: bool = False) -> ParseResult:
    return _parse_stream(io.StringIO(text), strict=strict)


def _parse_stream(stream: IO[str], *, strict: bool) -> ParseResult:
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("input is empty, expected a header row") from None
    missing = set(CSV_COLUMNS) - set(header)
    if missing:
        raise SchemaError(f"missing columns: {', '.join(sorted(missing))}")
    col = {name: header.index(name) for name in CSV_COLUMNS}

    records: list[TransactionRecord] = []
    issues: list[RowIssue] = []
    for row_index, row in enumerate(reader):
        if not row or all(cell.strip() == "" for cell in row):
            continue
        try:
            records.append(_parse_row(row, col, row_index))
        except ValueError as exc:
            if strict:
                raise RowFormatError(f"row {row_index}: {exc}") from exc
            issues.append(RowIssue(row=row_index, message=str(exc)))
    return ParseResult(records=records, issues=issues)


def _parse_row(
    row: list[str], col: dict[str, int], row_index: int
) -> TransactionRecord:
    if len(row) < len(CSV_COLUMNS):
        raise ValueError(f"expected {len(CSV_COLUMNS)} cells, got {len(row)}")

    raw_id = row[col["CustomerID"]].strip()
    try:
        customer_id = int(raw_id)
    except ValueError:
        raise ValueError(f"customer id {raw_id!r} is not an integer") from None
    if customer_id <= 0:
        raise ValueError(f"customer id must be positive, got {customer_id}")

    bank_name = row[col["BankName"]].strip()
    if not bank_name:
        raise ValueError("bank name is empty")

    raw_date = row[col["TransactionDate"]].strip()
    try:
        tx_date = date.fromisoformat(raw_date)
    except ValueError:
        raise ValueError(f"date {raw_date!r} is not ISO YYYY-MM-DD") from None

    raw_type = row[col["TransactionType"]].strip()
    try:
        tx_type = TransactionType(raw_type)
    except ValueError:
        raise ValueError(
            f"type {raw_type!r} is not one of Credit, Debit"
        ) from None

    description = row[col["TransactionDescription"]]
    if not description.strip():
        raise ValueError("description is empty")

    amount = _parse_amount(row[col["TransactionAmount"]].strip())
    if tx_type is TransactionType.CREDIT and amount <= 0:
        raise ValueError(f"credit amount must be positive, got {amount}")
    if tx_type is TransactionType.DEBIT and amount >= 0:
        raise ValueError(f"debit amount must be negative, got {amount}")

    return TransactionRecord(
        customer_id=customer_id,
        bank_name=bank_name,
        transaction_date=tx_date,
        transaction_type=tx_type,
        description=description,
        amount=amount,
        row_index=row_index,
    )


def _parse_amount(raw: str) -> Decimal:
    try:
        value = Decimal(raw)
    except InvalidOperation:
        raise ValueError(f"amount {raw!r} is not a decimal number") from None
    exponent = value.as_tuple().exponent
    if not isinstance(exponent, int) or exponent < -2:
        raise ValueError(f"amount {raw!r} has more than two fraction digits")
    return value.quantize(Decimal("0.01"))


def serialize_transactions(records: Iterable[TransactionRecord]) -> str:
    """Canonical CSV form; parse_transactions_text inverts it exactly."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(
            [
                str(rec.customer_id),
                rec.bank_name,
                rec.transaction_date.isoformat(),
                rec.transaction_type.value,
                rec.description,
                str(rec.amount.quantize(Decimal("0.01"))),
            ]
        )
    return out.getvalue()


def to_artifact(record: TransactionRecord) -> BusinessArtifact:
    """Wrap a record in the generic artifact envelope used downstream."""
    schema = {
        "customer_id": record.customer_id,
        "bank_name": record.bank_name,
        "transaction_date": record.transaction_date.isoformat(),
        "transaction_type": record.transaction_type.value,
        "description": record.description,
        "amount": str(record.amount.quantize(Decimal("0.01"))),
    }
    digest = hashlib.sha256(
        "\x1f".join(
            [
                str(schema["customer_id"]),
                schema["bank_name"],
                schema["transaction_date"],
                schema["transaction_type"],
                schema["description"],
                schema["amount"],
                str(record.row_index),
            ]
        ).encode("utf-8")
    ).hexdigest()
    return BusinessArtifact(
        item_id=digest[:16],
        item_type="bank_transaction",
        item_schema=schema,
    )


def dedup_key(
    record: TransactionRecord, *, per_customer: bool = False
) -> tuple:
    key: tuple = (
        normalize(record.description),
        record.transaction_type.value,
        record.amount,
    )
    if per_customer:
        key = (record.customer_id,) + key
    return key


def deduplicate(
    records: Iterable[TransactionRecord], *, per_customer: bool = False
) -> list[TransactionRecord]:
    """Drop repeated transactions, keeping the first of each group.

    Two records repeat when their normalized descriptions, type and amount
    agree. By default the scan is global; per_customer additionally keys on
    the customer so identical transactions of different customers survive.
    """
    seen: set[tuple] = set()
    kept: list[TransactionRecord] = []
    for rec in records:
        key = dedup_key(rec, per_customer=per_customer)
        if key in seen:
            continue
        seen.add(key)
        kept.append(rec)
    return kept


def kfold_split(
    records: list[TransactionRecord], k: int, seed: int
) -> list[FoldAssignment]:
    """Assign each record position to one of k folds.

    Positions are shuffled with the seeded RNG and dealt round-robin, so
    folds are disjoint, cover the input and differ in size by at most one.
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if k > len(records):
        raise ValueError(f"cannot split {len(records)} records into {k} folds")
    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    assignments = [
        FoldAssignment(index=index, fold=position % k)
        for position, index in enumerate(order)
    ]
    assignments.sort(key=lambda a: a.index)
    return assignments
