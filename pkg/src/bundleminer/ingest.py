"""Parsing of event logs, diagnosis records and code maps.

All CSV inputs are UTF-8, comma-delimited, header in the first row,
quoted fields per RFC 4180.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import DataError, UsageError

LABEL_DELIMITER = "|"

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def compose_label(actor_role: str, action_reason: str) -> str:
    """Deterministic composite action label (role and reason joined by '|')."""
    return f"{actor_role}{LABEL_DELIMITER}{action_reason}"


@dataclass(frozen=True)
class AccessEvent:
    patient_id: str
    order_key: int
    actor_role: str
    action_reason: str


@dataclass(frozen=True)
class PatientSequence:
    patient_id: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class DiagnosisRecord:
    patient_id: str
    code: str
    count: int


class CodeMap:
    """Maps source diagnosis codes to group codes with descriptions."""

    def __init__(self, entries: dict[str, tuple[str, str]]):
        self.entries = dict(entries)
        self._group_descriptions: dict[str, str] = {}
        for group, description in self.entries.values():
            self._group_descriptions.setdefault(group, description)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, source_code: str) -> bool:
        return source_code in self.entries

    def group(self, source_code: str) -> str:
        return self.entries[source_code][0]

    def group_description(self, group_code: str) -> str:
        return self._group_descriptions.get(group_code, "")


def _parse_order_key(text: str, line_num: int) -> int:
    """Integer index, or ISO-8601 timestamp converted to epoch nanoseconds."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError:
        raise DataError(f"line {line_num}: unparsable order_key {text!r}") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    delta = stamp - _EPOCH
    seconds = delta.days * 86400 + delta.seconds
    return seconds * 10**9 + delta.microseconds * 1000


def _open_reader(csv_path, required: list[str]):
    fh = open(csv_path, newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    missing = [col for col in required if col not in header]
    if missing:
        fh.close()
        raise DataError(
            f"{csv_path}: line 1: missing column(s) {', '.join(missing)}"
        )
    return fh, reader


def parse_event_log(csv_path) -> dict[str, list[AccessEvent]]:
    """Read events.csv into AccessEvents grouped by patient, input order kept."""
    fh, reader = _open_reader(
        csv_path, ["patient_id", "order_key", "actor_role", "action_reason"]
    )
    events: dict[str, list[AccessEvent]] = {}
    with fh:
        for row in reader:
            line = reader.line_num
            pid = row["patient_id"]
            role = row["actor_role"]
            if not pid or not role:
                raise DataError(f"{csv_path}: line {line}: empty patient_id or actor_role")
            event = AccessEvent(
                patient_id=pid,
                order_key=_parse_order_key(row["order_key"], line),
                actor_role=role,
                action_reason=row["action_reason"],
            )
            events.setdefault(pid, []).append(event)
    return events


def parse_diagnosis_records(csv_path) -> list[DiagnosisRecord]:
    """Read diagnoses.csv; duplicate (patient, code) rows aggregate into count."""
    fh, reader = _open_reader(csv_path, ["patient_id", "code"])
    counts: Counter[tuple[str, str]] = Counter()
    order: list[tuple[str, str]] = []
    with fh:
        for row in reader:
            pid, code = row["patient_id"], row["code"]
            if not pid:
                raise DataError(f"{csv_path}: line {reader.line_num}: empty patient_id")
            if not code:
                raise DataError(f"{csv_path}: line {reader.line_num}: empty code")
            key = (pid, code)
            if key not in counts:
                order.append(key)
            counts[key] += 1
    return [DiagnosisRecord(pid, code, counts[(pid, code)]) for pid, code in order]


def load_code_map(csv_path) -> CodeMap:
    fh, reader = _open_reader(csv_path, ["source_code", "group_code", "description"])
    entries: dict[str, tuple[str, str]] = {}
    conflicts: list[str] = []
    with fh:
        for row in reader:
            source = row["source_code"]
            target = (row["group_code"], row["description"])
            previous = entries.setdefault(source, target)
            if previous[0] != target[0]:
                conflicts.append(f"{source}: {previous[0]} vs {target[0]}")
    if conflicts:
        raise DataError(
            f"{csv_path}: conflicting group assignments: " + "; ".join(conflicts)
        )
    return CodeMap(entries)


def map_codes(
    records: list[DiagnosisRecord],
    code_map: CodeMap,
    unmapped_policy: str = "passthrough",
) -> tuple[list[DiagnosisRecord], int]:
    """Translate source codes to group codes, summing counts per patient.

    Returns the translated records and the number of records whose code was
    not covered by the map (retained verbatim under passthrough, removed
    under drop).
    """
    if unmapped_policy not in ("passthrough", "drop"):
        raise UsageError(f"unknown unmapped_policy {unmapped_policy!r}")
    totals: dict[tuple[str, str], int] = {}
    order: list[tuple[str, str]] = []
    unmapped = 0
    for record in records:
        if record.code in code_map:
            code = code_map.group(record.code)
        else:
            unmapped += 1
            if unmapped_policy == "drop":
                continue
            code = record.code
        key = (record.patient_id, code)
        if key not in totals:
            order.append(key)
            totals[key] = 0
        totals[key] += record.count
    return [DiagnosisRecord(pid, code, totals[(pid, code)]) for pid, code in order], unmapped


def build_sequences(events: dict[str, list[AccessEvent]]) -> list[PatientSequence]:
    """Order each patient's events by order_key (stable on ties) and compose labels."""
    sequences = []
    for pid, patient_events in events.items():
        ordered = sorted(patient_events, key=lambda e: e.order_key)
        labels = tuple(compose_label(e.actor_role, e.action_reason) for e in ordered)
        sequences.append(PatientSequence(pid, labels))
    return sequences
