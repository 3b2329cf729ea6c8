import pytest

from bundleminer import ingest
from bundleminer.errors import DataError, UsageError


def test_parse_event_log_groups_by_patient(write_csv):
    path = write_csv(
        "events.csv",
        [
            "patient_id,order_key,actor_role,action_reason",
            "h1,1,RAD,review",
            "h1,2,MD,CPOE",
        ],
    )
    events = ingest.parse_event_log(path)
    assert list(events) == ["h1"]
    assert len(events["h1"]) == 2


def test_parse_event_log_header_only(write_csv):
    path = write_csv("events.csv", ["patient_id,order_key,actor_role,action_reason"])
    assert ingest.parse_event_log(path) == {}


def test_parse_event_log_keeps_out_of_order_rows(write_csv):
    path = write_csv(
        "events.csv",
        [
            "patient_id,order_key,actor_role,action_reason",
            "h1,5,A,x",
            "h1,2,B,y",
        ],
    )
    events = ingest.parse_event_log(path)
    assert [e.order_key for e in events["h1"]] == [5, 2]


def test_parse_event_log_missing_column(write_csv):
    path = write_csv("events.csv", ["patient_id,order_key,actor_role", "h1,1,A"])
    with pytest.raises(DataError, match="line 1"):
        ingest.parse_event_log(path)


def test_parse_event_log_bad_order_key(write_csv):
    path = write_csv(
        "events.csv",
        ["patient_id,order_key,actor_role,action_reason", "h1,nope,A,x"],
    )
    with pytest.raises(DataError, match="line 2"):
        ingest.parse_event_log(path)


def test_order_key_accepts_iso_timestamps(write_csv):
    path = write_csv(
        "events.csv",
        [
            "patient_id,order_key,actor_role,action_reason",
            "h1,2015-03-01T10:00:00,A,x",
            "h1,2015-03-01T09:59:59,B,y",
        ],
    )
    events = ingest.parse_event_log(path)
    sequences = ingest.build_sequences(events)
    assert sequences[0].labels == ("B|y", "A|x")


def test_parse_diagnosis_records_aggregates(write_csv):
    path = write_csv(
        "diagnoses.csv",
        ["patient_id,code", "h1,a", "h1,a", "h1,b"],
    )
    records = ingest.parse_diagnosis_records(path)
    assert {(r.patient_id, r.code): r.count for r in records} == {
        ("h1", "a"): 2,
        ("h1", "b"): 1,
    }


def test_parse_diagnosis_records_header_only(write_csv):
    path = write_csv("diagnoses.csv", ["patient_id,code"])
    assert ingest.parse_diagnosis_records(path) == []


def test_parse_diagnosis_records_two_patients(write_csv):
    path = write_csv("diagnoses.csv", ["patient_id,code", "h1,a", "h2,a"])
    records = ingest.parse_diagnosis_records(path)
    assert [(r.patient_id, r.code, r.count) for r in records] == [
        ("h1", "a", 1),
        ("h2", "a", 1),
    ]


def test_parse_diagnosis_records_empty_code(write_csv):
    path = write_csv("diagnoses.csv", ["patient_id,code", "h1,"])
    with pytest.raises(DataError, match="empty code"):
        ingest.parse_diagnosis_records(path)


def test_load_code_map(write_csv):
    path = write_csv(
        "codemap.csv",
        ["source_code,group_code,description", 'a,A,"x"', 'b,A,"x"'],
    )
    code_map = ingest.load_code_map(path)
    assert len(code_map) == 2
    assert code_map.group("a") == "A"
    assert code_map.group("b") == "A"


def test_load_code_map_empty(write_csv):
    path = write_csv("codemap.csv", ["source_code,group_code,description"])
    assert len(ingest.load_code_map(path)) == 0


def test_load_code_map_conflict(write_csv):
    path = write_csv(
        "codemap.csv",
        ["source_code,group_code,description", "a,A,x", "a,B,y"],
    )
    with pytest.raises(DataError, match="a: A vs B"):
        ingest.load_code_map(path)


def _records(spec):
    return [ingest.DiagnosisRecord(p, c, n) for p, c, n in spec]


def test_map_codes_sums_within_group():
    code_map = ingest.CodeMap({"a": ("A", ""), "b": ("A", "")})
    mapped, unmapped = ingest.map_codes(_records([("h1", "a", 2), ("h1", "b", 1)]), code_map)
    assert [(r.patient_id, r.code, r.count) for r in mapped] == [("h1", "A", 3)]
    assert unmapped == 0


def test_map_codes_empty_map_passthrough_is_identity():
    records = _records([("h1", "a", 2), ("h2", "b", 1)])
    mapped, unmapped = ingest.map_codes(records, ingest.CodeMap({}), "passthrough")
    assert mapped == records
    assert unmapped == 2


def test_map_codes_drop():
    code_map = ingest.CodeMap({"a": ("A", "")})
    mapped, unmapped = ingest.map_codes(
        _records([("h1", "a", 1), ("h1", "z", 1)]), code_map, "drop"
    )
    assert [(r.patient_id, r.code, r.count) for r in mapped] == [("h1", "A", 1)]
    assert unmapped == 1


def test_map_codes_bad_policy():
    with pytest.raises(UsageError):
        ingest.map_codes([], ingest.CodeMap({}), "explode")


def test_map_codes_conserves_counts_under_passthrough():
    records = _records([("h1", "a", 2), ("h1", "z", 5), ("h2", "b", 3)])
    code_map = ingest.CodeMap({"a": ("A", ""), "b": ("A", "")})
    mapped, _ = ingest.map_codes(records, code_map, "passthrough")
    assert sum(r.count for r in mapped) == sum(r.count for r in records)


def test_build_sequences_sorts_by_order_key():
    events = {
        "h1": [
            ingest.AccessEvent("h1", 2, "X", "r"),
            ingest.AccessEvent("h1", 1, "Y", "r"),
        ]
    }
    (seq,) = ingest.build_sequences(events)
    assert seq.labels == ("Y|r", "X|r")


def test_build_sequences_single_event_and_label_rule():
    events = {"h1": [ingest.AccessEvent("h1", 0, "RAD", "review")]}
    (seq,) = ingest.build_sequences(events)
    assert seq.labels == ("RAD|review",)


def test_build_sequences_stable_on_ties():
    events = {
        "h1": [
            ingest.AccessEvent("h1", 1, "A", "first"),
            ingest.AccessEvent("h1", 1, "B", "second"),
        ]
    }
    (seq,) = ingest.build_sequences(events)
    assert seq.labels == ("A|first", "B|second")


def test_event_count_round_trip(write_csv):
    rows = ["patient_id,order_key,actor_role,action_reason"]
    rows += [f"h{i % 3},{i},R{i},a{i}" for i in range(20)]
    path = write_csv("events.csv", rows)
    events = ingest.parse_event_log(path)
    sequences = ingest.build_sequences(events)
    assert sum(len(s.labels) for s in sequences) == 20


def test_build_sequences_deterministic(write_csv):
    rows = ["patient_id,order_key,actor_role,action_reason"]
    rows += [f"h{i % 5},{100 - i},R{i % 4},a{i % 3}" for i in range(30)]
    path = write_csv("events.csv", rows)
    first = ingest.build_sequences(ingest.parse_event_log(path))
    second = ingest.build_sequences(ingest.parse_event_log(path))
    assert first == second
