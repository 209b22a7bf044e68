from __future__ import annotations

import itertools
import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import arms_doc, documents, light_doc
from roboiaas.descriptor import (
    BLOCK_ORDER, ActuatorSpec, SensorSpec, capability_set, from_document, merge_descriptors,
    parse_descriptor, parse_range, serialize_descriptor, to_document, validate,
)
from roboiaas.errors import Conflict, ParseError, RangeError, UsageError, ValidationError

GOLDEN = Path(__file__).parent / "testdata" / "golden"
TABLE_LABELS = ("ph", "sen", "act", "info", "sname", "sval", "su")


def golden_pairs():
    inputs = sorted(GOLDEN.glob("*.input.json"))
    return [(p, p.with_name(p.name.replace(".input.", ".canonical."))) for p in inputs]


# -- golden corpus ------------------------------------------------------------

def test_golden_corpus_size_and_prototype_types():
    pairs = golden_pairs()
    assert len(pairs) >= 50
    names = " ".join(p.name for p, _ in pairs)
    assert "arms" in names and "light" in names


@pytest.mark.parametrize("src,canonical", golden_pairs(), ids=lambda p: p.name.split(".")[0])
def test_golden_round_trip(src, canonical):
    expected = canonical.read_text(encoding="utf-8").rstrip("\n")
    d = parse_descriptor(src.read_bytes())
    out = serialize_descriptor(d)
    assert out == expected
    # idempotent on canonical input and structurally stable
    assert serialize_descriptor(parse_descriptor(out)) == out
    assert parse_descriptor(out) == d
    for label in ("ph", "sen", "act", "info"):
        assert f'"{label}":' in out


def test_golden_corpus_carries_every_sensor_label():
    with_sensors = [c.read_text(encoding="utf-8") for _, c in golden_pairs()
                    if json.loads(c.read_text(encoding="utf-8"))["sen"]]
    assert with_sensors
    for text in with_sensors:
        for label in TABLE_LABELS:
            assert f'"{label}":' in text


# -- parse ----------------------------------------------------------------------

def test_light_robot_with_positional_actuators():
    text = json.dumps({"sen": [{"sname": "light", "sval": "(0,100)", "su": "lux"}],
                       "act": [["kicking-arm", "(0,90)", "deg"], ["movement-motor"]]})
    d = parse_descriptor(text)
    assert capability_set(d) == {"light", "kicking-arm", "movement-motor"}
    assert d.actuators[1] == ActuatorSpec("movement-motor", "", "")


def test_empty_document_is_valid_but_unpublishable():
    d = parse_descriptor("{}")
    assert capability_set(d) == frozenset()
    assert not d.publishable
    assert d.state == "IDLE" and d.location == (0.0, 0.0)


def test_arms_robot_capabilities():
    assert capability_set(from_document(arms_doc())) == {"gripper-arm", "movement-motor"}


def test_parse_error_reports_byte_offset():
    text = '{"ph": {}, "sen": [}'
    with pytest.raises(ParseError) as exc:
        parse_descriptor(text)
    assert exc.value.offset == text.index("}", 18)
    # multi-byte characters before the error count in bytes
    text = '{"ph": {"n": "é"}, x}'
    with pytest.raises(ParseError) as exc:
        parse_descriptor(text)
    assert exc.value.offset == len(text[: text.index("x")].encode("utf-8"))


@pytest.mark.parametrize("doc,label", [
    ({"color": "red"}, "color"),
    ({"sen": [{"sname": "light", "unit": "%"}]}, "unit"),
    ({"dynamic": {"speed": 1}}, "speed"),
    ({"interaction": {"host": "x"}}, "host"),
    ({"behavioral": {"skills": []}}, "skills"),
])
def test_unknown_label_names_the_label(doc, label):
    with pytest.raises(ValidationError) as exc:
        from_document(doc)
    assert exc.value.label == label
    assert label in str(exc.value)


@pytest.mark.parametrize("doc", [
    {"sen": [{"sname": "light", "sval": "(100,0)"}]},
    {"act": [["winch", "(5,-5)", "m"]]},
])
def test_inverted_range_is_a_range_error(doc):
    with pytest.raises(RangeError):
        from_document(doc)


@pytest.mark.parametrize("doc,label", [
    ({"dynamic": {"battery_pct": 101}}, "battery_pct"),
    ({"dynamic": {"battery_pct": -0.5}}, "battery_pct"),
    ({"dynamic": {"state": "SLEEPING"}}, "state"),
    ({"dynamic": {"location": [1]}}, "location"),
    ({"interaction": {"endpoint": "not a uri"}}, "endpoint"),
    ({"robotid": "rob 1"}, "robotid"),
    ({"act": [{"aname": "  "}]}, "aname"),
    ({"sen": [{"sname": "x", "sval": 3}]}, "sval"),
    ({"sen": "light"}, "sen"),
])
def test_validation_rejects_invariant_violations(doc, label):
    with pytest.raises(ValidationError) as exc:
        from_document(doc)
    assert exc.value.label == label


def test_parse_range():
    assert parse_range("(0, 100)") == (0.0, 100.0)
    assert parse_range("(-2.5,2.5)") == (-2.5, 2.5)
    assert parse_range("") is None
    with pytest.raises(ValidationError):
        parse_range("0..100")


# -- serialize --------------------------------------------------------------------

def test_sensor_name_normalized_on_output():
    d = from_document({"sen": [{"sname": "Camera", "sval": "(0,30)", "su": "fps"}]})
    out = serialize_descriptor(d)
    assert out.count('"sname"') == 1
    assert '"sname":"camera"' in out


def test_insertion_order_does_not_matter():
    a = light_doc()
    b = {k: a[k] for k in reversed(list(a))}
    b["ph"] = {k: a["ph"][k] for k in reversed(list(a["ph"]))}
    b["sen"] = [{k: e[k] for k in reversed(list(e))} for e in a["sen"]]
    assert serialize_descriptor(from_document(a)) == serialize_descriptor(from_document(b))


def test_block_order_and_no_whitespace():
    out = serialize_descriptor(from_document(dict(light_doc(), robotid="rob-3")))
    positions = [out.index(f'"{b}":') for b in ("robotid",) + BLOCK_ORDER]
    assert positions == sorted(positions)
    assert ": " not in out and ", " not in out


def test_serialize_refuses_invalid_descriptor():
    d = from_document(light_doc())
    bad = d.with_state("DANCING")
    with pytest.raises(ValidationError) as exc:
        serialize_descriptor(bad)
    assert exc.value.label == "state"


@settings(max_examples=200, deadline=None)
@given(documents())
def test_property_round_trip(doc):
    d = from_document(doc)
    out = serialize_descriptor(d)
    again = parse_descriptor(out)
    assert again == d
    assert serialize_descriptor(again) == out
    assert capability_set(again) == capability_set(d)
    assert from_document(to_document(d)) == d


@settings(max_examples=100, deadline=None)
@given(documents())
def test_property_labels_present_when_data_present(doc):
    out = serialize_descriptor(from_document(doc))
    for label in ("ph", "sen", "act", "info"):
        assert f'"{label}":' in out
    if doc["sen"]:
        for label in ("sname", "sval", "su"):
            assert f'"{label}":' in out


@settings(max_examples=100, deadline=None)
@given(documents())
def test_property_validate_accepts_generated_valid_input(doc):
    validate(from_document(doc))


# -- merge ----------------------------------------------------------------------

def test_merge_light_and_arms_covers_prototype_caps():
    light = from_document(dict(light_doc(), robotid="rob-1"))
    arms = from_document(dict(arms_doc(), robotid="rob-2"))
    comp = merge_descriptors([light, arms])
    assert comp.members == ("rob-1", "rob-2")
    assert {"light", "kicking-arm", "movement-motor"} <= comp.capabilities
    assert ("rob-1", SensorSpec("light", "(0,100)", "%")) in comp.sensors
    assert {rid for rid, _ in comp.actuators} == {"rob-1", "rob-2"}


def test_merge_singleton():
    d = from_document(dict(light_doc(), robotid="rob-9"))
    comp = merge_descriptors([d])
    assert comp.members == ("rob-9",)
    assert comp.capabilities == capability_set(d)


def test_merge_errors():
    d = from_document(dict(light_doc(), robotid="rob-9"))
    with pytest.raises(UsageError):
        merge_descriptors([])
    with pytest.raises(Conflict):
        merge_descriptors([d, d])


@settings(max_examples=100, deadline=None)
@given(st.lists(documents(with_id=False), min_size=1, max_size=4))
def test_property_merge_is_union_and_order_free(docs):
    ds = [from_document(dict(doc, robotid=f"rob-{k}")) for k, doc in enumerate(docs)]
    union = set()
    for doc in docs:
        union |= {e["sname"].strip().lower() for e in doc["sen"]}
        union |= {e["aname"].strip().lower() for e in doc["act"]}
        union |= {t.strip().lower() for t in doc["behavioral"]["supported_tasks"]}
    assert merge_descriptors(ds).capabilities == union
    for perm in itertools.islice(itertools.permutations(ds), 6):
        assert merge_descriptors(perm).capabilities == union
    if len(ds) >= 3:
        inner = merge_descriptors(ds[:2]).capabilities
        assert inner | merge_descriptors(ds[2:]).capabilities == union
