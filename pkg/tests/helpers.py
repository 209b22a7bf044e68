"""Shared builders and hypothesis strategies for the test suite."""

from __future__ import annotations

import copy

from hypothesis import strategies as st

from roboiaas.bench.fleet import arms_robot, light_robot

NAMES = ["camera", "light", "microphone", "sonar", "gripper-arm", "kicking-arm", "movement-motor",
         "drill", "winch", "thermal"]


def arms_doc(iaas: int = 1, location=(0.0, 0.0)) -> dict:
    return copy.deepcopy(arms_robot(iaas, location))


def light_doc(iaas: int = 1, location=(0.0, 0.0)) -> dict:
    return copy.deepcopy(light_robot(iaas, location))


def robot_doc(endpoint: str, sensors=(), actuators=(), location=(0.0, 0.0), tasks=()) -> dict:
    return {
        "sen": [{"sname": s, "sval": "(0,100)", "su": "%"} for s in sensors],
        "act": [{"aname": a, "aval": "(0,1)", "au": ""} for a in actuators],
        "behavioral": {"supported_tasks": list(tasks)},
        "dynamic": {"location": list(location), "battery_pct": 100.0, "state": "IDLE"},
        "interaction": {"protocol": "nxt-lcp", "endpoint": endpoint},
    }


_text = st.text(st.characters(min_codepoint=32, max_codepoint=0x2FF, blacklist_categories=("Cs",)),
                max_size=8)
_tag = st.sampled_from(NAMES) | st.from_regex(r"[a-z][a-z0-9-]{0,8}", fullmatch=True)


@st.composite
def _range(draw):
    if draw(st.booleans()):
        return ""
    lo = draw(st.integers(-1000, 1000))
    hi = draw(st.integers(lo, lo + 5000))
    return f"({lo},{hi})"


_finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
_scalar = st.one_of(st.integers(-10**6, 10**6), _finite, _text, st.booleans(), st.none())


@st.composite
def documents(draw, with_id: bool | None = None):
    """Valid robot documents in plain object form."""
    doc = {}
    if with_id if with_id is not None else draw(st.booleans()):
        doc["robotid"] = draw(st.from_regex(r"rob-[0-9]{1,4}", fullmatch=True))
    doc["ph"] = draw(st.dictionaries(st.from_regex(r"[a-z_]{1,8}", fullmatch=True), _scalar, max_size=3))
    doc["sen"] = [{"sname": t, "sval": draw(_range()), "su": draw(_text)}
                  for t in draw(st.lists(_tag, max_size=3))]
    doc["act"] = [{"aname": t, "aval": draw(_range()), "au": draw(_text)}
                  for t in draw(st.lists(_tag, max_size=3))]
    doc["info"] = [{"n": n, "v": v} for n, v in draw(
        st.lists(st.tuples(st.from_regex(r"[a-z]{1,6}", fullmatch=True), _scalar), max_size=3))]
    doc["behavioral"] = {"supported_tasks": draw(st.lists(_tag, max_size=2))}
    doc["dynamic"] = {"location": [draw(_finite), draw(_finite)],
                      "battery_pct": draw(st.floats(0, 100)),
                      "state": draw(st.sampled_from(["IDLE", "ASSIGNED", "EXECUTING", "FAILED", "OFFLINE"]))}
    doc["interaction"] = {"protocol": draw(st.sampled_from(["", "nxt-lcp", "ros"])),
                          "endpoint": draw(st.sampled_from(["", "nxt://a/b", "http://h:1/x"]))}
    return doc


def publishable(doc: dict) -> bool:
    return bool(doc.get("sen") or doc.get("act") or doc.get("behavioral", {}).get("supported_tasks"))
