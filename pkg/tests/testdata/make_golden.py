"""Regenerate the descriptor golden corpus.

Writes ``golden/NNN-<name>.input.json`` (deliberately messy inputs: shuffled
keys, positional sen/act arrays, odd spacing, mixed-case tags, missing
optional blocks) and ``golden/NNN-<name>.canonical.json``.  The canonical
text is produced by the small rule-based canonicalizer below, which works
on raw JSON and shares no code with the package codec.

    python3 tests/testdata/make_golden.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

OUT = Path(__file__).parent / "golden"

BLOCKS = ["ph", "sen", "act", "info", "behavioral", "dynamic", "interaction"]
SEN = ["sname", "sval", "su"]
ACT = ["aname", "aval", "au"]


def _compact(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _entry(raw, labels):
    if isinstance(raw, list):
        raw = dict(zip(labels, raw))
    out = {k: raw.get(k, "") for k in labels}
    out[labels[0]] = out[labels[0]].strip().lower()
    return out


def canonicalize(doc: dict) -> str:
    """Reference canonical form, derived from the format rules only."""
    dyn = doc.get("dynamic", {})
    inter = doc.get("interaction", {})
    blocks = {
        "ph": dict(doc.get("ph", {})),
        "sen": [_entry(e, SEN) for e in doc.get("sen", [])],
        "act": [_entry(e, ACT) for e in doc.get("act", [])],
        "info": [{"n": e["n"], "v": e.get("v", "")} for e in doc.get("info", [])],
        "behavioral": {"supported_tasks": [t.strip().lower() for t in
                                           doc.get("behavioral", {}).get("supported_tasks", [])]},
        "dynamic": {"location": [float(c) for c in dyn.get("location", [0, 0])],
                    "battery_pct": float(dyn.get("battery_pct", 100)),
                    "state": dyn.get("state", "IDLE")},
        "interaction": {"protocol": inter.get("protocol", ""), "endpoint": inter.get("endpoint", "")},
    }
    parts = []
    if doc.get("robotid"):
        parts.append(f'"robotid":{_compact(doc["robotid"])}')
    parts += [f"{_compact(name)}:{_compact(blocks[name])}" for name in BLOCKS]
    return "{" + ",".join(parts) + "}"


def arms(k: int) -> dict:
    return {
        "ph": {"model": "nxt", "weight_g": 620, "wheels": 2},
        "act": [{"aname": "gripper-arm", "aval": "(0,180)", "au": "deg"},
                {"aname": "movement-motor", "aval": "(0,720)", "au": "deg/s"}],
        "info": [{"n": "vendor", "v": "lego"}, {"n": "type", "v": "arms"}],
        "dynamic": {"location": [1, k], "battery_pct": 100, "state": "IDLE"},
        "interaction": {"protocol": "nxt-lcp", "endpoint": f"nxt://iaas{k}/arms"},
    }


def light(k: int) -> dict:
    return {
        "ph": {"model": "nxt", "weight_g": 580, "wheels": 2},
        "sen": [{"sname": "light", "sval": "(0,100)", "su": "%"}],
        "act": [{"aname": "kicking-arm", "aval": "(0,90)", "au": "deg"},
                {"aname": "movement-motor", "aval": "(0,720)", "au": "deg/s"}],
        "info": [{"n": "vendor", "v": "lego"}, {"n": "type", "v": "light"}],
        "dynamic": {"location": [0, 2 * k], "battery_pct": 95.5, "state": "IDLE"},
        "interaction": {"protocol": "nxt-lcp", "endpoint": f"nxt://iaas{k}/light"},
    }


SENSOR_POOL = [("camera", "(0,30)", "fps"), ("microphone", "(20,20000)", "Hz"), ("light", "(0,100)", "%"),
               ("sonar", "(0,2.55)", "m"), ("thermal", "(-20,150)", "°C"), ("gas", "(0,1000)", "ppm"),
               ("touch", "(0,1)", "")]
ACTUATOR_POOL = [("gripper-arm", "(0,180)", "deg"), ("kicking-arm", "(0,90)", "deg"),
                 ("movement-motor", "(0,720)", "deg/s"), ("water-pump", "(0,5)", "l/min"),
                 ("drill", "(0,3000)", "rpm"), ("winch", "(0,2)", "m/s")]
STATES = ["IDLE", "ASSIGNED", "EXECUTING", "FAILED", "OFFLINE"]


def random_doc(rng: random.Random, k: int) -> dict:
    doc: dict = {}
    if rng.random() < 0.4:
        doc["robotid"] = f"rob-{k}"
    if rng.random() < 0.8:
        doc["ph"] = {rng.choice(["weight_g", "height_cm", "model", "wheels", "arms"]): rng.choice(
            [1, 2.5, "nxt", "ev3", True]) for _ in range(rng.randint(0, 3))}
    sens = rng.sample(SENSOR_POOL, rng.randint(0, 3))
    acts = rng.sample(ACTUATOR_POOL, rng.randint(0 if sens else 1, 3))
    if sens or rng.random() < 0.5:
        doc["sen"] = [_mess(rng, s, SEN) for s in sens]
    if acts or rng.random() < 0.5:
        doc["act"] = [_mess(rng, a, ACT) for a in acts]
    if rng.random() < 0.6:
        doc["info"] = [{"n": "vendor", "v": rng.choice(["lego", "irobot", "ü-bots"])}]
    if rng.random() < 0.5:
        doc["behavioral"] = {"supported_tasks": rng.sample(["Fire-Suppression", "search", "mapping"],
                                                           rng.randint(0, 2))}
    if rng.random() < 0.8:
        dyn = {"location": [rng.choice([0, 1, -3, 2.25, 10]), rng.choice([0, 4, 0.5, -1.75])]}
        if rng.random() < 0.7:
            dyn["battery_pct"] = rng.choice([100, 55, 12.5, 0])
        if rng.random() < 0.7:
            dyn["state"] = rng.choice(STATES)
        doc["dynamic"] = dyn
    if rng.random() < 0.8:
        doc["interaction"] = {"protocol": rng.choice(["nxt-lcp", "ros", "http"]),
                              "endpoint": f"nxt://host{k}/r{k}"}
    return doc


def _mess(rng, triple, labels):
    name, rng_text, unit = triple
    if rng.random() < 0.3:
        name = name.upper() if rng.random() < 0.5 else f"  {name} "
    if rng.random() < 0.35:
        return [name, rng_text, unit][: rng.randint(1, 3)]
    entry = dict(zip(labels, [name, rng_text, unit]))
    if rng.random() < 0.3:
        entry.pop(labels[2])
    return dict(sorted(entry.items(), key=lambda _: rng.random()))


def _shuffle_keys(rng, doc):
    items = list(doc.items())
    rng.shuffle(items)
    return dict(items)


def main() -> None:
    rng = random.Random(20240)
    OUT.mkdir(parents=True, exist_ok=True)
    for old in OUT.glob("*.json"):
        old.unlink()
    cases = []
    for k in range(1, 5):
        cases.append((f"arms-iaas{k}", arms(k)))
        cases.append((f"light-iaas{k}", light(k)))
    cases.append(("arms-with-id", dict(arms(1), robotid="rob-7")))
    cases.append(("light-positional", dict(light(2), sen=[["light", "(0,100)", "%"]],
                                           act=[["kicking-arm", "(0,90)", "deg"], ["Movement-Motor"]])))
    cases.append(("minimal-actuator", {"act": [{"aname": "winch"}]}))
    cases.append(("minimal-sensor", {"sen": [["touch"]]}))
    while len(cases) < 64:
        cases.append((f"random-{len(cases):02d}", random_doc(rng, len(cases))))
    for i, (name, doc) in enumerate(cases, start=1):
        doc = _shuffle_keys(rng, doc)
        indent = rng.choice([None, 1, 2, 4])
        text = json.dumps(doc, indent=indent, ensure_ascii=rng.random() < 0.5)
        (OUT / f"{i:03d}-{name}.input.json").write_text(text + "\n", encoding="utf-8")
        (OUT / f"{i:03d}-{name}.canonical.json").write_text(canonicalize(doc) + "\n", encoding="utf-8")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
