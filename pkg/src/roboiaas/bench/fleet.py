"""Robot metadata documents for the standard scenarios.

Each IaaS hosts one robot of each prototype type:

* ``arms``: gripper arm plus movement motor
* ``light``: light sensor, kicking arm and movement motor

The TAD fleet adds, on every IaaS but the first, a probe robot whose sensor
tag is unique to that IaaS, so a request for all probe tags has to be
delegated to three (or more) distinct remote hosts.
"""

from __future__ import annotations

PROTOCOL = "nxt-lcp"

# the fire-suppression sub-task: detect balls, kick them, carry them, move
FIRE_SUPPRESSION_CAPS = ("light", "kicking-arm", "movement-motor", "gripper-arm")
FIRE_SITE = (6.0, 2.0)
FIRE_REMOTE_PENALTY = 0.25


def _positions(k: int) -> tuple[tuple[float, float], tuple[float, float]]:
    """(arms robot, light robot) positions for IaaS ``k`` (1-based)."""
    if k == 1:
        return (1.0, 1.0), (0.0, 2.0)
    if k == 2:
        return (11.0, 0.5), (8.0, 1.0)
    base = 10.0 * (k - 1)
    return (base + 1.0, 6.0), (base, 7.0)


def arms_robot(iaas: int, location=(0.0, 0.0)) -> dict:
    return {
        "ph": {"model": "nxt", "weight_g": 620, "wheels": 2},
        "sen": [],
        "act": [
            {"aname": "gripper-arm", "aval": "(0,180)", "au": "deg"},
            {"aname": "movement-motor", "aval": "(0,720)", "au": "deg/s"},
        ],
        "info": [{"n": "vendor", "v": "lego"}, {"n": "type", "v": "arms"}],
        "behavioral": {"supported_tasks": []},
        "dynamic": {"location": list(location), "battery_pct": 100.0, "state": "IDLE"},
        "interaction": {"protocol": PROTOCOL, "endpoint": f"nxt://iaas{iaas}/arms"},
    }


def light_robot(iaas: int, location=(0.0, 0.0)) -> dict:
    return {
        "ph": {"model": "nxt", "weight_g": 580, "wheels": 2},
        "sen": [{"sname": "light", "sval": "(0,100)", "su": "%"}],
        "act": [
            {"aname": "kicking-arm", "aval": "(0,90)", "au": "deg"},
            {"aname": "movement-motor", "aval": "(0,720)", "au": "deg/s"},
        ],
        "info": [{"n": "vendor", "v": "lego"}, {"n": "type", "v": "light"}],
        "behavioral": {"supported_tasks": []},
        "dynamic": {"location": list(location), "battery_pct": 100.0, "state": "IDLE"},
        "interaction": {"protocol": PROTOCOL, "endpoint": f"nxt://iaas{iaas}/light"},
    }


def probe_robot(iaas: int) -> dict:
    return {
        "ph": {"model": "probe"},
        "sen": [{"sname": f"probe-iaas{iaas}", "sval": "(0,1)", "su": ""}],
        "act": [],
        "info": [{"n": "type", "v": "probe"}],
        "behavioral": {"supported_tasks": []},
        "dynamic": {"location": [10.0 * (iaas - 1), 20.0], "battery_pct": 100.0, "state": "IDLE"},
        "interaction": {"protocol": "probe-line", "endpoint": f"probe://iaas{iaas}"},
    }


def robot_type(doc: dict) -> str:
    for item in doc.get("info", []):
        if item.get("n") == "type":
            return item.get("v")
    return ""


def default_fleet(iaas_count: int = 4, without: tuple[str, ...] = ()) -> list[list[dict]]:
    """Per-IaaS metadata documents; ``without`` drops robot types fleet-wide."""
    fleet = []
    for k in range(1, iaas_count + 1):
        arms_at, light_at = _positions(k)
        docs = [arms_robot(k, arms_at), light_robot(k, light_at)]
        fleet.append([d for d in docs if robot_type(d) not in without])
    return fleet


def tad_fleet(iaas_count: int = 4) -> list[list[dict]]:
    fleet = default_fleet(iaas_count)
    for k in range(2, iaas_count + 1):
        fleet[k - 1].append(probe_robot(k))
    return fleet


def tad_caps(iaas_count: int = 4) -> tuple[str, ...]:
    return tuple(f"probe-iaas{k}" for k in range(2, iaas_count + 1))


FLEETS = {"default": default_fleet, "tad": tad_fleet}
