"""Append-only structured event log shared by the nodes of one scenario."""

from __future__ import annotations

import json
from pathlib import Path


class EventLog:
    def __init__(self):
        self.entries: list[dict] = []

    def record(self, t_ms: float, node: str, kind: str, **fields) -> dict:
        entry = {"t_ms": round(t_ms, 6), "node": node, "kind": kind, **fields}
        self.entries.append(entry)
        return entry

    def of_kind(self, kind: str) -> list[dict]:
        return [e for e in self.entries if e["kind"] == kind]

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> str:
        return json.dumps(self.entries, sort_keys=True, indent=1)

    def dump(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path
