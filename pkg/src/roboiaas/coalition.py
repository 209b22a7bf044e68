"""Coalition formation as minimum-cost capability cover.

A coalition is a set of robot services whose capabilities jointly cover a
task's required tags.  Each member costs its euclidean distance to the task
site plus a fixed engagement cost, plus an optional penalty when the robot
belongs to another IaaS.  Up to ``EXACT_LIMIT`` useful candidates the optimum
is found exactly by a 0/1 dynamic program over covered-tag bitmasks; above
that a greedy max-new-coverage-per-cost heuristic is used.  Ties between
equal-cost covers go to the lexicographically smallest sorted id tuple.

This is a stand-in for a dedicated multi-robot coalition algorithm; it keeps
optimality checkable by brute force.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .descriptor import CompositeDescriptor, RobotDescriptor, merge_descriptors, normalize_tag
from .errors import Unsatisfiable, UsageError

EXACT_LIMIT = 15


@dataclass(frozen=True)
class Candidate:
    robot_id: str
    owner_iaas: str
    capabilities: frozenset[str]
    location: tuple[float, float]
    remote: bool = False
    available: bool = True
    state: str = "IDLE"
    descriptor: RobotDescriptor | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class CostModel:
    engagement: float = 0.5
    remote_penalty: float = 0.0

    def member_cost(self, cand: Candidate, site: tuple[float, float]) -> float:
        d = math.hypot(cand.location[0] - site[0], cand.location[1] - site[1])
        return d + self.engagement + (self.remote_penalty if cand.remote else 0.0)

    def cost(self, members: Iterable[Candidate], site: tuple[float, float]) -> float:
        total = 0.0
        for cand in sorted(members, key=lambda c: c.robot_id):
            total += self.member_cost(cand, site)
        return total


@dataclass(frozen=True)
class CoalitionMember:
    robot_id: str
    owner_iaas: str
    tags: tuple[str, ...]
    remote: bool = False

    def to_dict(self) -> dict:
        return {"robotid": self.robot_id, "owner": self.owner_iaas, "tags": list(self.tags),
                "remote": self.remote}


@dataclass(frozen=True)
class Coalition:
    members: tuple[CoalitionMember, ...]
    cost: float
    pattern: CompositeDescriptor | None = None
    method: str = "exact"

    @property
    def robot_ids(self) -> tuple[str, ...]:
        return tuple(m.robot_id for m in self.members)

    def to_dict(self) -> dict:
        return {
            "members": [m.to_dict() for m in self.members],
            "cost": self.cost,
            "method": self.method,
            "pattern": self.pattern.to_dict() if self.pattern else None,
        }


def _relevant(candidates: Sequence[Candidate], required: frozenset[str]) -> list[Candidate]:
    seen = set()
    out = []
    for c in candidates:
        if c.robot_id in seen:
            raise UsageError(f"candidate {c.robot_id} listed twice")
        seen.add(c.robot_id)
        if c.capabilities & required:
            out.append(c)
    return sorted(out, key=lambda c: c.robot_id)


def exact_cover(candidates: Sequence[Candidate], required: frozenset[str],
                site: tuple[float, float], cost_model: CostModel) -> tuple[Candidate, ...] | None:
    """Minimum-cost cover; ``None`` if the candidates cannot cover ``required``."""
    tags = sorted(required)
    bit = {t: 1 << i for i, t in enumerate(tags)}
    full = (1 << len(tags)) - 1
    cands = sorted(candidates, key=lambda c: c.robot_id)
    # mask -> (cost, member ids, member indices); members are added in id order
    best: dict[int, tuple[float, tuple[str, ...], tuple[int, ...]]] = {0: (0.0, (), ())}
    for i, cand in enumerate(cands):
        mask = 0
        for t in cand.capabilities:
            mask |= bit.get(t, 0)
        if not mask:
            continue
        mc = cost_model.member_cost(cand, site)
        for covered, (cost, ids, idx) in list(best.items()):
            grown = covered | mask
            if grown == covered:
                continue
            value = (cost + mc, ids + (cand.robot_id,), idx + (i,))
            current = best.get(grown)
            if current is None or value[:2] < current[:2]:
                best[grown] = value
    if full not in best:
        return None
    return tuple(cands[i] for i in best[full][2])


def greedy_cover(candidates: Sequence[Candidate], required: frozenset[str],
                 site: tuple[float, float], cost_model: CostModel) -> tuple[Candidate, ...] | None:
    uncovered = set(required)
    pool = sorted(candidates, key=lambda c: c.robot_id)
    chosen: list[Candidate] = []
    while uncovered:
        best = None
        best_key = None
        for cand in pool:
            gain = len(cand.capabilities & uncovered)
            if not gain:
                continue
            key = (-gain / cost_model.member_cost(cand, site), cand.robot_id)
            if best_key is None or key < best_key:
                best, best_key = cand, key
        if best is None:
            return None
        chosen.append(best)
        pool.remove(best)
        uncovered -= best.capabilities
    # drop members made redundant by later picks, most expensive first
    for cand in sorted(chosen, key=lambda c: (cost_model.member_cost(c, site), c.robot_id), reverse=True):
        rest = [c for c in chosen if c is not cand]
        covered = set().union(*(c.capabilities for c in rest)) if rest else set()
        if required <= covered:
            chosen = rest
    return tuple(sorted(chosen, key=lambda c: c.robot_id))


def form_coalition(candidates: Sequence[Candidate], required_caps: Iterable[str],
                   site: tuple[float, float], cost_model: CostModel | None = None,
                   exact_limit: int = EXACT_LIMIT, method: str = "auto") -> Coalition:
    cost_model = cost_model or CostModel()
    required = frozenset(normalize_tag(t) for t in required_caps)
    if not required:
        raise UsageError("a coalition needs at least one required capability")
    if not candidates:
        raise Unsatisfiable(required)
    pool = _relevant(candidates, required)
    reachable = frozenset().union(*(c.capabilities for c in pool)) if pool else frozenset()
    missing = required - reachable
    if missing:
        raise Unsatisfiable(missing)
    if method == "auto":
        method = "exact" if len(pool) <= exact_limit else "greedy"
    solver = {"exact": exact_cover, "greedy": greedy_cover}[method]
    chosen = solver(pool, required, site, cost_model)
    if chosen is None:
        raise Unsatisfiable(missing)
    members = tuple(
        CoalitionMember(c.robot_id, c.owner_iaas, tuple(sorted(c.capabilities & required)), c.remote)
        for c in chosen
    )
    pattern = None
    if all(c.descriptor is not None for c in chosen):
        pattern = merge_descriptors(c.descriptor for c in chosen)
    return Coalition(members, cost_model.cost(chosen, site), pattern, method)


def check_coalition(coalition: Coalition, candidates: Sequence[Candidate], required_caps: Iterable[str],
                    site: tuple[float, float], cost_model: CostModel) -> list[str]:
    """Return the violated coalition invariants (empty when sound)."""
    required = frozenset(normalize_tag(t) for t in required_caps)
    by_id = {c.robot_id: c for c in candidates}
    problems = []
    members = [by_id.get(m.robot_id) for m in coalition.members]
    if any(m is None for m in members):
        return ["member is not a candidate"]
    union = frozenset().union(*(m.capabilities for m in members)) if members else frozenset()
    if not required <= union:
        problems.append("coverage")
    if any(not (m.capabilities & required) for m in members):
        problems.append("member contributes no required tag")
    if coalition.cost != cost_model.cost(members, site):
        problems.append("cost mismatch")
    return problems
