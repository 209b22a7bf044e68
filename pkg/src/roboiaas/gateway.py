"""Robot gateways and the simulated physical robots behind them.

Gateways translate sub-task command lists into a line-oriented robot wire
protocol and turn the robot's reply lines back into events::

    CMD <taskid> MOVE <x> <y>        EVT <taskid> DONE
    CMD <taskid> ACTUATE <tag>       EVT <taskid> FAIL <reason>
    CMD <taskid> SENSE <tag>         EVT <taskid> SENSED <tag> <value>

Frames are UTF-8, newline-delimited, space-separated.  One sub-task travels
as one block of CMD lines and is answered by exactly one terminal EVT.
"""

from __future__ import annotations

import asyncio
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .descriptor import RobotDescriptor
from .errors import RoutingError, UsageError

log = logging.getLogger(__name__)

SPEED_M_PER_MS = 0.5 / 1000.0
ACTUATE_MS = 200.0
SENSE_MS = 50.0
DRAIN_MS = 2000.0
_EPS_MS = 1e-6

ROBOT_TRANSITIONS = {
    "IDLE": {"ASSIGNED"},
    "ASSIGNED": {"EXECUTING"},
    "EXECUTING": {"IDLE", "FAILED"},
    "FAILED": set(),
}


# -- wire protocol ------------------------------------------------------------

@dataclass(frozen=True)
class Command:
    op: str
    args: tuple = ()

    def __post_init__(self):
        if self.op not in ("MOVE", "ACTUATE", "SENSE"):
            raise UsageError(f"unknown robot command {self.op!r}")

    @classmethod
    def move(cls, x: float, y: float) -> Command:
        return cls("MOVE", (float(x), float(y)))

    @classmethod
    def actuate(cls, tag: str) -> Command:
        return cls("ACTUATE", (tag,))

    @classmethod
    def sense(cls, tag: str) -> Command:
        return cls("SENSE", (tag,))

    def to_list(self) -> list:
        return [self.op, *self.args]

    @classmethod
    def from_list(cls, raw) -> Command:
        op, *args = raw
        if op == "MOVE":
            return cls.move(*args)
        return cls(op, tuple(args))


@dataclass(frozen=True)
class RobotWireEvent:
    task_id: str
    kind: str  # DONE | FAIL | SENSED
    tag: str = ""
    value: float | None = None
    reason: str = ""

    @property
    def terminal(self) -> bool:
        return self.kind in ("DONE", "FAIL")


def fmt_num(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _token(text: str) -> str:
    if not text or any(c.isspace() for c in text):
        raise UsageError(f"wire token {text!r} must be non-empty and contain no whitespace")
    return text


def format_command(task_id: str, cmd: Command) -> str:
    if cmd.op == "MOVE":
        return f"CMD {_token(task_id)} MOVE {fmt_num(cmd.args[0])} {fmt_num(cmd.args[1])}"
    return f"CMD {_token(task_id)} {cmd.op} {_token(cmd.args[0])}"


def format_event(ev: RobotWireEvent) -> str:
    if ev.kind == "DONE":
        return f"EVT {ev.task_id} DONE"
    if ev.kind == "FAIL":
        return f"EVT {ev.task_id} FAIL {_token(ev.reason)}"
    return f"EVT {ev.task_id} SENSED {ev.tag} {fmt_num(ev.value)}"


def parse_command(line: str) -> tuple[str, Command]:
    parts = line.split(" ")
    if len(parts) < 4 or parts[0] != "CMD":
        raise UsageError(f"malformed command frame {line!r}")
    task_id, op, args = parts[1], parts[2], parts[3:]
    if op == "MOVE" and len(args) == 2:
        return task_id, Command.move(float(args[0]), float(args[1]))
    if op in ("ACTUATE", "SENSE") and len(args) == 1:
        return task_id, Command(op, (args[0],))
    raise UsageError(f"malformed command frame {line!r}")


def parse_event(line: str) -> RobotWireEvent:
    parts = line.split(" ")
    if len(parts) < 3 or parts[0] != "EVT":
        raise UsageError(f"malformed event frame {line!r}")
    task_id, kind = parts[1], parts[2]
    if kind == "DONE" and len(parts) == 3:
        return RobotWireEvent(task_id, "DONE")
    if kind == "FAIL" and len(parts) == 4:
        return RobotWireEvent(task_id, "FAIL", reason=parts[3])
    if kind == "SENSED" and len(parts) == 5:
        return RobotWireEvent(task_id, "SENSED", tag=parts[3], value=float(parts[4]))
    raise UsageError(f"malformed event frame {line!r}")


# -- simulated robot ----------------------------------------------------------

@dataclass
class SimTask:
    task_id: str
    commands: tuple[Command, ...]
    duration_ms: float
    started_ms: float | None = None
    start_pos: tuple[float, float] = (0.0, 0.0)


class SimRobot:
    """Deterministic execution model of one physical robot.

    Sub-tasks queue FIFO; the head task runs for its duration (travel time at
    0.5 m/s plus fixed actuation/sensing times) and then completes with DONE,
    or FAIL with the seeded per-task failure probability.
    """

    def __init__(self, descriptor: RobotDescriptor, fail_p: float = 0.0, seed: int = 0):
        if not 0.0 <= fail_p <= 1.0:
            raise ValueError("failure probability must lie in [0, 1]")
        self.descriptor = descriptor
        self.robot_id = descriptor.robot_id
        self.endpoint = descriptor.interaction_ch.endpoint
        self.protocol = descriptor.interaction_ch.protocol or "generic"
        self.position = tuple(descriptor.location)
        self.battery_pct = descriptor.dynamic_ch.battery_pct
        self.fail_p = fail_p
        self.rng = random.Random(f"{seed}:{self.endpoint or self.robot_id}")
        self.state = "IDLE"
        self.queue: deque[SimTask] = deque()
        self.transitions: list[tuple[float, str]] = []

    def _to(self, state: str, now_ms: float) -> None:
        if state not in ROBOT_TRANSITIONS[self.state]:
            raise RuntimeError(f"illegal robot transition {self.state} -> {state}")
        self.state = state
        self.transitions.append((now_ms, state))

    def reset(self, now_ms: float = 0.0) -> None:
        if self.state != "FAILED":
            return
        self.state = "IDLE"
        self.transitions.append((now_ms, "IDLE"))

    def task_duration(self, commands, origin=None) -> float:
        pos = origin or self.position
        total = 0.0
        for cmd in commands:
            if cmd.op == "MOVE":
                target = cmd.args
                total += math.dist(pos, target) / SPEED_M_PER_MS
                pos = target
            elif cmd.op == "ACTUATE":
                total += ACTUATE_MS
            else:
                total += SENSE_MS
        return total

    def submit(self, task_id: str, commands, now_ms: float, duration_ms: float | None = None) -> list[RobotWireEvent]:
        commands = tuple(commands)
        if duration_ms is None:
            origin = _final_position(self.queue[-1], self.position) if self.queue else None
            duration_ms = self.task_duration(commands, origin)
        if duration_ms < 0:
            raise ValueError("task duration must be non-negative")
        if self.state == "FAILED":
            return [RobotWireEvent(task_id, "FAIL", reason="robot-failed")]
        self.queue.append(SimTask(task_id, commands, duration_ms))
        if self.state == "IDLE":
            self._to("ASSIGNED", now_ms)
            return self._start_next(now_ms)
        return []

    def _start_next(self, now_ms: float) -> list[RobotWireEvent]:
        task = self.queue[0]
        task.started_ms = now_ms
        task.start_pos = self.position
        self._to("EXECUTING", now_ms)
        return self.step(now_ms)

    def next_deadline(self) -> float | None:
        if self.state != "EXECUTING" or not self.queue:
            return None
        task = self.queue[0]
        return task.started_ms + task.duration_ms

    def progress(self, now_ms: float) -> float:
        if self.state != "EXECUTING" or not self.queue:
            return 0.0
        task = self.queue[0]
        if task.duration_ms <= 0:
            return 1.0
        return min(1.0, max(0.0, (now_ms - task.started_ms) / task.duration_ms))

    def _update_position(self, task: SimTask, now_ms: float) -> None:
        elapsed = now_ms - task.started_ms
        pos = task.start_pos
        for cmd in task.commands:
            if cmd.op == "MOVE":
                target = cmd.args
                leg = math.dist(pos, target) / SPEED_M_PER_MS
                if elapsed >= leg:
                    pos = target
                    elapsed -= leg
                    continue
                frac = elapsed / leg
                self.position = (pos[0] + (target[0] - pos[0]) * frac, pos[1] + (target[1] - pos[1]) * frac)
                return
            elapsed -= ACTUATE_MS if cmd.op == "ACTUATE" else SENSE_MS
            if elapsed < 0:
                break
        self.position = pos

    def step(self, now_ms: float) -> list[RobotWireEvent]:
        """Advance the head task to ``now_ms``; return events it produced."""
        events: list[RobotWireEvent] = []
        while self.state == "EXECUTING" and self.queue:
            task = self.queue[0]
            self._update_position(task, now_ms)
            done_at = task.started_ms + task.duration_ms
            if now_ms + _EPS_MS < done_at:
                break
            # a coarse step may cross several deadlines; chain from the real end time
            done_at = min(done_at, now_ms)
            self.queue.popleft()
            if self.rng.random() < self.fail_p:
                events.append(RobotWireEvent(task.task_id, "FAIL", reason="fault-injected"))
                self._to("FAILED", done_at)
                while self.queue:
                    events.append(RobotWireEvent(self.queue.popleft().task_id, "FAIL", reason="robot-failed"))
                break
            for cmd in task.commands:
                if cmd.op == "SENSE":
                    events.append(RobotWireEvent(task.task_id, "SENSED", cmd.args[0], self._sense(cmd.args[0])))
            events.append(RobotWireEvent(task.task_id, "DONE"))
            self._to("IDLE", done_at)
            if self.queue:
                self._to("ASSIGNED", done_at)
                task = self.queue[0]
                task.started_ms = done_at
                task.start_pos = self.position
                self._to("EXECUTING", done_at)
        return events

    def _sense(self, tag: str) -> float:
        for s in self.descriptor.sensors:
            if s.sname == tag:
                rng = s.value_range()
                if rng is None:
                    return 0.0
                return round(self.rng.uniform(*rng), 3)
        return 0.0

    # -- single-owner execution context ---------------------------------------

    async def run(self, inbox: asyncio.Queue, outbox: asyncio.Queue) -> None:
        """Consume CMD blocks from ``inbox`` and emit EVT lines to ``outbox``."""
        loop = asyncio.get_running_loop()
        while True:
            now = loop.time() * 1000.0
            deadline = self.next_deadline()
            block = None
            if deadline is None:
                block = await inbox.get()
            elif deadline > now + _EPS_MS:
                try:
                    block = await asyncio.wait_for(inbox.get(), (deadline - now) / 1000.0)
                except asyncio.TimeoutError:
                    block = None
            now = loop.time() * 1000.0
            events = self.step(now)
            if block is not None:
                events += self._accept_block(block, now)
            for ev in events:
                outbox.put_nowait(format_event(ev))

    def _accept_block(self, block: str, now_ms: float) -> list[RobotWireEvent]:
        parsed = [parse_command(line) for line in block.split("\n") if line]
        task_ids = {tid for tid, _ in parsed}
        if len(task_ids) != 1:
            raise UsageError("a command block must carry exactly one task id")
        return self.submit(parsed[0][0], [cmd for _, cmd in parsed], now_ms)


def _final_position(task: SimTask, default):
    pos = default
    for cmd in task.commands:
        if cmd.op == "MOVE":
            pos = cmd.args
    return pos


def sim_step(robot: SimRobot, now_ms: float) -> list[RobotWireEvent]:
    return robot.step(now_ms)


# -- gateways -----------------------------------------------------------------

class EventStream:
    """Async iterator over one task's events; ends after the terminal event."""

    def __init__(self):
        self._queue: asyncio.Queue = asyncio.Queue()
        self.frames: list[str] = []

    def _push(self, ev: RobotWireEvent) -> None:
        self._queue.put_nowait(ev)

    def __aiter__(self):
        return self

    async def __anext__(self) -> RobotWireEvent:
        if self._queue is None:
            raise StopAsyncIteration
        ev = await self._queue.get()
        if ev.terminal:
            self._queue = None
        return ev

    async def collect(self) -> list[RobotWireEvent]:
        return [ev async for ev in self]


@dataclass
class _Binding:
    robot: SimRobot
    inbox: asyncio.Queue
    outbox: asyncio.Queue
    tasks: list = field(default_factory=list)


EventListener = Callable[[str, RobotWireEvent], None]


class GatewayInstance:
    def __init__(self, gateway_id: str, protocol: str, listener: EventListener | None = None,
                 clock: Callable[[], float] | None = None):
        self.gateway_id = gateway_id
        self.protocol = protocol
        self.state = "UP"
        self.listener = listener
        self.wire_log: list[tuple[float, str, str]] = []
        self._clock = clock or (lambda: asyncio.get_running_loop().time() * 1000.0)
        self._bindings: dict[str, _Binding] = {}
        self._streams: dict[tuple[str, str], EventStream] = {}

    @property
    def robot_ids(self) -> list[str]:
        return sorted(self._bindings)

    def bind(self, robot: SimRobot) -> None:
        if self.state == "DOWN":
            raise RoutingError(f"gateway {self.gateway_id} is down")
        if robot.protocol != self.protocol:
            raise UsageError(f"robot speaks {robot.protocol}, gateway speaks {self.protocol}")
        if robot.robot_id in self._bindings:
            return
        binding = _Binding(robot, asyncio.Queue(), asyncio.Queue())
        loop = asyncio.get_running_loop()
        binding.tasks = [
            loop.create_task(robot.run(binding.inbox, binding.outbox), name=f"robot:{robot.robot_id}"),
            loop.create_task(self._pump(robot.robot_id, binding.outbox), name=f"gw-pump:{robot.robot_id}"),
        ]
        self._bindings[robot.robot_id] = binding
        self.state = "UP"

    def unbind(self, robot_id: str) -> None:
        binding = self._bindings.pop(robot_id, None)
        if binding:
            for task in binding.tasks:
                task.cancel()

    def robot(self, robot_id: str) -> SimRobot:
        binding = self._bindings.get(robot_id)
        if binding is None:
            raise RoutingError(f"robot {robot_id} is not bound to {self.gateway_id}")
        return binding.robot

    def translate_and_send(self, robot_id: str, task_id: str, commands) -> EventStream:
        """Frame ``commands`` and send them to the robot as one block."""
        if self.state != "UP":
            raise RoutingError(f"gateway {self.gateway_id} is {self.state}")
        binding = self._bindings.get(robot_id)
        if binding is None:
            raise RoutingError(f"robot {robot_id} is not bound to {self.gateway_id}")
        if binding.robot.state == "FAILED":
            raise RoutingError(f"robot {robot_id} is FAILED")
        commands = [c if isinstance(c, Command) else Command.from_list(c) for c in commands]
        if not commands:
            raise UsageError("a sub-task needs at least one command")
        frames = [format_command(task_id, c) for c in commands]
        stream = EventStream()
        stream.frames = frames
        self._streams[(robot_id, task_id)] = stream
        now = self._clock()
        for line in frames:
            self.wire_log.append((now, robot_id, line))
        binding.inbox.put_nowait("\n".join(frames) + "\n")
        return stream

    async def _pump(self, robot_id: str, outbox: asyncio.Queue) -> None:
        while True:
            line = await outbox.get()
            self.wire_log.append((self._clock(), robot_id, line))
            ev = parse_event(line)
            stream = self._streams.get((robot_id, ev.task_id))
            if stream is not None:
                stream._push(ev)
                if ev.terminal:
                    del self._streams[(robot_id, ev.task_id)]
            if self.listener is not None:
                try:
                    self.listener(robot_id, ev)
                except Exception:
                    log.exception("robot monitor failed on %s", line)

    def frames_for(self, robot_id: str | None = None) -> list[str]:
        return [line for _, rid, line in self.wire_log if robot_id is None or rid == robot_id]


class GatewayManager:
    """On-demand gateway instances, one UP instance per protocol.

    A gateway whose last robot unbinds goes DRAINING and, if still empty
    after ``drain_ms``, DOWN.
    """

    def __init__(self, listener: EventListener | None = None, drain_ms: float = DRAIN_MS,
                 name: str = "gw"):
        self.listener = listener
        self.drain_ms = drain_ms
        self.name = name
        self.gateways: dict[str, GatewayInstance] = {}
        self.retired: list[GatewayInstance] = []
        self._robot_gateway: dict[str, GatewayInstance] = {}
        self._seq = 0

    def ensure_gateway(self, protocol: str) -> GatewayInstance:
        gw = self.gateways.get(protocol)
        if gw is not None and gw.state != "DOWN":
            gw.state = "UP"
            return gw
        self._seq += 1
        gw = GatewayInstance(f"{self.name}-{protocol}-{self._seq}", protocol, self._dispatch)
        self.gateways[protocol] = gw
        return gw

    def _dispatch(self, robot_id: str, ev: RobotWireEvent) -> None:
        if self.listener is not None:
            self.listener(robot_id, ev)

    def attach(self, robot: SimRobot) -> GatewayInstance:
        gw = self.ensure_gateway(robot.protocol)
        gw.bind(robot)
        self._robot_gateway[robot.robot_id] = gw
        return gw

    def detach(self, robot_id: str) -> None:
        gw = self._robot_gateway.pop(robot_id, None)
        if gw is None:
            return
        gw.unbind(robot_id)
        if not gw.robot_ids:
            gw.state = "DRAINING"
            asyncio.get_running_loop().call_later(self.drain_ms / 1000.0, self._maybe_down, gw)

    def _maybe_down(self, gw: GatewayInstance) -> None:
        if gw.state == "DRAINING" and not gw.robot_ids:
            gw.state = "DOWN"
            if self.gateways.get(gw.protocol) is gw:
                del self.gateways[gw.protocol]
            self.retired.append(gw)

    def gateway_for(self, robot_id: str) -> GatewayInstance:
        gw = self._robot_gateway.get(robot_id)
        if gw is None:
            raise RoutingError(f"robot {robot_id} is not bound to any gateway")
        return gw

    def translate_and_send(self, robot_id: str, task_id: str, commands) -> EventStream:
        return self.gateway_for(robot_id).translate_and_send(robot_id, task_id, commands)

    def wire_log(self) -> list[tuple[float, str, str]]:
        logs = []
        for gw in list(self.gateways.values()) + self.retired:
            logs.extend(gw.wire_log)
        return sorted(logs, key=lambda e: e[0])
