"""``bench`` command line.

    bench run scenario.yaml
    bench irdd --backends presence,overlay --iaas 2..8
    bench tad --iaas 4
    bench fire-suppression [--without light] [--fault-type light=1]
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import IaaSError
from .config import BACKENDS, ScenarioConfig, load_config
from .harness import measure_irdd, measure_tad, run_fire_suppression, run_scenario
from .report import emit_report

log = logging.getLogger("bench")


def parse_counts(text: str) -> list[int]:
    """``"2..8"`` (inclusive) or ``"2,3,4,6,8"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            counts = list(range(int(lo), int(hi) + 1))
        else:
            counts = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad IaaS count list {text!r}") from None
    if not counts:
        raise argparse.ArgumentTypeError("empty IaaS count list")
    return counts


def parse_backends(text: str) -> list[str]:
    names = [b.strip() for b in text.split(",") if b.strip()]
    bad = [b for b in names if b not in BACKENDS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"backends must be drawn from {','.join(BACKENDS)}")
    return names


def parse_fault(text: str) -> tuple[str, float]:
    name, _, p = text.partition("=")
    try:
        return name, float(p or 1.0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fault spec {text!r}, expected NAME[=P]") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--transport", choices=["sim", "socket"], default="sim")
    common.add_argument("--out", type=Path, default=Path("bench-out"))
    common.add_argument("--latency-ms", type=float, default=5.0, help="per-link latency L in sim mode")
    common.add_argument("--jitter-ms", type=float, default=0.1)
    common.add_argument("--d-proc-ms", type=float, default=1.0, help="overlay per-node processing delay")
    common.add_argument("--topology", choices=["ring", "line", "random-regular"], default="ring")
    common.add_argument("--reps", type=int, default=30)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bench", description="Robot IaaS scenarios and delay benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a scenario config file")
    p.add_argument("config", type=Path)

    p = sub.add_parser("irdd", parents=[common], help="idle robot discovery delay sweep")
    p.add_argument("--backends", type=parse_backends, default=list(BACKENDS))
    p.add_argument("--iaas", type=parse_counts, default=[2, 3, 4, 6, 8])

    p = sub.add_parser("tad", parents=[common], help="task assignment delay per receiving IaaS")
    p.add_argument("--backends", type=parse_backends, default=list(BACKENDS))
    p.add_argument("--iaas", type=int, default=4)

    p = sub.add_parser("fire-suppression", parents=[common], help="end-to-end prototype task")
    p.add_argument("--iaas", type=int, default=4)
    p.add_argument("--without", action="append", default=[], metavar="TYPE",
                   help="drop a robot type (arms or light) from the fleet")
    p.add_argument("--fault-type", action="append", type=parse_fault, default=[], metavar="TYPE[=P]",
                   help="failure probability for every robot of a type")
    p.add_argument("--fault-robot", action="append", type=parse_fault, default=[], metavar="ENDPOINT[=P]",
                   help="failure probability for one robot endpoint")
    return parser


def _config(args, **extra) -> ScenarioConfig:
    return ScenarioConfig(transport=args.transport, seed=args.seed, latency_ms=args.latency_ms,
                          jitter_ms=args.jitter_ms, d_proc_ms=args.d_proc_ms, topology=args.topology,
                          reps=args.reps, **extra)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def cmd_run(args) -> int:
    config, base = load_config(args.config)
    config = config.with_(seed=args.seed) if args.seed else config
    report = run_scenario(config, base)
    report.events.dump(args.out / "events.json")
    _write_json(args.out / "run.json", report.summary())
    if report.samples:
        emit_report(report.samples, args.out, name="run")
    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    if not report.ok:
        print(f"scenario aborted: {report.cause}", file=sys.stderr)
        return 1
    return 0


def cmd_irdd(args) -> int:
    m = measure_irdd(_config(args), args.iaas, args.backends, args.reps)
    paths = emit_report(m.samples, args.out, m.censored, name="irdd")
    _print_table(paths["summary"], "IRDD")
    return 0


def cmd_tad(args) -> int:
    m = measure_tad(_config(args, iaas_count=args.iaas), args.backends, args.reps)
    paths = emit_report(m.samples, args.out, m.censored, name="tad")
    _print_table(paths["summary"], "TAD")
    return 0


def _print_table(summary_path: Path, metric: str) -> None:
    summary = json.loads(summary_path.read_text())
    print(f"{metric:<6}{'backend':<10}{'x':>4}{'mean ms':>10}{'std ms':>9}{'n':>4}")
    for backend, points in sorted(summary.get(metric, {}).items()):
        for p in points:
            print(f"{metric:<6}{backend:<10}{p['x']:>4}{p['mean_ms']:>10.3f}{p['std_ms']:>9.3f}{p['n']:>4}")
    for key, n in summary.get("censored", {}).items():
        print(f"censored {key}: {n}")
    print(f"wrote {summary_path.parent}")


def cmd_fire(args) -> int:
    from .fleet import FIRE_REMOTE_PENALTY

    config = _config(args, iaas_count=args.iaas, remote_penalty=FIRE_REMOTE_PENALTY)
    report = run_fire_suppression(config, tuple(args.without), dict(args.fault_type),
                                  dict(args.fault_robot))
    report.events.dump(args.out / "events.json")
    _write_json(args.out / "fire-suppression.json", report.to_dict())
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
        return 2
    a = report.assignment
    print(f"assignment {a['assignment_id']}: {a['status']} (re-plans: {report.replans})")
    for m in a["coalition"]["members"]:
        print(f"  member {m['robotid']} @ {m['owner']} tags={','.join(m['tags'])}")
    print(f"  composite capabilities: {','.join(a['composite']['capabilities'])}")
    for line in report.frames:
        print(f"  {line}")
    print(f"  robot states: {report.robot_states}")
    print(f"  marketplace converged: {report.converged}")
    if report.violations:
        print(f"invariant violated: {', '.join(report.violations)}", file=sys.stderr)
        return 1
    return 0


COMMANDS = {"run": cmd_run, "irdd": cmd_irdd, "tad": cmd_tad, "fire-suppression": cmd_fire}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except IaaSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
