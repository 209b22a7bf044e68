"""CSV and plot output for delay samples."""

from __future__ import annotations

import csv
import json
import statistics
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..errors import UsageError  # noqa: E402
from .harness import MetricSample  # noqa: E402

HEADER = ("metric", "backend", "iaas_count", "rep", "value_ms")
X_LABELS = {"IRDD": "number of IaaS", "TAD": "receiving IaaS"}


def write_csv(samples, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        for s in samples:
            w.writerow([s.metric, s.backend, s.iaas_count, s.rep, repr(float(s.value_ms))])
    return path


def read_csv(path: str | Path) -> list[MetricSample]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != HEADER:
            raise UsageError(f"{path}: expected header {','.join(HEADER)}")
        return [MetricSample(r["metric"], "", r["backend"], int(r["iaas_count"]), int(r["rep"]),
                             float(r["value_ms"]))
                for r in reader]


def series(samples) -> dict:
    """metric -> backend -> [(x, mean, stddev, n)] sorted by x."""
    groups: dict[tuple[str, str, int], list[float]] = {}
    for s in samples:
        groups.setdefault((s.metric, s.backend, s.iaas_count), []).append(s.value_ms)
    out: dict = {}
    for (metric, backend, x), values in sorted(groups.items()):
        sd = statistics.stdev(values) if len(values) > 1 else 0.0
        out.setdefault(metric, {}).setdefault(backend, []).append(
            (x, statistics.fmean(values), sd, len(values)))
    return out


def plot(samples, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric, by_backend in series(samples).items():
        fig, ax = plt.subplots(figsize=(6, 4))
        for backend, points in sorted(by_backend.items()):
            xs = [p[0] for p in points]
            ax.errorbar(xs, [p[1] for p in points], yerr=[p[2] for p in points],
                        marker="o", capsize=3, label=backend)
        ax.set_xlabel(X_LABELS.get(metric, "iaas_count"))
        ax.set_ylabel(f"mean {metric} (ms)")
        ax.set_title(metric)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{metric.lower()}.png"
        fig.savefig(path, dpi=120, metadata={"Software": None})
        plt.close(fig)
        paths.append(path)
    return paths


def emit_report(samples, out_dir: str | Path, censored: dict | None = None,
                name: str = "samples") -> dict[str, Path]:
    """Write ``<name>.csv``, one plot per metric and a summary JSON."""
    samples = list(samples)
    if not samples:
        raise UsageError("no samples to report")
    out_dir = Path(out_dir)
    paths = {"csv": write_csv(samples, out_dir / f"{name}.csv")}
    for p in plot(samples, out_dir):
        paths[p.stem] = p
    summary = {
        metric: {backend: [{"x": x, "mean_ms": m, "std_ms": sd, "n": n} for x, m, sd, n in points]
                 for backend, points in by_backend.items()}
        for metric, by_backend in series(samples).items()
    }
    summary["censored"] = {f"{b}:{c}": n for (b, c), n in sorted((censored or {}).items())}
    paths["summary"] = out_dir / f"{name}.summary.json"
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
