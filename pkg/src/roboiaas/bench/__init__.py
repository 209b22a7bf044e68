"""Scenario harness: boot deployments, measure IRDD/TAD, run the end-to-end task."""

from .config import ScenarioConfig, ScriptedRequest, load_config
from .harness import (
    Deployment, MetricSample, measure_irdd, measure_tad, run_fire_suppression, run_scenario,
)
from .report import emit_report, read_csv, write_csv
