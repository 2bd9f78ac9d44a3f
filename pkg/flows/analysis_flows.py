# File: flows/analysis_flows.py

import time
from datetime import datetime
from pathlib import Path

import pytz
from prefect import flow, task

from microsense import chemfield, continuum, montecarlo
from microsense.cli import DEFAULT_THRESHOLDS, parse_thresholds, report_frame
from microsense.manifest import RunManifest, write_table
from microsense.params import ScenarioParams, default_params, load_config_file
from microsense.store.rdbms import record_run, registry_url


# ─────────────────────────────────────────────────────────────────────────────
@task(name="solve_field_task", retries=1, retry_delay_seconds=30, log_prints=True)
def solve_field_task(p: ScenarioParams):
    """
    Solve the source field.  A FieldSolveError is retried once before the flow fails.
    """
    f = chemfield.solve_source_field(p)
    print(f"Field solved, mass balance mismatch {chemfield.mass_balance(f, p):.2e}")
    return f


# ─────────────────────────────────────────────────────────────────────────────
@task(name="rates_task", log_prints=True)
def rates_task(f, p: ScenarioParams, thresholds: list[int]):
    return continuum.rates_frame(continuum.detection_rates(f, p, thresholds))


# ─────────────────────────────────────────────────────────────────────────────
@task(name="roc_task", log_prints=True)
def roc_task(f, p: ScenarioParams, thresholds: list[int]):
    points = continuum.mission_roc(f, p, thresholds)
    best = continuum.best_roc_point(points)
    print(f"Best threshold {best.threshold}: p_true={best.p_true:.3f} p_false={best.p_false:.3f}")
    return continuum.roc_frame(points)


# ─────────────────────────────────────────────────────────────────────────────
@task(name="compare_task", log_prints=True)
def compare_task(f, p: ScenarioParams, thresholds: list[int]):
    return montecarlo.compare_with_continuum(p, thresholds, f)


# ─────────────────────────────────────────────────────────────────────────────
@task(name="record_task", retries=0, log_prints=True)
def record_task(manifest: RunManifest, out_dir: str):
    """
    Write the manifest and record the run.  Registry errors are suppressed.
    """
    manifest.write(out_dir)
    return record_run(manifest, out_dir, registry_url())


# ─────────────────────────────────────────────────────────────────────────────
def step_manifest(subcommand: str, p: ScenarioParams, path: Path, duration_s: float) -> RunManifest:
    """
    Manifest for one flow step, replayable with ``<subcommand> --manifest``.
    """
    options = {"thresholds": DEFAULT_THRESHOLDS.get(subcommand, str(p.threshold)),
               "sources": 1, "background": False}
    manifest = RunManifest.for_run(subcommand, p, options)
    manifest.outputs = [path.name]
    manifest.duration_s = round(duration_s, 3)
    return manifest


# ─────────────────────────────────────────────────────────────────────────────
@flow(name="analysis_flow")
def analysis_flow(config_path: str | None = None, out_dir: str = "./out",
                  source_trials: int = 10_000):
    """
    1) Load the scenario (built-in values when no config is given).
    2) Solve the source field once.
    3) Rates, ROC and the Monte Carlo cross-check share that field.
    4) Write each CSV with its own manifest into a timestamped folder and record it.
    """
    p = load_config_file(config_path) if config_path else default_params()
    stamp = datetime.now(pytz.UTC).strftime("%Y%m%dT%H%M%SZ")
    run_dir = Path(out_dir) / stamp
    sweep = parse_thresholds(DEFAULT_THRESHOLDS["roc"])
    compare_p = p.replace(mc_trials=source_trials)

    started = time.perf_counter()
    f = solve_field_task(p)
    solve_s = time.perf_counter() - started

    steps = [
        ("rates", p, lambda: rates_task(f, p, sweep)),
        ("roc", p, lambda: roc_task(f, p, sweep)),
        ("compare", compare_p,
         lambda: compare_task(f, compare_p, parse_thresholds(DEFAULT_THRESHOLDS["compare"]))),
        ("report", p, lambda: report_frame(p)),
    ]
    for subcommand, step_p, build in steps:
        # each step is charged the shared field solve, as its CLI replay would be
        started = time.perf_counter()
        path = write_table(build(), run_dir / f"{subcommand}.csv")
        duration_s = solve_s + time.perf_counter() - started
        record_task(step_manifest(subcommand, step_p, path, duration_s), str(run_dir))
    return str(run_dir)


# ─────────────────────────────────────────────────────────────────────────────
if __name__ == "__main__":
    # Serve the analysis once a day until CTRL+C
    analysis_flow.serve(
        name="microsense-daily-analysis",
        interval=86_400,
        tags=["microsense"],
        pause_on_shutdown=False,
    )
