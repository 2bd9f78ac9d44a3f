"""
cli.py

Command-line front end.

    python -m microsense <subcommand> [-v] [--config PATH] [--out DIR] [--seed N]
                         [--thresholds A..B | a,b,c] [--task-time S] [--required N] ...

Subcommands write ``<subcommand>.csv`` and ``<subcommand>.manifest.json`` into
the output directory:

  field     source concentration on the grid        r_um,x_um,conc_per_um3
  rates     detection rates vs threshold            threshold,sigma_source_per_s,sigma_background_per_s
  roc       mission ROC points                      threshold,p_true,p_false
  simulate  Monte Carlo detection probability      threshold,p_hat,ci_low,ci_high,n_trials,seed
  compare   Monte Carlo vs continuum                case,threshold,p_mc,ci_low,ci_high,p_analytic,ratio,analytic_in_ci
  report    headline numbers against published values

Exit codes: 0 success, 2 configuration or flag error, 3 field solver failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import pandas as pd

from microsense import chemfield, continuum, hydro, montecarlo, poisson_detect
from microsense.errors import ConfigError, FieldSolveError, GridError, ParamsValidationError
from microsense.manifest import RunManifest, load_manifest, write_table
from microsense.params import ScenarioParams, check, default_params, load_config_file
from microsense.store.rdbms import record_run, registry_url

logger = logging.getLogger(__name__)

CONFIG_ENV = "MICROSENSE_CONFIG"
SUBCOMMANDS = ("field", "rates", "roc", "simulate", "compare", "report")
DEFAULT_THRESHOLDS = {"rates": "1..40", "roc": "1..40", "compare": "1..15"}

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3


class UsageError(Exception):
    """Flag value that argparse accepted but the run cannot use."""


# ───────────── 1) ARGUMENTS ─────────────────────────────────────────────────────
def parse_thresholds(text: str) -> list[int]:
    """``"A..B"`` (inclusive) or a comma list; every threshold must be ≥ 1."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            values = list(range(lo, hi + 1))
        else:
            values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"cannot parse thresholds {text!r}") from None
    if not values:
        raise UsageError(f"empty threshold list {text!r}")
    if min(values) < 1:
        raise UsageError("thresholds must be at least 1")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"scenario file (default: ${CONFIG_ENV} or built-in values)")
    common.add_argument("--out", default="./out", help="output directory (default ./out)")
    common.add_argument("--seed", type=int, help="master seed for Monte Carlo streams")
    common.add_argument("--thresholds", help="threshold range A..B or list a,b,c")
    common.add_argument("--task-time", type=float, help="mission duration T_task in s")
    common.add_argument("--required", type=int, help="required detections n")
    common.add_argument("--false-detections", type=int, help="false detections n_false counted as failure")
    common.add_argument("--sources", type=int, help="independent sources in the tissue (default 1)")
    common.add_argument("--trials", type=int, help="Monte Carlo transits")
    common.add_argument("--workers", type=int, help="worker processes for Monte Carlo")
    common.add_argument("--brownian", action="store_true", default=None,
                        help="let robots diffuse radially during Monte Carlo transits")
    common.add_argument("--background", action="store_true", default=None,
                        help="simulate a vessel without the source")
    common.add_argument("--manifest", help="re-run from a previously written manifest")
    common.add_argument("--registry", help="SQLAlchemy URL of the run registry (default: $MICROSENSE_REGISTRY_URL)")
    common.add_argument("-v", "--verbose", action="store_true", default=None, help="debug logging")

    parser = argparse.ArgumentParser(
        prog="microsense",
        description="Chemical source detection by micro-robots in small blood vessels.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="subcommand")
    helps = {
        "field": "solve the source concentration field",
        "rates": "true and false positive rates vs threshold",
        "roc": "mission ROC points vs threshold",
        "simulate": "Monte Carlo detection probability per transit",
        "compare": "Monte Carlo against the continuum analysis",
        "report": "headline numbers next to the published values",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


# ───────────── 2) RESOLUTION ────────────────────────────────────────────────────
def _resolve(args) -> tuple[ScenarioParams, dict]:
    """
    Scenario and options for this run.  Explicit flags win over a manifest,
    which wins over the config file and built-in defaults.
    """
    restored: dict = {}
    if args.manifest:
        manifest = load_manifest(args.manifest)
        if manifest.subcommand != args.subcommand:
            raise UsageError(f"manifest was written by {manifest.subcommand!r}, not {args.subcommand!r}")
        p = manifest.params
        restored = manifest.options
    else:
        config = args.config or os.environ.get(CONFIG_ENV)
        if config:
            try:
                p = load_config_file(config)
            except OSError as exc:
                raise ConfigError(f"cannot read config {config}: {exc}") from exc
        else:
            p = default_params()

    changes = {
        "seed": args.seed,
        "task_time": args.task_time,
        "required_detections": args.required,
        "false_detections": args.false_detections,
        "mc_trials": args.trials,
        "workers": args.workers,
        "brownian": args.brownian,
    }
    p = check(p.replace(**{k: v for k, v in changes.items() if v is not None}))

    options = {
        "thresholds": args.thresholds or restored.get("thresholds")
        or DEFAULT_THRESHOLDS.get(args.subcommand, str(p.threshold)),
        "sources": args.sources if args.sources is not None else restored.get("sources", 1),
        "background": bool(args.background if args.background is not None
                           else restored.get("background", False)),
    }
    if options["sources"] < 1:
        raise UsageError("--sources must be at least 1")
    return p, options


# ───────────── 3) SUBCOMMANDS ───────────────────────────────────────────────────
def _progress() -> bool:
    return sys.stderr.isatty()


def cmd_field(p: ScenarioParams, options: dict, out: Path) -> list[Path]:
    f = chemfield.solve_source_field(p)
    logger.info("   • mass balance mismatch %.2e, peak wall concentration %.3g",
                chemfield.mass_balance(f, p), chemfield.peak_wall_concentration(f, p))
    return [write_table(chemfield.field_to_frame(f), out / "field.csv")]


def cmd_rates(p: ScenarioParams, options: dict, out: Path) -> list[Path]:
    thresholds = parse_thresholds(options["thresholds"])
    f = chemfield.solve_source_field(p)
    rates = continuum.detection_rates(f, p, thresholds)
    return [write_table(continuum.rates_frame(rates), out / "rates.csv")]


def cmd_roc(p: ScenarioParams, options: dict, out: Path) -> list[Path]:
    thresholds = parse_thresholds(options["thresholds"])
    f = chemfield.solve_source_field(p)
    points = continuum.mission_roc(f, p, thresholds, n_sources=options["sources"])
    comments = [
        f"task_time_s={p.task_time!r}",
        f"required_detections={p.required_detections}",
        f"false_detections={p.false_detections}",
        f"sources={options['sources']}",
    ]
    return [write_table(continuum.roc_frame(points), out / "roc.csv", comments)]


def cmd_simulate(p: ScenarioParams, options: dict, out: Path) -> list[Path]:
    thresholds = parse_thresholds(options["thresholds"])
    with_source = not options["background"]
    f = chemfield.solve_source_field(p) if with_source else None
    cfg = montecarlo.TrialConfig.from_params(p, with_source)
    estimates = montecarlo.estimate_detection_curve(f, p, cfg, thresholds, progress=_progress())
    return [write_table(montecarlo.estimates_frame(estimates), out / "simulate.csv")]


def cmd_compare(p: ScenarioParams, options: dict, out: Path) -> list[Path]:
    thresholds = parse_thresholds(options["thresholds"])
    frame = montecarlo.compare_with_continuum(p, thresholds, progress=_progress())
    return [write_table(frame, out / "compare.csv")]


def report_frame(p: ScenarioParams) -> pd.DataFrame:
    """Computed headline numbers next to the values printed in the literature."""
    f = chemfield.solve_source_field(p)
    points = continuum.mission_roc(f, p, parse_thresholds(DEFAULT_THRESHOLDS["roc"]))
    best = continuum.best_roc_point(points)
    _, ratio = continuum.blood_sample_comparison(p, 86_400.0)

    rows = [
        ("sigma_1 (robots entering one vessel, 1/s)", continuum.vessel_entry_rate(p), "0.016"),
        ("sigma (robots entering all vessels, 1/s)", continuum.tissue_entry_rate(p), "8e3"),
        ("k (background counts per window)", poisson_detect.background_counts(p), "0.08"),
        ("background capture rate (1/s)",
         poisson_detect.capture_rate(p.chem_diffusion, p.robot_radius, p.effective_background), "8"),
        ("capture rate at the source (1/s)",
         poisson_detect.capture_rate(p.chem_diffusion, p.robot_radius, p.c_source), "2300"),
        ("peak wall concentration (1/um^3)", chemfield.peak_wall_concentration(f, p), "1.8"),
        ("field mass balance mismatch", chemfield.mass_balance(f, p), "0"),
        ("source production rate (1/s)", p.source_production_rate, "5.3e4"),
        ("robot Reynolds number", hydro.robot_reynolds(p), "1e-3"),
        ("robot Brownian rms over 1 s (um)", hydro.brownian_rms(p.robot_diffusion, 1.0), "0.7"),
        ("Stokes-Einstein robot diffusion (um^2/s)",
         hydro.stokes_einstein_diffusion(p.robot_radius, p.viscosity, p.temperature), "0.076"),
        ("vessel volume fraction", p.vessel_volume_fraction, "0.04"),
        ("robot volume fraction in vessels", p.robot_volume_fraction(), "1e-6"),
        ("best threshold (T_task = %g s)" % p.task_time, best.threshold, "10"),
        ("best p_true", best.p_true, ">0.9"),
        ("best p_false", best.p_false, "<0.1"),
        ("one-day blood sample / background", ratio, "1e-4"),
    ]
    return pd.DataFrame(rows, columns=["quantity", "computed", "published"])


def cmd_report(p: ScenarioParams, options: dict, out: Path) -> list[Path]:
    frame = report_frame(p)
    with pd.option_context("display.float_format", lambda v: f"{v:.4g}"):
        print(frame.to_string(index=False))
    return [write_table(frame, out / "report.csv")]


COMMANDS = {
    "field": cmd_field,
    "rates": cmd_rates,
    "roc": cmd_roc,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "report": cmd_report,
}


# ───────────── 4) ENTRY POINT ───────────────────────────────────────────────────
def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    _setup_logging(bool(args.verbose))

    started = time.perf_counter()
    out = Path(args.out)
    try:
        p, options = _resolve(args)
        logger.info("▶️  %s into %s", args.subcommand, out)
        manifest = RunManifest.for_run(args.subcommand, p, options)
        outputs = COMMANDS[args.subcommand](p, options, out)
    except (ConfigError, ParamsValidationError, GridError, UsageError) as exc:
        print(f"microsense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FieldSolveError as exc:
        print(f"microsense: field solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    manifest.outputs = [path.name for path in outputs]
    manifest.duration_s = round(time.perf_counter() - started, 3)
    manifest.write(out)
    record_run(manifest, out, registry_url(args.registry))
    logger.info("✅ %s finished in %.1f s", args.subcommand, manifest.duration_s)
    return EXIT_OK


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
