"""
manifest.py

RunManifest: everything needed to reproduce one CLI run, written as JSON next
to the CSV it describes, plus the CSV writer used by every subcommand.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import pandas as pd
import pytz

from microsense import __version__
from microsense.errors import ConfigError
from microsense.params import ScenarioParams, dump_config, load_config

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def _utc_now() -> str:
    return datetime.now(pytz.UTC).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    subcommand: str
    config_text: str                    # resolved scenario, as dump_config writes it
    grid: dict
    seed: int
    options: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    duration_s: float = 0.0
    created_at: str = field(default_factory=_utc_now)
    version: str = __version__

    @classmethod
    def for_run(cls, subcommand: str, p: ScenarioParams, options: dict | None = None) -> "RunManifest":
        n = p.numerics
        grid = {"dr_um": n.grid_dr, "dx_um": n.grid_dx, "x_min_um": n.x_min, "x_max_um": n.x_max,
                "tolerance": n.tolerance, "solver": n.solver}
        return cls(subcommand, dump_config(p), grid, n.seed, dict(options or {}))

    @property
    def params(self) -> ScenarioParams:
        return load_config(self.config_text)

    def path_in(self, out_dir) -> Path:
        return Path(out_dir) / f"{self.subcommand}{MANIFEST_SUFFIX}"

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, ensure_ascii=False)

    def write(self, out_dir) -> Path:
        path = self.path_in(out_dir)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        logger.info("   • manifest written to %s", path)
        return path


def load_manifest(path) -> RunManifest:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc.msg}", exc.lineno) from exc
    known = {f.name for f in dataclasses.fields(RunManifest)}
    missing = {"subcommand", "config_text", "grid", "seed"} - raw.keys()
    if missing:
        raise ConfigError(f"manifest {path} lacks {', '.join(sorted(missing))}")
    return RunManifest(**{k: v for k, v in raw.items() if k in known})


def write_table(frame: pd.DataFrame, path, comments: list[str] | None = None) -> Path:
    """
    CSV with a stable header; optional ``# key=value`` lines precede it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        frame.to_csv(fh, index=False)
    logger.info("   • %d rows written to %s", len(frame), path)
    return path
