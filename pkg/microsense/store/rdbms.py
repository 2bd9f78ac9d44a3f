"""
rdbms.py

Engine handling and inserts for the run registry.  The registry is optional:
it is only used when a database URL is configured, and a failing registry
never fails the analysis run that tries to record itself.
"""

from __future__ import annotations

import logging
import os
from datetime import datetime

import pandas as pd
from sqlalchemy import create_engine, insert, select

from microsense.manifest import RunManifest
from microsense.store.model import metadata, runs

logger = logging.getLogger(__name__)

REGISTRY_URL_ENV = "MICROSENSE_REGISTRY_URL"


def registry_url(explicit: str | None = None) -> str | None:
    """``explicit`` if given, else $MICROSENSE_REGISTRY_URL, else None (registry off)."""
    return explicit or os.environ.get(REGISTRY_URL_ENV) or None


def get_engine(url: str, echo: bool = False):
    return create_engine(url, echo=echo, future=True)


def init_db(url: str) -> None:
    """Creates the ``runs`` table if it does not exist yet."""
    engine = get_engine(url)
    metadata.create_all(bind=engine)
    engine.dispose()


def record_run(manifest: RunManifest, output_dir, url: str | None) -> int | None:
    """Insert one row for ``manifest``; returns its run_id, or None when nothing was recorded."""
    if not url:
        return None
    try:
        engine = get_engine(url)
        metadata.create_all(bind=engine)
        with engine.begin() as conn:
            result = conn.execute(insert(runs).values(
                subcommand=manifest.subcommand,
                created_at=datetime.fromisoformat(manifest.created_at),
                seed=manifest.seed,
                duration_s=manifest.duration_s,
                output_dir=str(output_dir),
                config_text=manifest.config_text,
                manifest_json=manifest.to_json(),
            ))
            run_id = result.inserted_primary_key[0]
        engine.dispose()
    except Exception as exc:  # driver import errors included
        logger.warning("run registry unavailable, run not recorded: %s", exc)
        return None
    logger.info("   • recorded run %s in the registry", run_id)
    return run_id


def recent_runs(url: str, limit: int = 10) -> pd.DataFrame:
    """Latest ``limit`` runs, newest first."""
    engine = get_engine(url)
    query = (select(runs.c.run_id, runs.c.subcommand, runs.c.created_at, runs.c.seed,
                    runs.c.duration_s, runs.c.output_dir)
             .order_by(runs.c.run_id.desc())
             .limit(limit))
    with engine.connect() as conn:
        frame = pd.read_sql_query(query, conn)
    engine.dispose()
    return frame
