#!/usr/bin/env python3
# recent_runs.py

import sys

import pandas as pd

from microsense.store.rdbms import recent_runs, registry_url


# ─── FUNCTIONS ────────────────────────────────────────────────────────────────
def show_recent_runs(url: str, limit: int = 10) -> pd.DataFrame:
    """
    Print the latest `limit` recorded runs, newest first.
    """
    df = recent_runs(url, limit)
    print(f"\n--- Latest {limit} runs ---")
    print(df.to_string(index=False))
    return df


# ─── MAIN ─────────────────────────────────────────────────────────────────────
if __name__ == "__main__":
    url = registry_url(sys.argv[1] if len(sys.argv) > 1 else None)
    if url is None:
        sys.exit("set MICROSENSE_REGISTRY_URL or pass a database URL")
    show_recent_runs(url)
