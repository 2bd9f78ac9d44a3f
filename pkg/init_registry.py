#!/usr/bin/env python3
# init_registry.py

import sys

from microsense.store.rdbms import init_db, registry_url


if __name__ == "__main__":
    url = registry_url(sys.argv[1] if len(sys.argv) > 1 else None) or "sqlite:///microsense_runs.db"
    init_db(url)
    print(f"✅ Run registry tables created at {url}")
