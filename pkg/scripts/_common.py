"""Shared bits for the experiment scripts: paths and the common command-line options."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

RESULTS = REPO / "results"
CACHE = RESULTS / "cache"

from perclab.experiments import atomic_write_text, rows_to_csv  # noqa: E402


def parser(description: str, n_default: int) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--n", type=int, default=n_default, help="samples per run")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-cache", action="store_true", help="ignore and do not write the result cache")
    p.add_argument("--out", type=Path, default=None, help="output directory (default results/<name>)")
    return p


def cache_dir(args):
    return None if args.no_cache else CACHE


def write_rows(out: Path, rows: list, extra: dict | None = None) -> None:
    plain = [{k: v for k, v in r.items() if k != "plan"} for r in rows]
    atomic_write_text(out / "rows.csv", rows_to_csv(plain))
    atomic_write_text(out / "rows.json", json.dumps({"rows": plain, **(extra or {})}, indent=2, default=str) + "\n")
    print(rows_to_csv(plain), end="")
