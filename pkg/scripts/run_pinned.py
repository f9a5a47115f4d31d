"""Run bundled pinned configs and print one summary line per run.

    python scripts/run_pinned.py                  # all of them, into runs/pinned/
    python scripts/run_pinned.py wave_nls decay_nls --out /tmp/runs
"""

import argparse
import json
import time
import warnings
from importlib import resources
from pathlib import Path

from scatterlab.config import load_config
from scatterlab.runner import run, summarize


def pinned_names():
    files = resources.files("scatterlab.pinned").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".toml"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("names", nargs="*", help="config names (default: all)")
    ap.add_argument("--out", type=Path, default=Path("runs/pinned"))
    args = ap.parse_args()

    for name in args.names or pinned_names():
        cfg = load_config(f"pinned:{name}")
        start = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run(cfg, args.out / name)
        elapsed = time.perf_counter() - start
        checks = res.report.get("checks", {})
        failed = [k for k, ok in checks.items() if not ok]
        print(f"{name:18s} exit={res.exit_code} {elapsed:7.1f}s failed_checks={failed or '-'}")
        print("    " + json.dumps(summarize(res.report), default=str))


if __name__ == "__main__":
    main()
