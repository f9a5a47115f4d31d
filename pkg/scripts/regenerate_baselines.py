"""Rebuild src/scatterlab/pinned/baselines.json from the pinned verify configs.

Each ceiling is the measured ratio times MARGIN. Run after any change that
legitimately moves a ratio (new discretisation, different pinned data) and
commit the result together with that change:

    python scripts/regenerate_baselines.py [--margin 1.25]
"""

import argparse
import json
import tempfile
import warnings
from pathlib import Path

from scatterlab import estimates as est
from scatterlab.config import load_config
from scatterlab.runner import run

CONFIGS = ["verify_nls", "verify_hartree"]
TARGET = Path(__file__).resolve().parents[1] / "src" / "scatterlab" / "pinned" / "baselines.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--margin", type=float, default=1.25)
    ap.add_argument("--out", type=Path, default=TARGET)
    args = ap.parse_args()

    # run with empty ceilings so nothing is judged against the old file
    original = est.load_baselines
    est.load_baselines = lambda: {"ceilings": {}}
    measured = {}
    try:
        for name in CONFIGS:
            cfg = load_config(f"pinned:{name}")
            with tempfile.TemporaryDirectory() as tmp, warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = run(cfg, tmp)
            for rep in res.report["ratio_reports"]:
                key = f"{rep['check']}:{res.report['equation']}"
                measured[key] = rep["ratio"]
                print(f"{key:40s} {rep['ratio']:.6g}")
    finally:
        est.load_baselines = original

    doc = {
        "procedure": "scripts/regenerate_baselines.py: ceiling = measured ratio * margin on the pinned verify configs",
        "margin": args.margin,
        "measured": measured,
        "ceilings": {k: v * args.margin for k, v in measured.items()},
    }
    args.out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
