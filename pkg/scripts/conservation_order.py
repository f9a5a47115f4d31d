"""Energy drift against time step on a pinned simulate config.

Halving dt should cut the energy drift by about 4 (second-order splitting)
while mass and momentum stay at round-off.

    python scripts/conservation_order.py --config pinned:simulate_hartree --levels 3
"""

import argparse
import tempfile
import warnings

from scatterlab.config import load_config
from scatterlab.runner import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--config", default="pinned:simulate_nls")
    ap.add_argument("--levels", type=int, default=2, help="number of dt halvings after the base run")
    ap.add_argument("--horizon", type=float, default=None)
    args = ap.parse_args()

    base = load_config(args.config)
    prev = None
    print(f"{'dt':>10s} {'mass':>10s} {'momentum':>10s} {'energy':>10s} {'ratio':>6s}")
    for k in range(args.levels + 1):
        overrides = {"solver.dt": base.solver.dt / 2**k, "solver.record_every": base.solver.record_every * 2**k}
        if args.horizon:
            overrides["solver.horizon"] = args.horizon
        cfg = load_config(args.config, overrides)
        with tempfile.TemporaryDirectory() as tmp, warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = run(cfg, tmp).report
        e = rep["energy_rel_drift"]
        ratio = f"{prev / e:6.2f}" if prev else ""
        print(f"{cfg.solver.dt:10.3g} {rep['mass_rel_drift']:10.2e} {rep['momentum_drift']:10.2e} {e:10.2e} {ratio}")
        prev = e


if __name__ == "__main__":
    main()
