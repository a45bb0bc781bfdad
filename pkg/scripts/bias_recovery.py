"""Sweep the injected time multiplier and report what the Time x Insurance x 3 cell detects.

    python3 scripts/bias_recovery.py --multipliers 1.0 1.05 1.1 1.25 1.5 --seeds 5
"""

from __future__ import annotations

import argparse
import statistics

from scenarios import acuity3_scenario, grid_for

from fairlens.stats import Attribute, Outcome
from fairlens.triage_sim import BiasConfig, BiasEntry


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--multipliers", type=float, nargs="+", default=[1.0, 1.05, 1.1, 1.25, 1.5])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--n-cases", type=int, default=4000)
    args = ap.parse_args()

    sc = acuity3_scenario()
    print("multiplier  detected  median_p    median_eps2  labels")
    for m in args.multipliers:
        bias = BiasConfig((BiasEntry("insurance", "Public", acuity=3, time_multiplier=m),))
        cells = []
        for seed in range(args.seeds):
            _, res = grid_for(args.n_cases, bias, seed, sc, acuities=(3,))
            cells += [r for r in res if r.outcome is Outcome.TIME and r.attribute is Attribute.INSURANCE]
        detected = sum(r.p_value < 0.001 for r in cells)
        labels = sorted({r.interpretation.value for r in cells})
        print(f"{m:<10.2f}  {detected}/{len(cells):<6}  {statistics.median(r.p_value for r in cells):<10.2e}  "
              f"{statistics.median(r.effect for r in cells):<11.4f}  {','.join(labels)}")


if __name__ == "__main__":
    main()
