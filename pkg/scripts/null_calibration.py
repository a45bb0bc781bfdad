"""False-positive rate and effect-size labels of the test grid on unbiased simulated logs.

    python3 scripts/null_calibration.py --seeds 100 --n-cases 4000
"""

from __future__ import annotations

import argparse
import time
from collections import Counter

from scenarios import acuity3_scenario, grid_for

from fairlens.stats import EffectKind
from fairlens.triage_sim import BiasConfig, Scenario


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--n-cases", type=int, default=4000)
    ap.add_argument("--scenario", choices=("acuity3", "default"), default="acuity3")
    args = ap.parse_args()

    sc = acuity3_scenario() if args.scenario == "acuity3" else Scenario()
    acuities = (3,) if args.scenario == "acuity3" else (1, 2, 3, 4, 5)
    start = time.perf_counter()
    labels: dict[EffectKind, Counter] = {k: Counter() for k in EffectKind}
    rejections = tested = 0
    for seed in range(args.seeds):
        _, res = grid_for(args.n_cases, BiasConfig(), seed, sc, acuities)
        for r in res:
            if r.tested:
                tested += 1
                rejections += r.significant
                labels[r.effect_kind][r.interpretation.value] += 1
    print(f"{args.seeds} seeds x {args.n_cases} cases, {tested} tested cells, "
          f"{time.perf_counter() - start:.1f}s")
    print(f"rejections at alpha=0.05: {rejections}/{tested} ({rejections / max(tested, 1):.1%})")
    for kind, counts in labels.items():
        total = sum(counts.values())
        if total:
            print(f"{kind.value}: " + ", ".join(f"{k} {v / total:.1%}" for k, v in counts.most_common()))


if __name__ == "__main__":
    main()
