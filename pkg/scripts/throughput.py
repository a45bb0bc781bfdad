"""Time the end-to-end pipeline on a synthetic log of a given size.

    python3 scripts/throughput.py --events 1000000
"""

from __future__ import annotations

import argparse
import json
import math
import resource
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from fairlens.eventlog import ATTRIBUTE_COLUMNS, REQUIRED_COLUMNS, write_log
from fairlens.triage_sim import generate_log


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--keep", type=Path, help="write artifacts here instead of a temporary directory")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        work = args.keep or Path(tmp)
        work.mkdir(parents=True, exist_ok=True)
        sample = generate_log(2000, seed=args.seed)
        n_cases = math.ceil(1.01 * args.events * len(sample) / sample.n_events)
        t0 = time.perf_counter()
        log = generate_log(n_cases, seed=args.seed)
        write_log(log, work / "log.csv")
        print(f"generated {log.n_events} events / {len(log)} cases in {time.perf_counter() - t0:.1f}s", flush=True)
        del log
        cmap = {k: k for k in REQUIRED_COLUMNS + ATTRIBUTE_COLUMNS}
        cfg = work / "config.json"
        cfg.write_text(json.dumps({"input": {"log": "log.csv"}, "column_map": cmap, "output_dir": "out"}))
        t0 = time.perf_counter()
        subprocess.run([sys.executable, "-m", "fairlens.cli", "analyze", "--config", str(cfg)], check=True)
        elapsed = time.perf_counter() - t0
        peak = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1024
        print(f"pipeline: {elapsed:.1f}s, peak RSS {peak:.0f} MB")


if __name__ == "__main__":
    main()
