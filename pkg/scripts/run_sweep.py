#!/usr/bin/env python3
"""Randomized recovery-rate sweep over Assumption-satisfying instances,
analytic and finite-sample, plus a negative-control batch that violates the
3-hop placement rule.

    python scripts/run_sweep.py --instances 20 --out out/sweep
"""

import argparse
import json
from pathlib import Path

from treespect.cli import main as cli_main


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--trajectories", nargs="+", default=["analytic", "100000", "1000000"])
    ap.add_argument("--out", type=Path, default=Path("out/sweep"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    trajectories = [t if t == "analytic" else int(t) for t in args.trajectories]
    base = {
        "instances": args.instances,
        "nodes": [7, 15],
        "corrupt": [1, 3],
        "trajectories": trajectories,
        "seed": args.seed,
        "welch": {"segment_length": 256},
    }
    cfg = args.out / "sweep_config.json"
    cfg.write_text(json.dumps(base, indent=2))
    print("== assumption-satisfying instances ==")
    cli_main(["sweep", "--config", str(cfg), "--out", str(args.out / "main"),
              "--threads", str(args.threads)])

    negative = dict(base, instances=max(4, args.instances // 4),
                    violate_assumption=True, trajectories=["analytic"])
    ncfg = args.out / "sweep_negative_config.json"
    ncfg.write_text(json.dumps(negative, indent=2))
    print("== negative controls (corrupt nodes two hops apart) ==")
    cli_main(["sweep", "--config", str(ncfg), "--out", str(args.out / "negative"),
              "--threads", str(args.threads)])


if __name__ == "__main__":
    main()
