#!/usr/bin/env python3
"""Build (or resume) the desk-scale training artifacts used by the demos and
the acceptance test suite. Stages are cached under the given root, so the
script can be interrupted and rerun.

Usage: python scripts/build_artifacts.py [--root var/acceptance] [--profile small] [--seed 0]
"""

import argparse
import time

import torch

from sonomark.pipeline import PROFILES, run_pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--root", default="var/acceptance")
    ap.add_argument("--profile", default="small", choices=sorted(PROFILES))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    torch.set_num_threads(args.threads)
    t0 = time.time()
    paths = run_pipeline(args.root, args.profile, seed=args.seed)
    print(f"done in {time.time() - t0:.0f}s")
    for k, v in paths.items():
        print(f"  {k}: {v}")


if __name__ == "__main__":
    main()
