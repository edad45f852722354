#!/usr/bin/env python3
"""Train the whole system at the smallest useful scale.

Runs every pipeline stage with the "tiny" profile: synthetic corpus, manifest,
encoder-decoder pretraining, end-to-end watermark training, similarity pair
generation, and similarity training. Stages cache their outputs, so the
script can be interrupted and resumed. Expect roughly an hour or two on one
CPU core; the watermark stage dominates.

Usage: python demos/train_tiny.py [--root demo_out/tiny] [--seed 0]
"""

import argparse
import time

import torch

from sonomark.pipeline import run_pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--root", default="demo_out/tiny")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    torch.set_num_threads(1)
    t0 = time.time()
    paths = run_pipeline(args.root, "tiny", seed=args.seed)
    print(f"\nall stages done in {time.time() - t0:.0f}s")
    for stage, path in paths.items():
        print(f"  {stage}: {path}")


if __name__ == "__main__":
    main()
