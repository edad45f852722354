#!/usr/bin/env python3
"""Render the attack gallery: cutout at several fractions and small rotations.

Writes one PNG per attack instance so the distortions can be inspected by eye.

Usage: python demos/distortion_gallery.py [--out-dir demo_out/distortions]
"""

import argparse
from pathlib import Path

import numpy as np

from sonomark import synth
from sonomark.distortions import DistortionSpec, apply_distortion
from sonomark.media_io import save_image


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="demo_out/distortions")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(2)
    img = synth.synth_image(rng)[:128, :128]
    img = np.clip(img, 0.0, 1.0)
    save_image(img, out / "original.png")

    specs = [DistortionSpec("cutout", cutout_fraction=f, seed=7) for f in (0.1, 0.3, 0.5, 0.7, 0.9)]
    specs += [DistortionSpec("rotation", rotation_degrees=d) for d in (-5, -2, 2, 5)]

    for spec in specs:
        attacked = apply_distortion(img, spec)
        name = f"{spec.kind}_{spec.parameter:g}.png"
        save_image(attacked, out / name)
        removed = float(np.mean(np.all(attacked == 0.0, axis=2)))
        print(f"{name:22s} zeroed pixels: {removed:5.1%}")

    print(f"\nwrote {len(specs) + 1} images to {out}")


if __name__ == "__main__":
    main()
