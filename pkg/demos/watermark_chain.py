#!/usr/bin/env python3
"""Trace one clip through the full watermarking chain.

Uses a freshly initialized (untrained) network, so the metrics are poor; the
point is to see every stage and its tensor shape. Pass --wm-ckpt to run the
same trace through a trained checkpoint instead.

Usage: python demos/watermark_chain.py [--wm-ckpt var/acceptance/small/checkpoints/wm_best.pt]
"""

import argparse

import numpy as np
import torch

from sonomark import synth
from sonomark.media_io import load_audio, load_image, reshape_audio
from sonomark.metrics import rmse, ssim
from sonomark.networks import WMConfig, WMNetwork, decode, embed, encode, extract


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wm-ckpt", default=None)
    args = ap.parse_args()

    torch.set_num_threads(1)
    if args.wm_ckpt:
        from sonomark.training import load_wm_network

        net = load_wm_network(args.wm_ckpt)
        print(f"loaded {args.wm_ckpt}")
    else:
        net = WMNetwork.build(WMConfig(seed=0)).eval()
        print("using an untrained network (metrics will be poor)")

    rng = np.random.default_rng(1)
    import tempfile, pathlib

    tmp = pathlib.Path(tempfile.mkdtemp())
    synth._write_wav16(tmp / "clip.wav", synth.synth_command_clip(synth._command_prototype(rng), rng), synth.SYNTH_AUDIO_RATE)
    from PIL import Image

    Image.fromarray(np.round(synth.synth_image(rng) * 255).astype(np.uint8)).save(tmp / "cover.png")

    clip = load_audio(tmp / "clip.wav")
    cover = load_image(tmp / "cover.png")

    code = encode(net, reshape_audio(clip))
    print(f"encode:  clip {clip.shape} -> code {code.shape}")

    marked = embed(net, code, cover)
    print(f"embed:   code + cover {cover.shape} -> marked {marked.shape}")
    print(f"         cover/marked structural similarity: {ssim(cover, marked):.4f}")

    code_prime = extract(net, marked)  # blind: no cover needed
    print(f"extract: marked -> code {code_prime.shape}")

    clip_prime = decode(net, code_prime)
    print(f"decode:  code -> clip {clip_prime.shape}")
    print(f"         watermark RMSE: {rmse(clip, clip_prime):.4f}")


if __name__ == "__main__":
    main()
