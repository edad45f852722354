#!/usr/bin/env python3
"""Walk through the canonical media formats.

Synthesizes one spoken-command-style clip and one cover image, writes them to
disk, reloads them through the canonical loaders, and shows the clip/frame
reshape that feeds the encoder.

Usage: python demos/media_roundtrip.py [--out-dir demo_out]
"""

import argparse
from pathlib import Path

import numpy as np

from sonomark import synth
from sonomark.media_io import (
    AUDIO_LEN,
    FRAME_DIM,
    FRAME_STEPS,
    flatten_frames,
    load_audio,
    load_image,
    reshape_audio,
    save_image,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out-dir", default="demo_out")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(0)

    # one clip from a random command prototype, stored as 16 kHz WAV
    proto = synth._command_prototype(rng)
    clip16k = synth.synth_command_clip(proto, rng)
    synth._write_wav16(out / "command.wav", clip16k, synth.SYNTH_AUDIO_RATE)
    print(f"wrote {out / 'command.wav'} ({len(clip16k)} samples at {synth.SYNTH_AUDIO_RATE} Hz)")

    # the loader resamples, mixes down, normalizes, and pads/truncates
    clip = load_audio(out / "command.wav")
    print(f"canonical clip: shape {clip.shape}, range [{clip.min():.3f}, {clip.max():.3f}]")
    assert clip.shape == (AUDIO_LEN,)

    # the encoder consumes the clip as a 128x64 frame matrix (row-major)
    frames = reshape_audio(clip)
    print(f"frame matrix: {frames.shape} = {FRAME_STEPS} steps x {FRAME_DIM} samples")
    assert np.array_equal(flatten_frames(frames), clip), "reshape must invert exactly"

    # one synthetic cover image, stored and reloaded at the canonical size
    img = synth.synth_image(rng)
    save_image(np.clip(img[:128, :128], 0, 1), out / "cover.png")
    cover = load_image(out / "cover.png")
    print(f"cover image: shape {cover.shape}, range [{cover.min():.3f}, {cover.max():.3f}]")


if __name__ == "__main__":
    main()
