"""Synthetic desk-scale corpora: spoken-command-like audio clips grouped into
command classes, and natural-looking RGB images. Used by the demos and the
test suite so no external dataset download is required; any real corpus with
>=1 s speech clips and RGB images can substitute."""

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

SYNTH_AUDIO_RATE = 16000
SYNTH_AUDIO_SECONDS = 1.0
SYNTH_IMAGE_SIZE = 160


def _command_prototype(rng: np.random.Generator) -> dict:
    """Random per-command timbre: fundamental, harmonic profile, AM envelope."""
    return {
        "f0": float(rng.uniform(70.0, 320.0)),
        "harmonics": rng.uniform(0.05, 1.0, size=5) / np.arange(1, 6),
        "am_rate": float(rng.uniform(1.5, 6.0)),
        "am_depth": float(rng.uniform(0.2, 0.6)),
        "attack": float(rng.uniform(0.02, 0.15)),
    }


def synth_command_clip(proto: dict, rng: np.random.Generator, rate: int = SYNTH_AUDIO_RATE) -> np.ndarray:
    """One instance of a command: harmonic stack with jitter, AM envelope, noise."""
    n = int(rate * SYNTH_AUDIO_SECONDS)
    t = np.arange(n) / rate
    f0 = proto["f0"] * rng.uniform(0.995, 1.005)
    # harmonics share one random phase offset; fully independent phases make
    # each clip a fresh waveform and autoencoders stop generalizing across clips
    phase0 = rng.uniform(0, 2 * np.pi)
    sig = np.zeros(n)
    for k, amp in enumerate(proto["harmonics"], start=1):
        sig += amp * np.sin(2 * np.pi * k * f0 * t + k * phase0)
    env = 1.0 - proto["am_depth"] * 0.5 * (1 + np.sin(2 * np.pi * proto["am_rate"] * t + rng.uniform(0, 2 * np.pi)))
    att = proto["attack"]
    ramp = np.minimum(1.0, t / att) * np.minimum(1.0, (t[-1] - t) / att)
    sig = sig * env * ramp
    sig += rng.normal(0.0, 0.002, size=n)
    peak = np.max(np.abs(sig))
    return (sig / peak * rng.uniform(0.7, 0.95)).astype(np.float32)


def make_audio_corpus(out_dir, n_commands: int, clips_per_command: int, seed: int = 0) -> Path:
    """Write a Speech-Commands-style layout: one subdirectory per command."""
    from .media_io import save_audio  # local import avoids a cycle at module load

    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    for c in range(n_commands):
        proto = _command_prototype(rng)
        cmd_dir = out_dir / f"command{c:03d}"
        cmd_dir.mkdir(parents=True, exist_ok=True)
        for i in range(clips_per_command):
            clip = synth_command_clip(proto, rng)
            _write_wav16(cmd_dir / f"clip{i:04d}.wav", clip, SYNTH_AUDIO_RATE)
    return out_dir


def _write_wav16(path, samples: np.ndarray, rate: int) -> None:
    from scipy.io import wavfile

    pcm = np.round(np.clip(samples, -1, 1).astype(np.float64) * 32767).astype(np.int16)
    wavfile.write(path, rate, pcm)


def synth_image(rng: np.random.Generator, size: int = SYNTH_IMAGE_SIZE) -> np.ndarray:
    """Smooth random field plus soft geometric shapes, values kept off 0/1."""
    base = rng.uniform(0.2, 0.8, size=(8, 8, 3))
    img = np.array(Image.fromarray((base * 255).astype(np.uint8)).resize((size, size), Image.BILINEAR), dtype=np.float64) / 255.0

    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(rng.integers(3, 7)):
        color = rng.uniform(0.1, 0.9, size=3)
        if rng.random() < 0.5:
            cy, cx = rng.uniform(0, size, size=2)
            r = rng.uniform(size * 0.06, size * 0.3)
            m = ((yy - cy) ** 2 + (xx - cx) ** 2) < r**2
        else:
            y0, x0 = rng.integers(0, size, size=2)
            h, w = rng.integers(size // 10, size // 2, size=2)
            m = (yy >= y0) & (yy < y0 + h) & (xx >= x0) & (xx < x0 + w)
        alpha = rng.uniform(0.3, 0.9)
        img[m] = (1 - alpha) * img[m] + alpha * color

    img = gaussian_filter(img, sigma=(1.2, 1.2, 0))
    img += rng.normal(0, 0.01, size=img.shape)
    return np.clip(img, 0.02, 0.98).astype(np.float32)


def make_image_corpus(out_dir, n_images: int, seed: int = 0) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_images):
        img = synth_image(rng)
        Image.fromarray(np.round(img * 255).astype(np.uint8)).save(out_dir / f"img{i:05d}.png")
    return out_dir
