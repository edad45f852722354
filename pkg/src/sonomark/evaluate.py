"""Held-out evaluation, robustness sweeps, and the RMSE-vs-similarity
ablation table. All outputs are CSV data products; plotting is external."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .datasets import PairManifest, audio_command
from .distortions import MAX_CUTOUT_FRACTION, MAX_ROTATION_DEGREES, DistortionSpec, apply_distortion
from .errors import ConfigurationError, InvalidInputError
from .media_io import load_audio, load_image
from .metrics import FULL_SCALE_TEST_RMSE, rmse, ssim
from .networks import WMNetwork
from .similarity import SimilarityNet

SWEEP_COLUMNS = ["attack", "parameter", "mean_rmse", "similarity_accuracy", "n"]
ABLATION_COLUMNS = ["kind", "parameter", "rmse", "similarity_score", "label"]


def load_split_arrays(manifest: PairManifest, split: str, limit: int | None = None):
    """Manifest split -> (clips (N, 8192), covers (N, 128, 128, 3)) arrays."""
    entries = manifest.split_entries(split)
    if not entries:
        raise ConfigurationError(f"manifest has no entries for split {split!r}")
    if limit is not None:
        entries = entries[:limit]
    audio_cache: dict[str, np.ndarray] = {}
    image_cache: dict[str, np.ndarray] = {}
    clips, covers = [], []
    for e in entries:
        if e.audio_path not in audio_cache:
            audio_cache[e.audio_path] = load_audio(e.audio_path)
        if e.image_path not in image_cache:
            image_cache[e.image_path] = load_image(e.image_path)
        clips.append(audio_cache[e.audio_path])
        covers.append(image_cache[e.image_path])
    return np.stack(clips), np.stack(covers)


def forward_arrays(net: WMNetwork, clips: np.ndarray, covers: np.ndarray, batch_size: int = 8):
    """Batched full-chain forward: returns (marked NHWC, extracted clips)."""
    net.eval()
    marked_all, prime_all = [], []
    with torch.no_grad():
        for start in range(0, len(clips), batch_size):
            w = torch.from_numpy(clips[start : start + batch_size])
            c = torch.from_numpy(covers[start : start + batch_size]).permute(0, 3, 1, 2)
            frames = w.reshape(len(w), net.cfg.steps, net.cfg.frame_dim)
            marked, w_prime = net(frames, c)
            marked_all.append(marked.permute(0, 2, 3, 1).numpy())
            prime_all.append(w_prime.numpy())
    return np.concatenate(marked_all), np.concatenate(prime_all)


def extract_arrays(net: WMNetwork, marked: np.ndarray, batch_size: int = 8) -> np.ndarray:
    """Batched blind extraction + decoding: marked NHWC -> clips (N, 8192)."""
    net.eval()
    out = []
    with torch.no_grad():
        for start in range(0, len(marked), batch_size):
            m = torch.from_numpy(marked[start : start + batch_size]).permute(0, 3, 1, 2)
            out.append(net.decoder(net.extractor(m)).numpy())
    return np.concatenate(out)


def evaluate_wm(net: WMNetwork, clips: np.ndarray, covers: np.ndarray, batch_size: int = 8, quantize: bool = False) -> dict:
    """Mean extraction RMSE and marked-image SSIM over (clip, cover) pairs.

    With quantize=True the marked image is pushed through the 8-bit
    bottleneck before extraction.
    """
    marked, _ = forward_arrays(net, clips, covers, batch_size)
    if quantize:
        marked = np.round(marked * 255.0).astype(np.float32) / 255.0
    prime = extract_arrays(net, marked, batch_size)
    rmses = [rmse(clips[i], prime[i]) for i in range(len(clips))]
    ssims = [ssim(covers[i], marked[i]) for i in range(len(clips))]
    return {
        "rmse": float(np.mean(rmses)),
        "ssim": float(np.mean(ssims)),
        "extract_mse": float(np.mean([r**2 for r in rmses])),
        "fidelity_mse": float(np.mean((marked - covers) ** 2)),
    }


@dataclass(frozen=True)
class SweepConfig:
    attack: str  # "cutout" | "rotation"
    grid: tuple
    trials_per_point: int = 50
    seeds: tuple = (0,)

    def __post_init__(self):
        if self.attack not in ("cutout", "rotation"):
            raise InvalidInputError(f"unknown attack {self.attack!r}")
        if self.trials_per_point < 1:
            raise InvalidInputError("trials_per_point must be >= 1")
        for v in self.grid:
            if self.attack == "cutout" and not 0 <= v <= MAX_CUTOUT_FRACTION:
                raise InvalidInputError(f"cutout fraction {v} out of range")
            if self.attack == "rotation" and abs(v) > MAX_ROTATION_DEGREES:
                raise InvalidInputError(f"rotation {v} out of range")


@dataclass
class SweepReport:
    rows: list = field(default_factory=list)  # dicts keyed by SWEEP_COLUMNS

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        try:
            with open(tmp, "w", newline="") as f:
                w = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
                w.writeheader()
                for row in self.rows:
                    w.writerow(row)
            tmp.replace(path)
        finally:
            tmp.unlink(missing_ok=True)

    @classmethod
    def load(cls, path) -> "SweepReport":
        with open(path, newline="") as f:
            rows = []
            for r in csv.DictReader(f):
                rows.append(
                    {
                        "attack": r["attack"],
                        "parameter": float(r["parameter"]),
                        "mean_rmse": float(r["mean_rmse"]),
                        "similarity_accuracy": float(r["similarity_accuracy"]),
                        "n": int(r["n"]),
                    }
                )
        return cls(rows=rows)


def _sample_eval_pairs(manifest: PairManifest, split: str, n: int, seed: int):
    """n (clip, cover, mismatched clip) triples with command-level mismatch."""
    entries = manifest.split_entries(split)
    if not entries:
        raise ConfigurationError(f"manifest has no entries for split {split!r}")
    rng = np.random.default_rng(seed)
    by_command: dict[str, list] = {}
    for e in entries:
        by_command.setdefault(audio_command(e.audio_path), []).append(e.audio_path)
    if len(by_command) < 2:
        raise ConfigurationError("need at least two commands for mismatched pairs")
    chosen = [entries[i] for i in rng.integers(0, len(entries), size=n)]
    audio_cache: dict[str, np.ndarray] = {}

    def clip(path):
        if path not in audio_cache:
            audio_cache[path] = load_audio(path)
        return audio_cache[path]

    clips = np.stack([clip(e.audio_path) for e in chosen])
    covers = np.stack([load_image(e.image_path) for e in chosen])
    others = []
    for e in chosen:
        own = audio_command(e.audio_path)
        cmds = [c for c in by_command if c != own]
        cmd = cmds[int(rng.integers(0, len(cmds)))]
        others.append(clip(by_command[cmd][int(rng.integers(0, len(by_command[cmd])))]))
    return clips, covers, np.stack(others)


def run_sweep(
    wm: WMNetwork,
    sim: SimilarityNet,
    manifest: PairManifest,
    cfg: SweepConfig,
    out_csv=None,
    split: str = "test",
    threshold: float = 0.5,
    seed: int = 0,
    batch_size: int = 8,
) -> SweepReport:
    """Distort marked images at each grid point, extract, and score.

    Accuracy counts a matched pair correct when score >= threshold and a
    mismatched pair correct when score < threshold; pairs are balanced at
    every grid point, and the same base pairs are reused across points.
    """
    clips, covers, others = _sample_eval_pairs(manifest, split, cfg.trials_per_point, seed)
    marked, _ = forward_arrays(wm, clips, covers, batch_size)

    report = SweepReport()
    sim.eval()
    for gi, value in enumerate(cfg.grid):
        distorted = np.empty_like(marked)
        for i in range(len(marked)):
            if cfg.attack == "cutout":
                spec = DistortionSpec("cutout", cutout_fraction=value, seed=int(cfg.seeds[gi % len(cfg.seeds)]) * 100003 + i)
            else:
                spec = DistortionSpec("rotation", rotation_degrees=value)
            distorted[i] = apply_distortion(marked[i], spec)
        prime = extract_arrays(wm, distorted, batch_size)

        with torch.no_grad():
            pos = sim(torch.from_numpy(clips), torch.from_numpy(prime)).numpy()
            neg = sim(torch.from_numpy(others), torch.from_numpy(prime)).numpy()
        correct = int((pos >= threshold).sum()) + int((neg < threshold).sum())
        mean_rmse = float(np.mean([rmse(clips[i], prime[i]) for i in range(len(clips))]))
        report.rows.append(
            {
                "attack": cfg.attack,
                "parameter": float(value),
                "mean_rmse": mean_rmse,
                "similarity_accuracy": correct / (2 * len(clips)),
                "n": 2 * len(clips),
            }
        )
    if out_csv is not None:
        report.save(out_csv)
    return report


def run_ablation(
    wm: WMNetwork,
    sim: SimilarityNet,
    manifest: PairManifest,
    out_csv,
    n_pairs: int = 40,
    specs: list | None = None,
    split: str = "test",
    seed: int = 0,
    batch_size: int = 8,
) -> list:
    """Per-pair (RMSE, similarity score) table for noisy matched pairs,
    headed by the clean-extraction baseline it should be compared against."""
    if specs is None:
        specs = [DistortionSpec("cutout", cutout_fraction=f, seed=seed + i) for i, f in enumerate((0.2, 0.3, 0.4, 0.5))]
    clips, covers, others = _sample_eval_pairs(manifest, split, n_pairs, seed)
    marked, clean_prime = forward_arrays(wm, clips, covers, batch_size)
    clean_baseline = float(np.mean([rmse(clips[i], clean_prime[i]) for i in range(len(clips))]))

    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_pairs):
        spec = specs[int(rng.integers(0, len(specs)))]
        if spec.kind == "cutout":
            spec = DistortionSpec("cutout", cutout_fraction=spec.cutout_fraction, seed=int(rng.integers(0, 2**31)))
        noisy = apply_distortion(marked[i], spec)
        prime = extract_arrays(wm, noisy[None], batch_size)[0]
        with torch.no_grad():
            score = float(sim(torch.from_numpy(clips[i][None]), torch.from_numpy(prime[None]))[0])
        rows.append(
            {"kind": spec.kind, "parameter": spec.parameter, "rmse": rmse(clips[i], prime), "similarity_score": score, "label": 1}
        )

    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_csv.with_suffix(out_csv.suffix + ".tmp")
    try:
        with open(tmp, "w", newline="") as f:
            f.write(f"# clean_rmse_baseline={clean_baseline:.6f}\n")
            f.write(f"# full_scale_reference_rmse={FULL_SCALE_TEST_RMSE}\n")
            w = csv.DictWriter(f, fieldnames=ABLATION_COLUMNS)
            w.writeheader()
            for row in rows:
                w.writerow(row)
        tmp.replace(out_csv)
    finally:
        tmp.unlink(missing_ok=True)
    return rows
