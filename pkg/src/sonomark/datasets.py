"""Audio-image pair manifests and labeled audio-audio similarity pairs.

A manifest is a tab-separated table of (split, image-path, audio-path)
records. Every command class (the clip's parent directory, or its filename
prefix for flat layouts) appears in all splits, but the individual clips and
images are disjoint across train/val/test.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .distortions import DistortionSpec, apply_distortion
from .errors import ConfigurationError, InvalidInputError
from .media_io import load_audio, load_image, save_audio
from .networks import WMNetwork

SPLITS = ("train", "val", "test")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def audio_command(path, audio_root=None) -> str:
    """Command identity of a clip: its subdirectory name, else filename prefix."""
    path = Path(path)
    if audio_root is not None and path.parent != Path(audio_root):
        return path.parent.name
    if audio_root is None and path.parent.name not in ("", "."):
        return path.parent.name
    return path.stem.split("_")[0]


@dataclass
class ManifestEntry:
    split: str
    image_path: str
    audio_path: str


@dataclass
class PairManifest:
    entries: list = field(default_factory=list)
    seed: int = 0

    def split_entries(self, split: str) -> list:
        return [e for e in self.entries if e.split == split]

    def counts(self) -> dict:
        return {s: len(self.split_entries(s)) for s in SPLITS}

    def commands(self, split: str) -> set:
        return {audio_command(e.audio_path) for e in self.split_entries(split)}

    def validate_disjoint(self) -> None:
        for attr in ("audio_path", "image_path"):
            train = {getattr(e, attr) for e in self.split_entries("train")}
            for other in ("val", "test"):
                overlap = train & {getattr(e, attr) for e in self.split_entries(other)}
                if overlap:
                    raise ConfigurationError(f"{attr} values shared between train and {other}: {sorted(overlap)[:3]}")

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            for e in self.entries:
                f.write(f"{e.split}\t{e.image_path}\t{e.audio_path}\n")

    @classmethod
    def load(cls, path) -> "PairManifest":
        entries = []
        with open(path) as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                split, image_path, audio_path = line.split("\t")
                entries.append(ManifestEntry(split, image_path, audio_path))
        return cls(entries=entries)


def _sample(rng: np.random.Generator, items: list, n: int) -> list:
    """n draws, without replacement when the pool allows it."""
    if n <= len(items):
        idx = rng.choice(len(items), size=n, replace=False)
    else:
        idx = rng.choice(len(items), size=n, replace=True)
    return [items[i] for i in idx]


def _proportional_counts(n_items: int, sizes: tuple) -> list:
    """Partition n_items across splits proportionally to the split sizes,
    giving every nonempty split at least one item when the pool allows."""
    total = sum(sizes) or 1
    counts = [min(1, n_items) if s > 0 else 0 for s in sizes]
    spare = n_items - sum(counts)
    for i, size in enumerate(sizes):
        counts[i] += int(spare * size / total)
    counts[int(np.argmax(sizes))] += n_items - sum(counts)
    return counts


def build_manifest(image_dir, audio_dir, sizes, seed: int = 0) -> PairManifest:
    """Deterministically sample (image, audio) pairs per split. Each command
    class contributes clips to every split, but the clip files and the image
    files themselves are disjoint across splits."""
    image_dir, audio_dir = Path(image_dir), Path(audio_dir)
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != 3 or any(s < 0 for s in sizes):
        raise InvalidInputError(f"sizes must be three nonnegative counts, got {sizes}")

    images = sorted(str(p) for p in image_dir.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES)
    audio = sorted(str(p) for p in audio_dir.rglob("*.wav"))
    if not images or not audio:
        raise ConfigurationError(f"insufficient media: {len(images)} images, {len(audio)} audio clips")

    by_command: dict[str, list] = {}
    for a in audio:
        by_command.setdefault(audio_command(a, audio_root=audio_dir), []).append(a)
    commands = sorted(by_command)
    if len(commands) < 2 and sum(sizes) > 0:
        raise ConfigurationError(f"need at least 2 distinct audio commands, found {len(commands)}")

    rng = np.random.default_rng(seed)

    # split the clips of every command across the splits, so each split sees
    # all command classes but no clip file appears in two splits
    clip_alloc: list[list] = [[], [], []]
    for cmd in commands:
        clips = list(by_command[cmd])
        clips = [clips[i] for i in rng.permutation(len(clips))]
        pos = 0
        for i, n in enumerate(_proportional_counts(len(clips), sizes)):
            clip_alloc[i].extend(clips[pos : pos + n])
            pos += n

    images = [images[i] for i in rng.permutation(len(images))]
    img_alloc: list[list] = []
    pos = 0
    for n in _proportional_counts(len(images), sizes):
        img_alloc.append(images[pos : pos + n])
        pos += n

    entries = []
    for split, size, clips, imgs in zip(SPLITS, sizes, clip_alloc, img_alloc):
        if size == 0:
            continue
        if not clips or not imgs:
            raise ConfigurationError(f"insufficient media to populate split {split!r}")
        clips = sorted(clips)
        for img, clip in zip(_sample(rng, imgs, size), _sample(rng, clips, size)):
            entries.append(ManifestEntry(split, img, clip))

    manifest = PairManifest(entries=entries, seed=seed)
    manifest.validate_disjoint()
    return manifest


# ---------------------------------------------------------------------------
# Similarity pairs
# ---------------------------------------------------------------------------


@dataclass
class SimilarityPair:
    w1: np.ndarray  # claimed watermark
    w2: np.ndarray  # extraction from a (possibly distorted) marked image
    label: int  # 1 iff w2 was embedded from w1
    distortion: DistortionSpec = DistortionSpec()


def default_distortion_grid(seed: int = 0) -> list:
    """Training-range attacks: cutout up to 50%, rotation within +-5 degrees."""
    grid = [DistortionSpec("cutout", cutout_fraction=f, seed=seed + i) for i, f in enumerate((0.1, 0.2, 0.3, 0.4, 0.5))]
    grid += [DistortionSpec("rotation", rotation_degrees=d) for d in (-5, -3, -1, 1, 3, 5)]
    return grid


class _MediaCache:
    def __init__(self):
        self.audio: dict[str, np.ndarray] = {}
        self.images: dict[str, np.ndarray] = {}

    def clip(self, path: str) -> np.ndarray:
        if path not in self.audio:
            self.audio[path] = load_audio(path)
        return self.audio[path]

    def image(self, path: str) -> np.ndarray:
        if path not in self.images:
            self.images[path] = load_image(path)
        return self.images[path]


def build_similarity_pairs(
    manifest: PairManifest,
    wm: WMNetwork,
    distortion_grid: list | None = None,
    seed: int = 0,
    split: str = "train",
    n_pairs: int | None = None,
    clean_fraction: float = 0.2,
    batch_size: int = 8,
) -> list:
    """Run the watermarking chain over manifest entries and emit balanced
    labeled pairs: one positive (original, extraction) and one negative
    (different-command original, extraction) per processed entry."""
    entries = manifest.split_entries(split)
    if not entries:
        raise ConfigurationError(f"manifest has no entries for split {split!r}")
    grid = distortion_grid if distortion_grid is not None else default_distortion_grid(seed)
    if n_pairs is None:
        n_pairs = 2 * len(entries)
    if n_pairs % 2:
        raise InvalidInputError("n_pairs must be even (one positive and one negative per extraction)")

    rng = np.random.default_rng(seed)
    cache = _MediaCache()
    by_command: dict[str, list] = {}
    for e in entries:
        by_command.setdefault(audio_command(e.audio_path), []).append(e.audio_path)
    if len(by_command) < 2:
        raise ConfigurationError("need at least two distinct commands to form negative pairs")

    n_extractions = n_pairs // 2
    chosen = [entries[i] for i in rng.integers(0, len(entries), size=n_extractions)]
    specs = []
    for i in range(n_extractions):
        if rng.random() < clean_fraction:
            specs.append(DistortionSpec())
        else:
            base = grid[int(rng.integers(0, len(grid)))]
            if base.kind == "cutout":  # fresh placement per pair, reproducible from the run seed
                base = DistortionSpec("cutout", cutout_fraction=base.cutout_fraction, seed=int(rng.integers(0, 2**31)))
            specs.append(base)

    pairs = []
    wm.eval()
    with torch.no_grad():
        for start in range(0, n_extractions, batch_size):
            batch = chosen[start : start + batch_size]
            clips = np.stack([cache.clip(e.audio_path) for e in batch])
            covers = np.stack([cache.image(e.image_path) for e in batch])
            frames = torch.from_numpy(clips).reshape(len(batch), wm.cfg.steps, wm.cfg.frame_dim)
            covers_t = torch.from_numpy(covers).permute(0, 3, 1, 2)
            marked = wm.embedder(wm.encoder(frames), covers_t).permute(0, 2, 3, 1).numpy()

            distorted = np.stack(
                [apply_distortion(marked[i], specs[start + i]) for i in range(len(batch))]
            )
            codes = wm.extractor(torch.from_numpy(distorted).permute(0, 3, 1, 2))
            w2 = wm.decoder(codes).numpy()

            for i, e in enumerate(batch):
                w1 = clips[i]
                spec = specs[start + i]
                pairs.append(SimilarityPair(w1=w1, w2=w2[i], label=1, distortion=spec))
                own = audio_command(e.audio_path)
                other_cmds = [c for c in by_command if c != own]
                cmd = other_cmds[int(rng.integers(0, len(other_cmds)))]
                other_path = by_command[cmd][int(rng.integers(0, len(by_command[cmd])))]
                pairs.append(SimilarityPair(w1=cache.clip(other_path), w2=w2[i], label=0, distortion=spec))
    return pairs


def pairs_to_arrays(pairs: list) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    w1 = np.stack([p.w1 for p in pairs]).astype(np.float32)
    w2 = np.stack([p.w2 for p in pairs]).astype(np.float32)
    y = np.array([p.label for p in pairs], dtype=np.float32)
    return w1, w2, y


def write_pair_files(pairs: list, out_dir) -> Path:
    """Persist pairs as WAV clips (content-deduplicated) plus a TSV index."""
    out_dir = Path(out_dir)
    clip_dir = out_dir / "clips"
    clip_dir.mkdir(parents=True, exist_ok=True)
    seen: dict[bytes, str] = {}

    def clip_file(clip: np.ndarray) -> str:
        key = clip.tobytes()
        if key not in seen:
            name = f"clip{len(seen):06d}.wav"
            save_audio(np.clip(clip, -1.0, 1.0), clip_dir / name)
            seen[key] = name
        return seen[key]

    index = out_dir / "pairs.tsv"
    with open(index, "w") as f:
        for p in pairs:
            d = p.distortion
            f.write(f"clips/{clip_file(p.w1)}\tclips/{clip_file(p.w2)}\t{p.label}\t{d.kind}\t{d.parameter}\t{d.seed}\n")
    return index


def _read_clip_raw(path) -> np.ndarray:
    """Read a stored 16-bit pair clip without renormalization."""
    from scipy.io import wavfile

    _, data = wavfile.read(path)
    return (data.astype(np.float32) / 32767.0).clip(-1.0, 1.0)


def load_pair_files(index_path) -> list:
    index_path = Path(index_path)
    root = index_path.parent
    pairs = []
    cache: dict[str, np.ndarray] = {}

    def clip(rel: str) -> np.ndarray:
        if rel not in cache:
            cache[rel] = _read_clip_raw(root / rel)
        return cache[rel]

    with open(index_path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            w1_rel, w2_rel, label, kind, param, seed = line.split("\t")
            spec = DistortionSpec(
                kind,
                cutout_fraction=float(param) if kind == "cutout" else 0.0,
                rotation_degrees=float(param) if kind == "rotation" else 0.0,
                seed=int(seed),
            )
            pairs.append(SimilarityPair(w1=clip(w1_rel), w2=clip(w2_rel), label=int(label), distortion=spec))
    return pairs
