"""End-to-end desk-scale pipeline with cached, resumable stages.

Each stage (corpus synthesis, manifest, pretraining, watermark training,
similarity pairs, similarity training) writes its outputs plus a marker file
recording the stage parameters; re-running with the same parameters reuses
the cached outputs. Profiles pin dataset sizes and epoch budgets."""

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import datasets, training
from .errors import ConfigurationError
from .metrics import LossWeights


@dataclass(frozen=True)
class Profile:
    name: str
    sizes: tuple  # manifest (train, val, test) pair counts
    commands: int
    clips_per_command: int
    n_images: int
    pretrain_epochs: int
    wm_epochs: int
    sim_epochs: int
    sim_pairs: tuple  # (train, val, test) audio-audio pair counts
    lambda1: float = 1.0
    lambda2: float = 1.0
    wm_batch: int = 8
    sim_batch: int = 64
    pretrain_batch: int = 32
    learning_rate: float = 1e-3
    # the LSTM autoencoder tolerates (and needs) a hotter schedule than the
    # convolutional stages
    pretrain_lr: float = 5e-3
    # early-stop targets: training still runs at most the stated epoch budget
    wm_targets: dict | None = None
    sim_targets: dict | None = None


PROFILES = {
    "tiny": Profile(
        name="tiny",
        sizes=(500, 100, 100),
        commands=10,
        clips_per_command=75,
        n_images=700,
        pretrain_epochs=50,
        wm_epochs=10,
        sim_epochs=10,
        sim_pairs=(2000, 400, 400),
        wm_targets={"ssim": 0.905, "rmse": 0.045},
        sim_targets={"acc": 0.93},
    ),
    "small": Profile(
        name="small",
        sizes=(2000, 200, 200),
        commands=30,
        clips_per_command=100,
        n_images=2400,
        pretrain_epochs=50,
        wm_epochs=50,
        sim_epochs=20,
        sim_pairs=(10000, 1000, 1000),
        lambda1=2.0,
        lambda2=6.0,  # extraction converges early with lots of margin; the
        # heavier fidelity weight moves the remaining epochs toward SSIM
        wm_targets={"ssim": 0.905, "rmse": 0.045},
        sim_targets={"acc": 0.93},
    ),
    "paper": Profile(
        name="paper",
        sizes=(42600, 9700, 5800),
        commands=35,
        clips_per_command=1500,
        n_images=45000,
        pretrain_epochs=50,
        wm_epochs=200,
        sim_epochs=100,
        sim_pairs=(340000, 64000, 46000),
    ),
}


def _marker_ok(marker: Path, params: dict, outputs: list) -> bool:
    if not marker.exists():
        return False
    try:
        recorded = json.loads(marker.read_text())
    except json.JSONDecodeError:
        return False
    return recorded == params and all(Path(o).exists() for o in outputs)


def _write_marker(marker: Path, params: dict) -> None:
    marker.parent.mkdir(parents=True, exist_ok=True)
    marker.write_text(json.dumps(params, sort_keys=True))


def ensure_corpus(root, profile: Profile, seed: int = 0):
    from . import synth

    root = Path(root)
    img_dir = root / "corpus" / "images"
    audio_dir = root / "corpus" / "audio"
    params = {
        "commands": profile.commands,
        "clips_per_command": profile.clips_per_command,
        "n_images": profile.n_images,
        "seed": seed,
    }
    marker = root / "corpus" / "done.json"
    if not _marker_ok(marker, params, [img_dir, audio_dir]):
        synth.make_audio_corpus(audio_dir, profile.commands, profile.clips_per_command, seed=seed)
        synth.make_image_corpus(img_dir, profile.n_images, seed=seed + 1)
        _write_marker(marker, params)
    return img_dir, audio_dir


def ensure_manifest(root, profile: Profile, seed: int = 0) -> Path:
    root = Path(root)
    img_dir, audio_dir = ensure_corpus(root, profile, seed)
    path = root / "manifest.tsv"
    params = {"sizes": list(profile.sizes), "seed": seed}
    marker = root / "manifest.done.json"
    if not _marker_ok(marker, params, [path]):
        manifest = datasets.build_manifest(img_dir, audio_dir, profile.sizes, seed=seed)
        manifest.save(path)
        _write_marker(marker, params)
    return path


def ensure_pretrain(root, profile: Profile, seed: int = 0) -> Path:
    root = Path(root)
    manifest_path = ensure_manifest(root, profile, seed)
    ckpt = root / "checkpoints" / "pretrain_best.pt"
    params = {"epochs": profile.pretrain_epochs, "seed": seed, "lr": profile.pretrain_lr, "batch": profile.pretrain_batch}
    marker = root / "checkpoints" / "pretrain.done.json"
    if not _marker_ok(marker, params, [ckpt]):
        cfg = training.TrainConfig(
            stage="pretrain",
            epochs=profile.pretrain_epochs,
            checkpoint_dir=str(root / "checkpoints"),
            log_path=str(root / "logs" / "pretrain.csv"),
            batch_size=profile.pretrain_batch,
            learning_rate=profile.pretrain_lr,
            seed=seed,
        )
        training.pretrain_encoder_decoder(cfg, datasets.PairManifest.load(manifest_path))
        _write_marker(marker, params)
    return ckpt


def ensure_wm(root, profile: Profile, seed: int = 0) -> Path:
    root = Path(root)
    manifest_path = ensure_manifest(root, profile, seed)
    pretrain_ckpt = ensure_pretrain(root, profile, seed)
    ckpt = root / "checkpoints" / "wm_best.pt"
    params = {
        "epochs": profile.wm_epochs,
        "seed": seed,
        "lr": profile.learning_rate,
        "batch": profile.wm_batch,
        "lambda1": profile.lambda1,
        "lambda2": profile.lambda2,
        "targets": profile.wm_targets,
    }
    marker = root / "checkpoints" / "wm.done.json"
    if not _marker_ok(marker, params, [ckpt]):
        cfg = training.TrainConfig(
            stage="wm",
            epochs=profile.wm_epochs,
            checkpoint_dir=str(root / "checkpoints"),
            log_path=str(root / "logs" / "wm.csv"),
            batch_size=profile.wm_batch,
            learning_rate=profile.learning_rate,
            loss_weights=LossWeights(profile.lambda1, profile.lambda2),
            seed=seed,
            val_targets=profile.wm_targets,
        )
        training.train_wm(cfg, datasets.PairManifest.load(manifest_path), pretrain_ckpt)
        _write_marker(marker, params)
    return ckpt


def ensure_sim_pairs(root, profile: Profile, seed: int = 0) -> dict:
    root = Path(root)
    manifest_path = ensure_manifest(root, profile, seed)
    wm_ckpt = ensure_wm(root, profile, seed)
    manifest = datasets.PairManifest.load(manifest_path)
    out = {}
    pair_dir = root / "sim_pairs"
    for split_idx, (split, n) in enumerate(zip(("train", "val", "test"), profile.sim_pairs)):
        path = pair_dir / f"{split}.npz"
        params = {"n": n, "seed": seed, "split": split}
        marker = pair_dir / f"{split}.done.json"
        if not _marker_ok(marker, params, [path]):
            wm = training.load_wm_network(wm_ckpt)
            pairs = datasets.build_similarity_pairs(manifest, wm, seed=seed + 101 * split_idx, split=split, n_pairs=n)
            w1, w2, y = datasets.pairs_to_arrays(pairs)
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savez(path, w1=w1.astype(np.float16), w2=w2.astype(np.float16), y=y)
            _write_marker(marker, params)
        out[split] = path
    return out


def load_pair_arrays(path):
    data = np.load(path)
    return data["w1"].astype(np.float32), data["w2"].astype(np.float32), data["y"].astype(np.float32)


def ensure_similarity(root, profile: Profile, seed: int = 0) -> Path:
    root = Path(root)
    wm_ckpt = ensure_wm(root, profile, seed)
    pair_paths = ensure_sim_pairs(root, profile, seed)
    ckpt = root / "checkpoints" / "similarity_best.pt"
    params = {"epochs": profile.sim_epochs, "seed": seed, "batch": profile.sim_batch, "targets": profile.sim_targets}
    marker = root / "checkpoints" / "similarity.done.json"
    if not _marker_ok(marker, params, [ckpt]):
        cfg = training.TrainConfig(
            stage="similarity",
            epochs=profile.sim_epochs,
            checkpoint_dir=str(root / "checkpoints"),
            log_path=str(root / "logs" / "similarity.csv"),
            batch_size=profile.sim_batch,
            learning_rate=profile.learning_rate,
            seed=seed,
            val_targets=profile.sim_targets,
        )
        training.train_similarity(cfg, load_pair_arrays(pair_paths["train"]), wm_ckpt, load_pair_arrays(pair_paths["val"]))
        _write_marker(marker, params)
    return ckpt


def run_pipeline(root, profile_name: str = "small", seed: int = 0) -> dict:
    """Run (or resume) every stage; returns the key artifact paths."""
    if profile_name not in PROFILES:
        raise ConfigurationError(f"unknown profile {profile_name!r}; choose from {sorted(PROFILES)}")
    profile = PROFILES[profile_name]
    root = Path(root)
    return {
        "manifest": ensure_manifest(root, profile, seed),
        "pretrain": ensure_pretrain(root, profile, seed),
        "wm": ensure_wm(root, profile, seed),
        "sim_pairs": ensure_sim_pairs(root, profile, seed),
        "similarity": ensure_similarity(root, profile, seed),
    }
