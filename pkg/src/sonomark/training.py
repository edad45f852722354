"""Three-stage training: encoder-decoder pretraining, end-to-end watermark
network training, and similarity-network training. Each stage logs a
learning-curve CSV, saves best-validation checkpoints, and is deterministic
for a fixed seed in single-threaded mode."""

import csv
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from . import evaluate
from .checkpoints import load_checkpoint, save_checkpoint, state_hash
from .datasets import PairManifest, pairs_to_arrays
from .errors import ConfigurationError, InvalidInputError, TrainingDivergedError
from .media_io import load_audio
from .metrics import LossWeights
from .networks import WMConfig, WMNetwork, init_parameters
from .similarity import SimConfig, SimilarityNet

STAGES = ("pretrain", "wm", "similarity")

# metrics where larger is better, for early-stop targets and best-model choice
_HIGHER_IS_BETTER = {"ssim", "acc"}


@dataclass
class TrainConfig:
    stage: str
    epochs: int
    checkpoint_dir: str
    log_path: str
    batch_size: int = 32
    learning_rate: float = 1e-3
    loss_weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    grad_clip: float = 5.0
    val_targets: dict | None = None  # e.g. {"rmse": 0.05, "ssim": 0.9}; stop once all met
    num_threads: int = 1

    def __post_init__(self):
        if self.stage not in STAGES:
            raise InvalidInputError(f"unknown stage {self.stage!r}")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be > 0")


def seed_all(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def _setup(cfg: TrainConfig) -> None:
    torch.set_num_threads(cfg.num_threads)
    seed_all(cfg.seed)
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    Path(cfg.log_path).parent.mkdir(parents=True, exist_ok=True)


def _log_row(path, header: list, row: list) -> None:
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as f:
        w = csv.writer(f)
        if new:
            w.writerow(header)
        w.writerow([f"{v:.8g}" if isinstance(v, float) else v for v in row])


def _check_finite(value: float, stage: str, epoch: int) -> None:
    if not np.isfinite(value):
        raise TrainingDivergedError(f"{stage} training diverged at epoch {epoch}: loss={value}")


def _targets_met(metrics: dict, targets: dict | None) -> bool:
    if not targets:
        return False
    for key, bound in targets.items():
        if key not in metrics:
            return False
        if key in _HIGHER_IS_BETTER:
            if metrics[key] < bound:
                return False
        elif metrics[key] > bound:
            return False
    return True


def _set_cosine_lr(opt, base_lr: float, epoch: int, total_epochs: int) -> None:
    """Cosine decay from base_lr to ~5% of it over the epoch budget. Written
    as a pure function of the epoch number so resumed runs stay on schedule."""
    t = (epoch - 1) / max(1, total_epochs)
    lr = base_lr * (0.05 + 0.95 * 0.5 * (1.0 + np.cos(np.pi * t)))
    for group in opt.param_groups:
        group["lr"] = lr


def _epoch_batches(n: int, batch_size: int, seed: int):
    g = torch.Generator().manual_seed(seed)
    perm = torch.randperm(n, generator=g)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def _unique_clips(manifest: PairManifest, split: str) -> np.ndarray:
    paths = list(dict.fromkeys(e.audio_path for e in manifest.split_entries(split)))
    if not paths:
        raise ConfigurationError(f"manifest has no audio for split {split!r}")
    return np.stack([load_audio(p) for p in paths])


# ---------------------------------------------------------------------------
# Stage 1: encoder-decoder pretraining (watermark reconstructed to itself)
# ---------------------------------------------------------------------------


def pretrain_encoder_decoder(cfg: TrainConfig, manifest: PairManifest, max_clips: int | None = None) -> Path:
    if cfg.stage != "pretrain":
        raise ConfigurationError(f"pretrain_encoder_decoder called with stage {cfg.stage!r}")
    _setup(cfg)

    train = _unique_clips(manifest, "train")
    val = _unique_clips(manifest, "val")
    if max_clips is not None:
        train = train[:max_clips]

    net = WMNetwork.build(WMConfig(seed=cfg.seed))
    params = list(net.encoder.parameters()) + list(net.decoder.parameters())
    opt = torch.optim.Adam(params, lr=cfg.learning_rate)

    train_t = torch.from_numpy(train).reshape(len(train), net.cfg.steps, net.cfg.frame_dim)
    val_t = torch.from_numpy(val).reshape(len(val), net.cfg.steps, net.cfg.frame_dim)

    best_path = Path(cfg.checkpoint_dir) / "pretrain_best.pt"
    best_val = float("inf")

    def save_best(meta):
        save_checkpoint(best_path, "wm-pretrain", net.cfg.to_dict(), net.state_dict(), meta)

    save_best({"epoch": 0, "seed": cfg.seed})  # zero-epoch run keeps the initialization
    for epoch in range(1, cfg.epochs + 1):
        net.train()
        _set_cosine_lr(opt, cfg.learning_rate, epoch, cfg.epochs)
        losses = []
        for idx in _epoch_batches(len(train_t), cfg.batch_size, cfg.seed + epoch):
            frames = train_t[idx]
            recon = net.decoder(net.encoder(frames))
            loss = F.mse_loss(recon, frames.reshape(len(idx), -1))
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
            opt.step()
            losses.append(float(loss.detach()))
            _check_finite(losses[-1], "pretrain", epoch)

        net.eval()
        with torch.no_grad():
            recon = net.decoder(net.encoder(val_t))
            val_loss = float(F.mse_loss(recon, val_t.reshape(len(val_t), -1)))
        _check_finite(val_loss, "pretrain", epoch)
        train_loss = float(np.mean(losses))
        val_rmse = float(np.sqrt(val_loss))
        _log_row(cfg.log_path, ["epoch", "train_loss", "val_loss", "val_rmse"], [epoch, train_loss, val_loss, val_rmse])

        if val_loss < best_val:
            best_val = val_loss
            save_best({"epoch": epoch, "seed": cfg.seed, "val_loss": val_loss, "val_rmse": val_rmse})
        if _targets_met({"rmse": val_rmse, "loss": val_loss}, cfg.val_targets):
            break
    return best_path


# ---------------------------------------------------------------------------
# Stage 2: end-to-end watermark network training
# ---------------------------------------------------------------------------


def _load_pretrained_wm(cfg: TrainConfig, init_checkpoint) -> WMNetwork:
    payload = load_checkpoint(init_checkpoint, expected_kind="wm-pretrain")
    wm_cfg = WMConfig.from_dict(payload["config"])
    torch.manual_seed(cfg.seed)
    net = WMNetwork(wm_cfg)
    init_parameters(net)  # embedder/extractor start from scratch
    enc = {k[len("encoder.") :]: v for k, v in payload["state_dict"].items() if k.startswith("encoder.")}
    dec = {k[len("decoder.") :]: v for k, v in payload["state_dict"].items() if k.startswith("decoder.")}
    net.encoder.load_state_dict(enc)
    net.decoder.load_state_dict(dec)
    return net


def train_wm(cfg: TrainConfig, manifest: PairManifest, init_checkpoint, resume: bool = True) -> Path:
    if cfg.stage != "wm":
        raise ConfigurationError(f"train_wm called with stage {cfg.stage!r}")
    _setup(cfg)
    net = _load_pretrained_wm(cfg, init_checkpoint)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)

    clips, covers = evaluate.load_split_arrays(manifest, "train")
    val_clips, val_covers = evaluate.load_split_arrays(manifest, "val")
    clips_t = torch.from_numpy(clips)
    covers_t = torch.from_numpy(covers).permute(0, 3, 1, 2).contiguous()

    ckpt_dir = Path(cfg.checkpoint_dir)
    best_path = ckpt_dir / "wm_best.pt"
    resume_path = ckpt_dir / "wm_resume.pt"
    best_val = float("inf")
    start_epoch = 1

    if resume and resume_path.exists():
        payload = load_checkpoint(resume_path, expected_kind="wm", expected_config=net.cfg.to_dict())
        net.load_state_dict(payload["state_dict"])
        opt.load_state_dict(payload["meta"]["optimizer"])
        start_epoch = payload["meta"]["epoch"] + 1
        best_val = payload["meta"].get("best_val", float("inf"))

    lw = cfg.loss_weights
    if cfg.epochs == 0:
        save_checkpoint(best_path, "wm", net.cfg.to_dict(), net.state_dict(), {"epoch": 0, "seed": cfg.seed})

    for epoch in range(start_epoch, cfg.epochs + 1):
        net.train()
        _set_cosine_lr(opt, cfg.learning_rate, epoch, cfg.epochs)
        tot, ext, fid, cod = [], [], [], []
        for idx in _epoch_batches(len(clips_t), cfg.batch_size, cfg.seed + epoch):
            w = clips_t[idx]
            c = covers_t[idx]
            frames = w.reshape(len(idx), net.cfg.steps, net.cfg.frame_dim)
            code = net.encoder(frames)
            marked = net.embedder(code, c)
            code_hat = net.extractor(marked)
            w_prime = net.decoder(code_hat)
            extract_mse = F.mse_loss(w_prime, w)
            fidelity_mse = F.mse_loss(marked, c)
            # auxiliary code-space term: the clip-space gradient reaching the
            # extractor has to cross the decoder's 128-step recurrence and
            # arrives ~1e-6 at init, which stalls training outright. Matching
            # the extracted code to the (detached) encoder code gives the
            # extractor and embedder a direct signal; with a pretrained
            # decoder, matching codes is matching clips.
            code_mse = F.mse_loss(code_hat, code.detach())
            loss = lw.lambda1 * (extract_mse + code_mse) + lw.lambda2 * fidelity_mse
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.grad_clip)
            opt.step()
            tot.append(float(loss.detach()))
            ext.append(float(extract_mse.detach()))
            fid.append(float(fidelity_mse.detach()))
            cod.append(float(code_mse.detach()))
            _check_finite(tot[-1], "wm", epoch)

        stats = evaluate.evaluate_wm(net, val_clips, val_covers, batch_size=cfg.batch_size)
        val_loss = lw.lambda1 * stats["extract_mse"] + lw.lambda2 * stats["fidelity_mse"]
        _check_finite(val_loss, "wm", epoch)
        _log_row(
            cfg.log_path,
            ["epoch", "train_loss", "val_loss", "train_extract_mse", "train_fidelity_mse", "train_code_mse", "val_rmse", "val_ssim"],
            [epoch, float(np.mean(tot)), val_loss, float(np.mean(ext)), float(np.mean(fid)), float(np.mean(cod)), stats["rmse"], stats["ssim"]],
        )

        if val_loss < best_val:
            best_val = val_loss
            save_checkpoint(
                best_path,
                "wm",
                net.cfg.to_dict(),
                net.state_dict(),
                {"epoch": epoch, "seed": cfg.seed, "val_loss": val_loss, "val_rmse": stats["rmse"], "val_ssim": stats["ssim"]},
            )
        save_checkpoint(
            resume_path,
            "wm",
            net.cfg.to_dict(),
            net.state_dict(),
            {"epoch": epoch, "seed": cfg.seed, "best_val": best_val, "optimizer": opt.state_dict()},
        )
        if _targets_met(stats, cfg.val_targets):
            # targets are judged on the current weights; keep them even if an
            # earlier epoch had lower weighted loss
            save_checkpoint(
                best_path,
                "wm",
                net.cfg.to_dict(),
                net.state_dict(),
                {"epoch": epoch, "seed": cfg.seed, "val_loss": val_loss, "val_rmse": stats["rmse"], "val_ssim": stats["ssim"]},
            )
            break
    if not best_path.exists():
        raise ConfigurationError("wm training produced no checkpoint")
    return best_path


# ---------------------------------------------------------------------------
# Stage 3: similarity network training (encoder frozen)
# ---------------------------------------------------------------------------


def train_similarity(cfg: TrainConfig, train_pairs, encoder_checkpoint, val_pairs) -> Path:
    if cfg.stage != "similarity":
        raise ConfigurationError(f"train_similarity called with stage {cfg.stage!r}")
    _setup(cfg)

    payload = load_checkpoint(encoder_checkpoint)
    enc_state = {k[len("encoder.") :]: v for k, v in payload["state_dict"].items() if k.startswith("encoder.")}
    if not enc_state:
        raise ConfigurationError(f"checkpoint {encoder_checkpoint} holds no encoder parameters")

    sim_cfg = SimConfig(encoder=payload["config"], seed=cfg.seed)
    net = SimilarityNet.build(sim_cfg, enc_state)
    trainable = [p for p in net.parameters() if p.requires_grad]
    opt = torch.optim.Adam(trainable, lr=cfg.learning_rate)

    w1, w2, y = train_pairs if isinstance(train_pairs, tuple) else pairs_to_arrays(train_pairs)
    v1, v2, vy = val_pairs if isinstance(val_pairs, tuple) else pairs_to_arrays(val_pairs)
    w1, w2, y = torch.from_numpy(w1), torch.from_numpy(w2), torch.from_numpy(y)
    v1, v2, vy = torch.from_numpy(v1), torch.from_numpy(v2), torch.from_numpy(vy)

    best_path = Path(cfg.checkpoint_dir) / "similarity_best.pt"
    meta_base = {"seed": cfg.seed, "encoder_hash": state_hash(enc_state), "encoder_checkpoint": str(encoder_checkpoint)}
    best_acc = -1.0
    if cfg.epochs == 0:
        save_checkpoint(best_path, "similarity", sim_cfg.to_dict(), net.state_dict(), {**meta_base, "epoch": 0})

    for epoch in range(1, cfg.epochs + 1):
        net.train()
        _set_cosine_lr(opt, cfg.learning_rate, epoch, cfg.epochs)
        losses = []
        for idx in _epoch_batches(len(y), cfg.batch_size, cfg.seed + epoch):
            scores = net(w1[idx], w2[idx])
            if not torch.isfinite(scores).all():
                raise TrainingDivergedError(f"similarity training diverged at epoch {epoch}: non-finite scores")
            loss = F.binary_cross_entropy(scores.clamp(1e-7, 1 - 1e-7), y[idx])
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(trainable, cfg.grad_clip)
            opt.step()
            losses.append(float(loss.detach()))
            _check_finite(losses[-1], "similarity", epoch)

        net.eval()
        val_losses, correct = [], 0
        with torch.no_grad():
            for start in range(0, len(vy), cfg.batch_size):
                sl = slice(start, start + cfg.batch_size)
                scores = net(v1[sl], v2[sl])
                val_losses.append(float(F.binary_cross_entropy(scores.clamp(1e-7, 1 - 1e-7), vy[sl])) * len(vy[sl]))
                correct += int(((scores >= 0.5).float() == vy[sl]).sum())
        val_loss = float(np.sum(val_losses) / len(vy))
        val_acc = correct / len(vy)
        _check_finite(val_loss, "similarity", epoch)
        _log_row(cfg.log_path, ["epoch", "train_loss", "val_loss", "val_acc"], [epoch, float(np.mean(losses)), val_loss, val_acc])

        if val_acc > best_acc:
            best_acc = val_acc
            save_checkpoint(
                best_path,
                "similarity",
                sim_cfg.to_dict(),
                net.state_dict(),
                {**meta_base, "epoch": epoch, "val_loss": val_loss, "val_acc": val_acc},
            )
        if _targets_met({"acc": val_acc, "loss": val_loss}, cfg.val_targets):
            break
    return best_path


def load_wm_network(checkpoint_path) -> WMNetwork:
    payload = load_checkpoint(checkpoint_path)
    if payload["kind"] not in ("wm", "wm-pretrain"):
        raise ConfigurationError(f"{checkpoint_path} is not a watermark-network checkpoint")
    net = WMNetwork(WMConfig.from_dict(payload["config"]))
    net.load_state_dict(payload["state_dict"])
    net.eval()
    return net


def load_similarity_network(checkpoint_path) -> SimilarityNet:
    payload = load_checkpoint(checkpoint_path, expected_kind="similarity")
    net = SimilarityNet(SimConfig.from_dict(payload["config"]))
    net.load_state_dict(payload["state_dict"])
    for p in net.encoder.parameters():
        p.requires_grad_(False)
    net.eval()
    return net
