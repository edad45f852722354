"""Command-line surface: dataset building, the three training stages,
embed/extract/verify, robustness sweeps, and the ablation table.

Exit codes: 0 on success; verify returns 0 for "same", 1 for "different",
and >= 2 on errors; every other command returns 1 on error.
"""

import argparse
import sys
from pathlib import Path

from . import datasets, evaluate, media_io, metrics, networks, training
from .distortions import DistortionSpec
from .metrics import LossWeights
from .pipeline import PROFILES
from .similarity import classify, similarity


def _train_common(p: argparse.ArgumentParser, default_epochs: int):
    p.add_argument("--epochs", type=int, default=default_epochs)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-dir", default="checkpoints")
    p.add_argument("--log", default=None, help="learning-curve CSV path (default <checkpoint-dir>/<stage>.csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonomark", description="Audio-in-image watermarking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-manifest", help="sample audio-image pairs into a manifest")
    p.add_argument("--image-dir", required=True)
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--sizes", default=None, help="train,val,test counts (default from --profile)")
    p.add_argument("--profile", default="small", choices=sorted(PROFILES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("pretrain", help="pretrain the encoder-decoder reconstruction")
    p.add_argument("--manifest", required=True)
    _train_common(p, 50)

    p = sub.add_parser("train-wm", help="train the full watermark network end to end")
    p.add_argument("--manifest", required=True)
    p.add_argument("--init", required=True, help="pretraining checkpoint")
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--lambda2", type=float, default=1.0)
    p.add_argument("--target-ssim", type=float, default=None)
    p.add_argument("--target-rmse", type=float, default=None)
    _train_common(p, 200)

    p = sub.add_parser("build-pairs", help="generate labeled audio-audio similarity pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--wm-ckpt", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", default="train", choices=datasets.SPLITS)
    p.add_argument("--n-pairs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train-sim", help="train the similarity network on pair files")
    p.add_argument("--pairs", required=True, help="pairs.tsv produced by build-pairs")
    p.add_argument("--val-pairs", required=True)
    p.add_argument("--encoder-ckpt", required=True, help="checkpoint providing the frozen encoder")
    p.add_argument("--target-acc", type=float, default=None)
    _train_common(p, 100)

    p = sub.add_parser("embed", help="embed an audio watermark into a cover image")
    p.add_argument("audio")
    p.add_argument("image")
    p.add_argument("wm_ckpt")
    p.add_argument("out_image")

    p = sub.add_parser("extract", help="blindly extract the watermark from a marked image")
    p.add_argument("image")
    p.add_argument("wm_ckpt")
    p.add_argument("out_audio")

    p = sub.add_parser("verify", help="score whether two clips carry the same watermark")
    p.add_argument("audio1")
    p.add_argument("audio2")
    p.add_argument("sim_ckpt")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("sweep", help="robustness sweep: accuracy and RMSE vs distortion parameter")
    p.add_argument("--attack", required=True, choices=("cutout", "rotation"))
    p.add_argument("--grid", required=True, help="comma-separated parameter values")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--manifest", required=True)
    p.add_argument("--wm-ckpt", required=True)
    p.add_argument("--sim-ckpt", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--split", default="test", choices=datasets.SPLITS)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablation", help="per-pair RMSE vs similarity score on noisy extractions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--wm-ckpt", required=True)
    p.add_argument("--sim-ckpt", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--n-pairs", type=int, default=40)
    p.add_argument("--split", default="test", choices=datasets.SPLITS)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _log_path(args, stage):
    return args.log or str(Path(args.checkpoint_dir) / f"{stage}.csv")


def _cmd_build_manifest(args) -> int:
    if args.sizes:
        sizes = tuple(int(s) for s in args.sizes.split(","))
    else:
        sizes = PROFILES[args.profile].sizes
    manifest = datasets.build_manifest(args.image_dir, args.audio_dir, sizes, seed=args.seed)
    manifest.save(args.out)
    print(f"wrote {args.out}: {manifest.counts()}")
    return 0


def _cmd_pretrain(args) -> int:
    cfg = training.TrainConfig(
        stage="pretrain",
        epochs=args.epochs,
        checkpoint_dir=args.checkpoint_dir,
        log_path=_log_path(args, "pretrain"),
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
    )
    path = training.pretrain_encoder_decoder(cfg, datasets.PairManifest.load(args.manifest))
    print(f"saved {path}")
    return 0


def _cmd_train_wm(args) -> int:
    targets = {}
    if args.target_ssim is not None:
        targets["ssim"] = args.target_ssim
    if args.target_rmse is not None:
        targets["rmse"] = args.target_rmse
    cfg = training.TrainConfig(
        stage="wm",
        epochs=args.epochs,
        checkpoint_dir=args.checkpoint_dir,
        log_path=_log_path(args, "wm"),
        batch_size=args.batch_size,
        learning_rate=args.lr,
        loss_weights=LossWeights(args.lambda1, args.lambda2),
        seed=args.seed,
        val_targets=targets or None,
    )
    path = training.train_wm(cfg, datasets.PairManifest.load(args.manifest), args.init)
    print(f"saved {path}")
    return 0


def _cmd_build_pairs(args) -> int:
    wm = training.load_wm_network(args.wm_ckpt)
    manifest = datasets.PairManifest.load(args.manifest)
    pairs = datasets.build_similarity_pairs(manifest, wm, seed=args.seed, split=args.split, n_pairs=args.n_pairs)
    index = datasets.write_pair_files(pairs, args.out_dir)
    print(f"wrote {index} ({len(pairs)} pairs)")
    return 0


def _cmd_train_sim(args) -> int:
    targets = {"acc": args.target_acc} if args.target_acc is not None else None
    cfg = training.TrainConfig(
        stage="similarity",
        epochs=args.epochs,
        checkpoint_dir=args.checkpoint_dir,
        log_path=_log_path(args, "similarity"),
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        val_targets=targets,
    )
    train_pairs = datasets.load_pair_files(args.pairs)
    val_pairs = datasets.load_pair_files(args.val_pairs)
    path = training.train_similarity(cfg, train_pairs, args.encoder_ckpt, val_pairs)
    print(f"saved {path}")
    return 0


def _cmd_embed(args) -> int:
    wm = training.load_wm_network(args.wm_ckpt)
    clip = media_io.load_audio(args.audio)
    cover = media_io.load_image(args.image)
    code = networks.encode(wm, media_io.reshape_audio(clip))
    marked = networks.embed(wm, code, cover)
    media_io.save_image(marked, args.out_image)
    print(f"{metrics.ssim(cover, marked):.6f}")
    return 0


def _cmd_extract(args) -> int:
    wm = training.load_wm_network(args.wm_ckpt)
    marked = media_io.load_image(args.image)
    code = networks.extract(wm, marked)
    clip = networks.decode(wm, code)
    media_io.save_audio(clip, args.out_audio)
    print(f"wrote {args.out_audio}")
    return 0


def _cmd_verify(args) -> int:
    sim = training.load_similarity_network(args.sim_ckpt)
    w1 = media_io.load_audio(args.audio1)
    w2 = media_io.load_audio(args.audio2)
    score = similarity(sim, w1, w2)
    same = classify(score, args.threshold)
    print(f"score={score:.6f} verdict={'same' if same else 'different'}")
    return 0 if same else 1


def _cmd_sweep(args) -> int:
    wm = training.load_wm_network(args.wm_ckpt)
    sim = training.load_similarity_network(args.sim_ckpt)
    manifest = datasets.PairManifest.load(args.manifest)
    grid = tuple(float(v) for v in args.grid.split(","))
    cfg = evaluate.SweepConfig(attack=args.attack, grid=grid, trials_per_point=args.trials, seeds=(args.seed,))
    report = evaluate.run_sweep(wm, sim, manifest, cfg, out_csv=args.out_csv, split=args.split, threshold=args.threshold, seed=args.seed)
    for row in report.rows:
        print(f"{row['attack']} {row['parameter']:g}: acc={row['similarity_accuracy']:.3f} rmse={row['mean_rmse']:.4f}")
    return 0


def _cmd_ablation(args) -> int:
    wm = training.load_wm_network(args.wm_ckpt)
    sim = training.load_similarity_network(args.sim_ckpt)
    manifest = datasets.PairManifest.load(args.manifest)
    rows = evaluate.run_ablation(wm, sim, manifest, args.out_csv, n_pairs=args.n_pairs, split=args.split, seed=args.seed)
    print(f"wrote {args.out_csv} ({len(rows)} pairs)")
    return 0


_COMMANDS = {
    "build-manifest": _cmd_build_manifest,
    "pretrain": _cmd_pretrain,
    "train-wm": _cmd_train_wm,
    "build-pairs": _cmd_build_pairs,
    "train-sim": _cmd_train_sim,
    "embed": _cmd_embed,
    "extract": _cmd_extract,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
    "ablation": _cmd_ablation,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    error_code = 2 if args.command == "verify" else 1
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return error_code


if __name__ == "__main__":
    sys.exit(main())
