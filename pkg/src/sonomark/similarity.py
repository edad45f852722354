"""Siamese similarity verifier for (watermark, extraction) audio pairs.

Each clip is reshaped into frames and passed through a frozen pretrained
encoder; the resulting 128x128x1 feature maps go through weight-shared
convolution + max-pool blocks down to 8x8x256, are flattened to 16384 and
projected to 4096. The absolute difference of the two 4096-vectors feeds a
single sigmoid unit producing a [0, 1] similarity score, symmetric in its
arguments by construction.
"""

from dataclasses import dataclass, asdict

import numpy as np
import torch
from torch import nn

from .errors import InvalidInputError
from .media_io import AUDIO_LEN
from .networks import EncoderNet, WMConfig, init_parameters


@dataclass(frozen=True)
class SimConfig:
    twin_filters: tuple = (32, 64, 128, 256)
    head_units: int = 4096
    encoder: dict | None = None  # WMConfig dict of the frozen encoder
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["twin_filters"] = list(d["twin_filters"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        d["twin_filters"] = tuple(d["twin_filters"])
        return cls(**d)


class SimilarityNet(nn.Module):
    def __init__(self, cfg: SimConfig | None = None):
        super().__init__()
        self.cfg = cfg or SimConfig()
        enc_cfg = WMConfig.from_dict(self.cfg.encoder) if self.cfg.encoder else WMConfig()
        self.encoder = EncoderNet(enc_cfg)
        for p in self.encoder.parameters():
            p.requires_grad_(False)

        blocks = []
        cin = 1
        for c in self.cfg.twin_filters:
            blocks += [nn.Conv2d(cin, c, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2)]
            cin = c
        self.twin = nn.Sequential(*blocks)
        side = enc_cfg.img_size // (2 ** len(self.cfg.twin_filters))
        self.head = nn.Linear(side * side * self.cfg.twin_filters[-1], self.cfg.head_units)
        self.readout = nn.Linear(self.cfg.head_units, 1)

    @classmethod
    def build(cls, cfg: SimConfig | None = None, encoder_state: dict | None = None) -> "SimilarityNet":
        cfg = cfg or SimConfig()
        torch.manual_seed(cfg.seed)
        net = cls(cfg)
        init_parameters(net.twin)
        init_parameters(net.head)
        init_parameters(net.readout)
        if encoder_state is not None:
            net.load_encoder(encoder_state)
        return net

    def load_encoder(self, encoder_state: dict) -> None:
        """Install pretrained (frozen) encoder weights."""
        self.encoder.load_state_dict(encoder_state)
        for p in self.encoder.parameters():
            p.requires_grad_(False)

    def branch(self, clips: torch.Tensor) -> torch.Tensor:
        """(B, 8192) clips -> (B, 4096) features through the shared branch."""
        if clips.dim() != 2 or clips.shape[1] != AUDIO_LEN:
            raise InvalidInputError(f"similarity branch expects (B, {AUDIO_LEN}), got {tuple(clips.shape)}")
        cfg = self.encoder.cfg
        frames = clips.reshape(clips.shape[0], cfg.steps, cfg.frame_dim)
        with torch.no_grad():
            code = self.encoder(frames)
        feat = self.twin(code)
        return self.head(feat.flatten(1))

    def forward(self, w1: torch.Tensor, w2: torch.Tensor) -> torch.Tensor:
        """Similarity scores in (0, 1) for a batch of clip pairs."""
        diff = torch.abs(self.branch(w1) - self.branch(w2))
        return torch.sigmoid(self.readout(diff)).squeeze(1)


def similarity(net: SimilarityNet, w1: np.ndarray, w2: np.ndarray) -> float:
    """Score one pair of 8192-sample clips."""
    w1 = np.asarray(w1, dtype=np.float32)
    w2 = np.asarray(w2, dtype=np.float32)
    if w1.shape != (AUDIO_LEN,) or w2.shape != (AUDIO_LEN,):
        raise InvalidInputError(f"expected two {AUDIO_LEN}-sample clips, got {w1.shape} and {w2.shape}")
    with torch.no_grad():
        score = net(torch.from_numpy(w1).unsqueeze(0), torch.from_numpy(w2).unsqueeze(0))
    return float(score[0])


def classify(score: float, threshold: float = 0.5) -> bool:
    """True iff the pair is judged "same" at the given threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInputError(f"threshold {threshold} outside [0, 1]")
    return bool(score >= threshold)
