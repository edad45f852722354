"""The watermarking network: Encoder, Embedder, Extractor, and Decoder Nets.

Trained as a single network; modularized here for clarity. Audio enters as
128x64 frame matrices, is encoded into a 128x128x1 code, embedded into a
128x128x3 cover image, blindly extracted back to a code, and decoded to an
8192-sample clip. All convolutions are 3x3, stride 1, "same" padding, so the
128x128 spatial size is preserved end to end.
"""

from dataclasses import dataclass, asdict, field

import numpy as np
import torch
from torch import nn

from .errors import InvalidInputError
from .media_io import AUDIO_LEN, FRAME_DIM, FRAME_STEPS, IMG_SIZE


@dataclass(frozen=True)
class WMConfig:
    frame_dim: int = FRAME_DIM
    steps: int = FRAME_STEPS
    hidden: int = 128
    img_size: int = IMG_SIZE
    embed_in_filters: tuple = (8, 16, 32, 64)
    fc_units: int = 512
    embed_out_filters: tuple = (128, 64, 32, 16, 8, 4, 3)
    extract_in_filters: tuple = (8, 16, 32, 64)
    extract_out_filters: tuple = (128, 64, 32, 16, 8, 4, 1)
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WMConfig":
        d = dict(d)
        for k in ("embed_in_filters", "embed_out_filters", "extract_in_filters", "extract_out_filters"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


class ChannelwiseFC(nn.Module):
    """Shared per-position dense map mixing the channel dimension.

    Every spatial position's channel vector goes through one shared affine
    map, i.e. a 1x1-receptive-field dense layer.
    """

    def __init__(self, in_channels: int, units: int):
        super().__init__()
        self.mix = nn.Conv2d(in_channels, units, kernel_size=1)

    def forward(self, x):
        return self.mix(x)


def conv_stack(in_channels: int, filters, final_activation: nn.Module | None = nn.ReLU()) -> nn.Sequential:
    """3x3/stride-1/same-padding convolutions with ReLU between layers."""
    layers = []
    cin = in_channels
    for i, c in enumerate(filters):
        layers.append(nn.Conv2d(cin, c, kernel_size=3, padding=1))
        last = i == len(filters) - 1
        if not last:
            layers.append(nn.ReLU())
        elif final_activation is not None:
            layers.append(final_activation)
        cin = c
    return nn.Sequential(*layers)


class SkipBlock(nn.Module):
    """Two convolutions bridged by an additive skip with a 1x1 projection."""

    def __init__(self, in_channels: int, mid_channels: int, out_channels: int):
        super().__init__()
        self.main = nn.Sequential(
            nn.Conv2d(in_channels, mid_channels, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(mid_channels, out_channels, 3, padding=1),
        )
        self.proj = nn.Conv2d(in_channels, out_channels, kernel_size=1)
        self.act = nn.ReLU()

    def forward(self, x):
        return self.act(self.main(x) + self.proj(x))


class EncoderNet(nn.Module):
    """Two stacked LSTM layers mapping 128x64 frames to a 128x128x1 code."""

    def __init__(self, cfg: WMConfig):
        super().__init__()
        self.cfg = cfg
        self.lstm = nn.LSTM(cfg.frame_dim, cfg.hidden, num_layers=2, batch_first=True)

    def forward(self, frames):
        if frames.dim() != 3 or frames.shape[1:] != (self.cfg.steps, self.cfg.frame_dim):
            raise InvalidInputError(f"encoder expects (B, {self.cfg.steps}, {self.cfg.frame_dim}), got {tuple(frames.shape)}")
        out, _ = self.lstm(frames)  # zero initial states
        return out.unsqueeze(1)  # (B, 1, steps, hidden)


class DecoderNet(nn.Module):
    """Mirror of the encoder: code -> two LSTM layers -> per-step projection to frames."""

    def __init__(self, cfg: WMConfig):
        super().__init__()
        self.cfg = cfg
        self.lstm = nn.LSTM(cfg.hidden, cfg.hidden, num_layers=2, batch_first=True)
        self.proj = nn.Linear(cfg.hidden, cfg.frame_dim)

    def forward(self, code):
        if code.dim() != 4 or code.shape[1:] != (1, self.cfg.steps, self.cfg.hidden):
            raise InvalidInputError(f"decoder expects (B, 1, {self.cfg.steps}, {self.cfg.hidden}), got {tuple(code.shape)}")
        out, _ = self.lstm(code.squeeze(1))
        frames = torch.tanh(self.proj(out))  # bound samples to [-1, 1]
        return frames.reshape(frames.shape[0], self.cfg.steps * self.cfg.frame_dim)


class EmbedderNet(nn.Module):
    """Hides a watermark code inside a cover image.

    Code and cover pass through separate (non-weight-shared) convolution
    stacks, are concatenated along channels, mixed by a channel-wise FC
    layer, and squashed back to a 3-channel image in [0, 1].
    """

    def __init__(self, cfg: WMConfig):
        super().__init__()
        self.cfg = cfg
        self.code_stack = conv_stack(1, cfg.embed_in_filters)
        self.cover_stack = conv_stack(3, cfg.embed_in_filters)
        self.fc = ChannelwiseFC(2 * cfg.embed_in_filters[-1], cfg.fc_units)
        self.out_stack = conv_stack(cfg.fc_units, cfg.embed_out_filters, final_activation=nn.Sigmoid())

    def forward(self, code, cover):
        if code.shape[1:] != (1, self.cfg.img_size, self.cfg.img_size):
            raise InvalidInputError(f"embedder code must be (B, 1, {self.cfg.img_size}, {self.cfg.img_size}), got {tuple(code.shape)}")
        if cover.shape[1:] != (3, self.cfg.img_size, self.cfg.img_size):
            raise InvalidInputError(f"embedder cover must be (B, 3, {self.cfg.img_size}, {self.cfg.img_size}), got {tuple(cover.shape)}")
        feats = torch.cat([self.code_stack(code), self.cover_stack(cover)], dim=1)
        mixed = torch.relu(self.fc(feats))
        return self.out_stack(mixed)


class ExtractorNet(nn.Module):
    """Blindly recovers the watermark code from a marked image.

    Convolution stacks around a 512-unit channel-wise FC layer, with two
    additive skip connections (one per stack) and a final linear 1-filter
    convolution.
    """

    def __init__(self, cfg: WMConfig):
        super().__init__()
        self.cfg = cfg
        f_in = cfg.extract_in_filters
        f_out = cfg.extract_out_filters
        self.conv_in = nn.Sequential(nn.Conv2d(3, f_in[0], 3, padding=1), nn.ReLU())
        self.skip_in = SkipBlock(f_in[0], f_in[1], f_in[2])
        self.conv_pre_fc = nn.Sequential(nn.Conv2d(f_in[2], f_in[3], 3, padding=1), nn.ReLU())
        self.fc = ChannelwiseFC(f_in[3], cfg.fc_units)
        self.conv_post_fc = nn.Sequential(nn.Conv2d(cfg.fc_units, f_out[0], 3, padding=1), nn.ReLU())
        self.skip_out = SkipBlock(f_out[0], f_out[1], f_out[2])
        self.conv_out = conv_stack(f_out[2], f_out[3:], final_activation=None)

    def forward(self, marked):
        if marked.shape[1:] != (3, self.cfg.img_size, self.cfg.img_size):
            raise InvalidInputError(f"extractor expects (B, 3, {self.cfg.img_size}, {self.cfg.img_size}), got {tuple(marked.shape)}")
        x = self.conv_in(marked)
        x = self.skip_in(x)
        x = self.conv_pre_fc(x)
        x = torch.relu(self.fc(x))
        x = self.conv_post_fc(x)
        x = self.skip_out(x)
        return self.conv_out(x)


class WMNetwork(nn.Module):
    """End-to-end differentiable chain: encode -> embed -> extract -> decode."""

    def __init__(self, cfg: WMConfig | None = None):
        super().__init__()
        self.cfg = cfg or WMConfig()
        self.encoder = EncoderNet(self.cfg)
        self.embedder = EmbedderNet(self.cfg)
        self.extractor = ExtractorNet(self.cfg)
        self.decoder = DecoderNet(self.cfg)

    @classmethod
    def build(cls, cfg: WMConfig | None = None) -> "WMNetwork":
        """Construct with the pinned, seedable initialization scheme."""
        cfg = cfg or WMConfig()
        torch.manual_seed(cfg.seed)
        net = cls(cfg)
        init_parameters(net)
        return net

    def forward(self, frames, cover):
        code = self.encoder(frames)
        marked = self.embedder(code, cover)
        code_prime = self.extractor(marked)
        clip_prime = self.decoder(code_prime)
        return marked, clip_prime


def init_parameters(module: nn.Module) -> None:
    """Variance-preserving uniform for conv/affine weights, orthogonal
    recurrent kernels, zero biases. Deterministic given the torch RNG state.

    The relu-gain scaling matters here: the embedder and extractor stack
    seven relu convolutions, and a plain 1/sqrt(fan_in) bound attenuates
    activations by ~2.4x per layer, leaving the marked image constant at
    sigmoid(0) and the whole chain without usable gradients."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_uniform_(m.weight, nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.LSTM):
            for name, p in m.named_parameters():
                if name.startswith("weight_ih"):
                    bound = 1.0 / np.sqrt(p.shape[1])
                    nn.init.uniform_(p, -bound, bound)
                elif name.startswith("weight_hh"):
                    hidden = p.shape[1]
                    for gate in range(4):  # one orthogonal block per gate
                        nn.init.orthogonal_(p.data[gate * hidden : (gate + 1) * hidden])
                elif name.startswith("bias"):
                    nn.init.zeros_(p)


# ---------------------------------------------------------------------------
# Single-sample numpy-facing wrappers around a WMNetwork.
# ---------------------------------------------------------------------------


def _to_tensor(x, net: nn.Module):
    p = next(net.parameters())
    return torch.as_tensor(np.asarray(x), dtype=p.dtype, device=p.device)


def encode(net: WMNetwork, frames: np.ndarray) -> np.ndarray:
    """128x64 frame matrix -> 128x128x1 watermark code."""
    frames = np.asarray(frames, dtype=np.float32)
    if frames.shape != (net.cfg.steps, net.cfg.frame_dim):
        raise InvalidInputError(f"expected {net.cfg.steps}x{net.cfg.frame_dim} frames, got {frames.shape}")
    with torch.no_grad():
        code = net.encoder(_to_tensor(frames, net).unsqueeze(0))
    return code[0, 0].cpu().numpy().astype(np.float32)[:, :, None]


def decode(net: WMNetwork, code: np.ndarray) -> np.ndarray:
    """128x128x1 watermark code -> 8192-sample clip in [-1, 1]."""
    code = np.asarray(code, dtype=np.float32)
    if code.shape != (net.cfg.steps, net.cfg.hidden, 1):
        raise InvalidInputError(f"expected {net.cfg.steps}x{net.cfg.hidden}x1 code, got {code.shape}")
    with torch.no_grad():
        clip = net.decoder(_to_tensor(code[:, :, 0], net).unsqueeze(0).unsqueeze(0))
    return clip[0].cpu().numpy().astype(np.float32)


def embed(net: WMNetwork, code: np.ndarray, cover: np.ndarray) -> np.ndarray:
    """Watermark code + cover image -> marked image (HWC in [0, 1])."""
    code = np.asarray(code, dtype=np.float32)
    cover = np.asarray(cover, dtype=np.float32)
    if code.shape != (net.cfg.steps, net.cfg.hidden, 1):
        raise InvalidInputError(f"expected {net.cfg.steps}x{net.cfg.hidden}x1 code, got {code.shape}")
    if cover.shape != (net.cfg.img_size, net.cfg.img_size, 3):
        raise InvalidInputError(f"expected {net.cfg.img_size}x{net.cfg.img_size}x3 cover, got {cover.shape}")
    with torch.no_grad():
        marked = net.embedder(
            _to_tensor(code[:, :, 0], net).unsqueeze(0).unsqueeze(0),
            _to_tensor(cover, net).permute(2, 0, 1).unsqueeze(0),
        )
    return marked[0].permute(1, 2, 0).cpu().numpy().astype(np.float32)


def extract(net: WMNetwork, marked: np.ndarray) -> np.ndarray:
    """Marked image (HWC) -> extracted watermark code; blind (no cover needed)."""
    marked = np.asarray(marked, dtype=np.float32)
    if marked.shape != (net.cfg.img_size, net.cfg.img_size, 3):
        raise InvalidInputError(f"expected {net.cfg.img_size}x{net.cfg.img_size}x3 image, got {marked.shape}")
    with torch.no_grad():
        code = net.extractor(_to_tensor(marked, net).permute(2, 0, 1).unsqueeze(0))
    return code[0, 0].cpu().numpy().astype(np.float32)[:, :, None]


def wm_forward(net: WMNetwork, clip: np.ndarray, cover: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full chain on one (clip, cover) pair: returns (marked image, extracted clip)."""
    clip = np.asarray(clip, dtype=np.float32)
    if clip.shape != (AUDIO_LEN,):
        raise InvalidInputError(f"expected {AUDIO_LEN}-sample clip, got {clip.shape}")
    frames = clip.reshape(net.cfg.steps, net.cfg.frame_dim)
    code = encode(net, frames)
    marked = embed(net, code, cover)
    code_prime = extract(net, marked)
    return marked, decode(net, code_prime)
