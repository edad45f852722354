import numpy as np
import pytest
import torch

from sonomark.checkpoints import load_checkpoint, save_checkpoint, state_hash
from sonomark.errors import ConfigurationError, InvalidInputError
from sonomark.networks import (
    ChannelwiseFC,
    SkipBlock,
    WMConfig,
    WMNetwork,
    decode,
    embed,
    encode,
    extract,
    wm_forward,
)

from conftest import random_clip, random_image


class TestShapes:
    """Every intermediate tensor shape of the watermarking chain, asserted on
    random inputs (including the hidden 128-channel concat and 512-channel FC
    activations inside the embedder, grabbed via forward hooks)."""

    def test_encoder(self, wm_net):
        frames = torch.randn(2, 128, 64)
        assert wm_net.encoder(frames).shape == (2, 1, 128, 128)

    def test_decoder(self, wm_net):
        code = torch.randn(2, 1, 128, 128)
        out = wm_net.decoder(code)
        assert out.shape == (2, 8192)
        assert out.abs().max() <= 1.0  # tanh output

    def test_embedder_with_internal_activations(self, wm_net):
        code = torch.randn(2, 1, 128, 128)
        cover = torch.rand(2, 3, 128, 128)
        captured = {}
        h1 = wm_net.embedder.fc.register_forward_hook(
            lambda m, inp, out: captured.update(concat=inp[0].shape, fc=out.shape)
        )
        try:
            marked = wm_net.embedder(code, cover)
        finally:
            h1.remove()
        assert captured["concat"] == (2, 128, 128, 128)  # 64 code + 64 cover channels
        assert captured["fc"] == (2, 512, 128, 128)
        assert marked.shape == (2, 3, 128, 128)
        assert marked.min() >= 0.0 and marked.max() <= 1.0  # sigmoid output

    def test_extractor_with_internal_activations(self, wm_net):
        marked = torch.rand(2, 3, 128, 128)
        captured = {}
        h = wm_net.extractor.fc.register_forward_hook(
            lambda m, inp, out: captured.update(fc=out.shape)
        )
        try:
            code = wm_net.extractor(marked)
        finally:
            h.remove()
        assert captured["fc"] == (2, 512, 128, 128)
        assert code.shape == (2, 1, 128, 128)

    def test_full_chain(self, wm_net):
        frames = torch.randn(1, 128, 64)
        cover = torch.rand(1, 3, 128, 128)
        marked, clip = wm_net(frames, cover)
        assert marked.shape == (1, 3, 128, 128)
        assert clip.shape == (1, 8192)

    def test_shape_errors(self, wm_net):
        with pytest.raises(InvalidInputError):
            wm_net.encoder(torch.randn(1, 64, 128))
        with pytest.raises(InvalidInputError):
            wm_net.decoder(torch.randn(1, 1, 128, 64))
        with pytest.raises(InvalidInputError):
            wm_net.embedder(torch.randn(1, 1, 64, 64), torch.rand(1, 3, 128, 128))
        with pytest.raises(InvalidInputError):
            wm_net.extractor(torch.rand(1, 1, 128, 128))


class TestBuildingBlocks:
    def test_channelwise_fc_is_shared_across_positions(self):
        torch.manual_seed(0)
        fc = ChannelwiseFC(3, 5)
        x = torch.randn(1, 3, 4, 4)
        out = fc(x)
        assert out.shape == (1, 5, 4, 4)
        # the same affine map must act at every spatial position
        w = fc.mix.weight[:, :, 0, 0]
        b = fc.mix.bias
        for i in range(4):
            for j in range(4):
                expected = w @ x[0, :, i, j] + b
                assert torch.allclose(out[0, :, i, j], expected, atol=1e-6)

    def test_channelwise_fc_single_position_oracle(self):
        fc = ChannelwiseFC(3, 2)
        with torch.no_grad():
            fc.mix.weight.copy_(torch.tensor([[1.0, 2.0, 3.0], [0.0, -1.0, 1.0]]).reshape(2, 3, 1, 1))
            fc.mix.bias.copy_(torch.tensor([0.5, -0.5]))
        x = torch.tensor([1.0, 10.0, 100.0]).reshape(1, 3, 1, 1)
        out = fc(x).reshape(2)
        assert torch.allclose(out, torch.tensor([321.5, 89.5]))

    def test_skip_block_additive_path(self):
        torch.manual_seed(1)
        blk = SkipBlock(4, 6, 8)
        x = torch.randn(2, 4, 16, 16)
        # zero the main branch: the block must reduce to relu(proj(x))
        with torch.no_grad():
            for m in blk.main.modules():
                if isinstance(m, torch.nn.Conv2d):
                    m.weight.zero_()
                    m.bias.zero_()
        assert torch.allclose(blk(x), torch.relu(blk.proj(x)), atol=1e-6)

    def test_embedder_stacks_not_weight_shared(self, wm_net):
        code_w = wm_net.embedder.code_stack[0].weight
        cover_w = wm_net.embedder.cover_stack[0].weight
        assert code_w.shape[1] == 1 and cover_w.shape[1] == 3
        assert code_w.data_ptr() != cover_w.data_ptr()


class TestDeterminismAndInit:
    def test_build_is_seed_deterministic(self):
        a = WMNetwork.build(WMConfig(seed=7))
        b = WMNetwork.build(WMConfig(seed=7))
        for (ka, pa), (kb, pb) in zip(a.state_dict().items(), b.state_dict().items()):
            assert ka == kb
            assert torch.equal(pa, pb)

    def test_different_seeds_differ(self):
        a = WMNetwork.build(WMConfig(seed=1))
        b = WMNetwork.build(WMConfig(seed=2))
        assert not torch.equal(a.embedder.fc.mix.weight, b.embedder.fc.mix.weight)

    def test_biases_start_at_zero(self, wm_net):
        for name, p in wm_net.named_parameters():
            if "bias" in name:
                assert torch.count_nonzero(p) == 0, name

    def test_recurrent_weights_orthogonal_per_gate(self, wm_net):
        w = wm_net.encoder.lstm.weight_hh_l0
        hidden = w.shape[1]
        for gate in range(4):
            block = w[gate * hidden : (gate + 1) * hidden]
            eye = block @ block.T
            assert torch.allclose(eye, torch.eye(hidden), atol=1e-5)

    def test_zero_weights_give_zero_code(self):
        net = WMNetwork(WMConfig())
        with torch.no_grad():
            for p in net.encoder.parameters():
                p.zero_()
        code = net.encoder(torch.randn(1, 128, 64))
        assert torch.count_nonzero(code) == 0

    def test_forward_deterministic_in_eval(self, wm_net, rng):
        frames = torch.from_numpy(random_clip(rng).reshape(1, 128, 64))
        cover = torch.from_numpy(random_image(rng)).permute(2, 0, 1).unsqueeze(0)
        with torch.no_grad():
            m1, c1 = wm_net(frames, cover)
            m2, c2 = wm_net(frames, cover)
        assert torch.equal(m1, m2) and torch.equal(c1, c2)


class TestGradients:
    def test_all_parameters_receive_gradient(self, rng):
        net = WMNetwork.build(WMConfig(seed=3))
        frames = torch.from_numpy(random_clip(rng).reshape(1, 128, 64))
        cover = torch.from_numpy(random_image(rng)).permute(2, 0, 1).unsqueeze(0)
        marked, clip = net(frames, cover)
        loss = ((clip - frames.reshape(1, -1)) ** 2).mean() + ((marked - cover) ** 2).mean()
        loss.backward()
        for name, p in net.named_parameters():
            assert p.grad is not None, name
            assert torch.count_nonzero(p.grad) > 0, f"zero gradient for {name}"

    def test_finite_difference_gradient_sample(self, rng):
        # a handful of coordinates across modules, checked at 64-bit precision
        net = WMNetwork.build(WMConfig(seed=4)).double()
        frames = torch.from_numpy(random_clip(rng).reshape(1, 128, 64)).double()
        cover = torch.from_numpy(random_image(rng)).double().permute(2, 0, 1).unsqueeze(0)

        def loss_value():
            marked, clip = net(frames, cover)
            return ((clip - frames.reshape(1, -1)) ** 2).mean() + ((marked - cover) ** 2).mean()

        loss = loss_value()
        loss.backward()

        picks = [
            ("encoder.lstm.weight_ih_l0", (5, 7)),
            ("decoder.proj.weight", (3, 11)),
            ("embedder.fc.mix.weight", (100, 50, 0, 0)),
            ("extractor.conv_in.0.weight", (2, 1, 1, 1)),
            ("extractor.skip_out.proj.weight", (10, 20, 0, 0)),
            ("embedder.out_stack.0.weight", (60, 300, 2, 2)),
        ]
        params = dict(net.named_parameters())
        h = 1e-6
        for name, idx in picks:
            p = params[name]
            analytic = float(p.grad[idx])
            with torch.no_grad():
                orig = float(p[idx])
                p[idx] = orig + h
                up = float(loss_value())
                p[idx] = orig - h
                down = float(loss_value())
                p[idx] = orig
            fd = (up - down) / (2 * h)
            # absolute floor covers coordinates whose gradient is itself at
            # the finite-difference noise level
            assert abs(fd - analytic) <= 1e-3 * abs(analytic) + 1e-9, name


class TestNumpyWrappers:
    def test_round_trip_shapes(self, wm_net, rng):
        clip = random_clip(rng)
        cover = random_image(rng)
        code = encode(wm_net, clip.reshape(128, 64))
        assert code.shape == (128, 128, 1)
        marked = embed(wm_net, code, cover)
        assert marked.shape == (128, 128, 3)
        code2 = extract(wm_net, marked)
        assert code2.shape == (128, 128, 1)
        clip2 = decode(wm_net, code2)
        assert clip2.shape == (8192,)

    def test_wm_forward_matches_pieces(self, wm_net, rng):
        clip = random_clip(rng)
        cover = random_image(rng)
        marked, extracted = wm_forward(wm_net, clip, cover)
        code = encode(wm_net, clip.reshape(128, 64))
        assert np.allclose(marked, embed(wm_net, code, cover), atol=1e-6)

    def test_wrapper_shape_errors(self, wm_net, rng):
        with pytest.raises(InvalidInputError):
            encode(wm_net, random_clip(rng))  # flat clip, not frames
        with pytest.raises(InvalidInputError):
            decode(wm_net, np.zeros((128, 128), dtype=np.float32))
        with pytest.raises(InvalidInputError):
            embed(wm_net, np.zeros((128, 128, 1), dtype=np.float32), np.zeros((64, 64, 3), dtype=np.float32))
        with pytest.raises(InvalidInputError):
            extract(wm_net, np.zeros((3, 128, 128), dtype=np.float32))
        with pytest.raises(InvalidInputError):
            wm_forward(wm_net, np.zeros(100, dtype=np.float32), random_image(rng))


class TestCheckpoints:
    def test_round_trip_bit_identical_outputs(self, wm_net, rng, tmp_path):
        path = tmp_path / "net.pt"
        save_checkpoint(path, "wm", wm_net.cfg.to_dict(), wm_net.state_dict(), {"epoch": 1})
        payload = load_checkpoint(path, expected_kind="wm")
        other = WMNetwork(WMConfig.from_dict(payload["config"]))
        other.load_state_dict(payload["state_dict"])
        other.eval()

        clip = random_clip(rng)
        cover = random_image(rng)
        m1, w1 = wm_forward(wm_net, clip, cover)
        m2, w2 = wm_forward(other, clip, cover)
        assert np.array_equal(m1, m2)
        assert np.array_equal(w1, w2)

    def test_kind_mismatch_refused(self, wm_net, tmp_path):
        path = tmp_path / "net.pt"
        save_checkpoint(path, "wm", wm_net.cfg.to_dict(), wm_net.state_dict(), {})
        with pytest.raises(ConfigurationError):
            load_checkpoint(path, expected_kind="similarity")

    def test_config_mismatch_refused(self, wm_net, tmp_path):
        path = tmp_path / "net.pt"
        save_checkpoint(path, "wm", wm_net.cfg.to_dict(), wm_net.state_dict(), {})
        with pytest.raises(ConfigurationError):
            load_checkpoint(path, expected_kind="wm", expected_config=WMConfig(hidden=64).to_dict())

    def test_state_hash_tracks_content(self, wm_net):
        h1 = state_hash(wm_net.state_dict())
        h2 = state_hash(wm_net.state_dict())
        assert h1 == h2
        other = WMNetwork.build(WMConfig(seed=99))
        assert state_hash(other.state_dict()) != h1
