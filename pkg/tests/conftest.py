import numpy as np
import pytest
import torch

from sonomark import datasets, synth
from sonomark.networks import WMConfig, WMNetwork

torch.set_num_threads(1)

# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def micro_corpus(tmp_path_factory):
    """Tiny synthetic corpus shared across tests: 6 commands x 8 clips, 48 images."""
    root = tmp_path_factory.mktemp("corpus")
    audio_dir = synth.make_audio_corpus(root / "audio", n_commands=6, clips_per_command=8, seed=11)
    image_dir = synth.make_image_corpus(root / "images", n_images=48, seed=12)
    return {"audio": audio_dir, "images": image_dir}


@pytest.fixture(scope="session")
def micro_manifest(micro_corpus):
    return datasets.build_manifest(micro_corpus["images"], micro_corpus["audio"], sizes=(24, 8, 8), seed=5)


@pytest.fixture(scope="session")
def wm_net():
    """One fixed, untrained watermark network reused by read-only tests."""
    return WMNetwork.build(WMConfig(seed=21)).eval()


def random_clip(rng, n=8192):
    return rng.uniform(-1.0, 1.0, n).astype(np.float32)


def random_image(rng, size=128):
    return rng.uniform(0.0, 1.0, (size, size, 3)).astype(np.float32)
