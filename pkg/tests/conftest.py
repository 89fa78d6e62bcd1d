from pathlib import Path

import numpy as np
import pytest
import torch

from foregan.data import SceneParams, synth_generate
from foregan.gan import Checkpoint

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tiny_checkpoint() -> Checkpoint:
    return Checkpoint.load(FIXTURES / "tiny_gan.npz")


@pytest.fixture(scope="session")
def shadow_sequence():
    return synth_generate(0, SceneParams(shadow=True))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
