import numpy as np
import pytest
import torch

from gaitmm.config import ModelConfig
from gaitmm.data import write_synthetic_corpus

# single-core box; a fixed thread count also keeps reductions deterministic
torch.set_num_threads(1)

# one line per acceptance criterion, echoed after the test summary
ACCEPTANCE_VERDICTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_model_config(**overrides) -> ModelConfig:
    """A model small enough for per-test forwards: 16x8 input, 2 blocks."""
    base = dict(
        num_ffsl_blocks=2,
        stage_channels=(2, 3),
        k_parts=4,
        l_parts=4,
        msma_after_block=1,
        num_strips=4,
        embed_dim=6,
        num_classes=3,
        input_height=16,
        input_width=8,
    )
    base.update(overrides)
    return ModelConfig(**base)


def fast_model_config(**overrides) -> ModelConfig:
    """Tiny network that accepts the 64x44 aligned corpus frames."""
    base = dict(input_height=64, input_width=44, input_downsample=4)
    base.update(overrides)
    return tiny_model_config(**base)


@pytest.fixture
def tiny_cfg():
    return tiny_model_config()


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory):
    """Small rendered corpus shared across tests: 4 subjects, 2 views,
    full condition profile (6 nm / 2 bg / 2 cl), 16 frames each."""
    root = tmp_path_factory.mktemp("corpus")
    write_synthetic_corpus(root, num_subjects=4, views=(0, 90),
                           seqs_per_condition=None, frames_per_seq=16,
                           seed=11)
    return root
