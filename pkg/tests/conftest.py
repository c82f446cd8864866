"""Shared fixtures."""

import numpy as np
import pytest

from src.signals.siggen import HeartParams, LungParams, gen_heart, gen_lung
from src.vae.model import VAEArchitecture, VAEModel

SAMPLE_RATE = 4000


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_arch():
    return VAEArchitecture(input_dim=16, latent_dim=2, hidden_sizes=(12, 6))


@pytest.fixture
def small_model(small_arch):
    return VAEModel.create(small_arch, np.random.default_rng(0))


@pytest.fixture
def default_model():
    return VAEModel.create(VAEArchitecture(), np.random.default_rng(0))


def _zero_model(arch: VAEArchitecture) -> VAEModel:
    model = VAEModel.create(arch, np.random.default_rng(0))
    for pset in model.param_sets:
        for value in pset.params.values():
            value[...] = 0.0
    return model


@pytest.fixture
def zero_model():
    """Factory for models whose every weight and bias is zero."""
    return _zero_model


@pytest.fixture
def heart_2s():
    return gen_heart(HeartParams(), 2.0, SAMPLE_RATE, seed=3)


@pytest.fixture
def lung_2s():
    return gen_lung(LungParams(), 2.0, SAMPLE_RATE, seed=4)


@pytest.fixture
def config_file(tmp_path):
    """A short, fast run configuration."""
    path = tmp_path / "run.conf"
    path.write_text(
        "# quick pipeline run\n"
        "duration = 4\n"
        "epochs = 3\n"
        "batch_size = 32\n"
        "latent_dim = 4\n"
        "hidden_sizes = 32,16\n"
        "tsne_iters = 250\n"
        "perplexity = 10\n"
        "restarts = 2\n"
        "snapshot_stride = 2\n"
        "checkpoint_stride = 2\n"
        "seed = 7\n"
        "log_level = WARNING\n"
    )
    return path
