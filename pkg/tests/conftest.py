import numpy as np
import pytest
from scipy import ndimage

from blursynth.toyscenes import textured_scene, write_corpus


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    """Six 96x128 procedural scenes with labels and proposals."""
    return write_corpus(tmp_path_factory.mktemp("corpus"), 6, seed=7, shape=(96, 128))


def natural_image(rng, shape=(64, 64)):
    """Toy scene low-passed like camera optics (raw scenes hold per-pixel noise)."""
    return ndimage.gaussian_filter(textured_scene(rng, shape)[0], sigma=(1.0, 1.0, 0))
