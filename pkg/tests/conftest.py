import numpy as np
import pytest

from pyconformaltrain.data import MnistPool

from .factories import digit_images, write_idx_images, write_idx_labels


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def digit_pool():
    """A small MnistPool, 25 images per digit."""
    images, labels = digit_images(np.random.default_rng(7))
    return MnistPool(images, labels)


@pytest.fixture
def mnist_files(tmp_path, digit_pool):
    """The digit pool written as gzipped IDX files; returns (images_path, labels_path)."""
    images = write_idx_images(tmp_path / "train-images-idx3-ubyte.gz", digit_pool.images)
    labels = write_idx_labels(tmp_path / "train-labels-idx1-ubyte.gz", digit_pool.labels)
    return images, labels
