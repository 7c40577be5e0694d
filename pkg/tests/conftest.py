import numpy as np
import pytest

from models.dataio import generate_synthetic
from models.densenet_backbone import mini_densenet
from models.ensemble import EnsembleConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def mini_config():
    return EnsembleConfig(backbone=mini_densenet(), learners_per_family=4, embedding_dim=16, num_classes=5)


@pytest.fixture(scope='session')
def tiny_dataset():
    """4 train ids, 3 test ids, 2 cameras, 4 views each, at the mini backbone's 64x32."""
    return generate_synthetic(n_train_ids=4, n_test_ids=3, views_per_id=4, n_cams=2, dims=(64, 32), seed=3)


@pytest.fixture(scope='session')
def default_dataset():
    return generate_synthetic()
