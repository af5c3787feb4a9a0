"""
Test configuration and fixtures for drank tests

This module contains shared test configuration, fixtures, and utilities
used across the test suite.
"""

import numpy as np
import pytest

from drank.drloss import LossSpec
from drank.scores import DrParams, ImageScores
from drank.synth import GeneratorSpec, make_dataset
from drank.trainer import TrainerConfig


@pytest.fixture
def rng():
    """Seeded random generator"""
    return np.random.default_rng(1234)


@pytest.fixture
def simple_scores():
    """Two positives and three negatives with well separated extremes"""
    return ImageScores(positives=[0.8, 0.6], negatives=[0.1, 0.2, 0.4])


@pytest.fixture
def random_scores(rng):
    """Moderately sized random image inside (0.05, 0.95)"""
    return ImageScores(
        positives=rng.uniform(0.05, 0.95, size=7),
        negatives=rng.uniform(0.05, 0.95, size=40),
    )


@pytest.fixture
def small_spec():
    """Small, easily separable dataset spec"""
    return GeneratorSpec(
        dim=4,
        images=10,
        pos_per_image=2,
        neg_per_image=50,
        hard_fraction=0.0,
        seed=7,
    )


@pytest.fixture
def small_dataset(small_spec):
    """Dataset generated from small_spec"""
    return make_dataset(small_spec)


@pytest.fixture
def mixed_dataset():
    """Dataset with hard negatives and some images without positives"""
    return make_dataset(
        GeneratorSpec(
            dim=3,
            images=12,
            pos_per_image=3,
            neg_per_image=40,
            hard_fraction=0.1,
            empty_fraction=0.3,
            seed=11,
        )
    )


@pytest.fixture
def quick_trainer_config():
    """Short DR training run"""
    return TrainerConfig(
        batch_size=4,
        iterations=200,
        learning_rate=0.5,
        seed=3,
        loss=LossSpec(name="dr", params=DrParams()),
    )


class TestConstants:
    """Test constants and sample data"""

    TOL = 1e-12
    LN2 = float(np.log(2.0))

    SAMPLE_CONFIG_CONTENT = """# drank experiment config
loss = dr
gamma = 0.5
iterations 300
learning_rate = 0.25

# comma-separated lists
thresholds = 0.1, 0.3, 0.5
lr_schedule = 200:0.1
"""

    SMALL_RUN_OVERRIDES = [
        "dim=3",
        "images=6",
        "pos_per_image=2",
        "neg_per_image=30",
        "hard_fraction=0.1",
        "iterations=20",
        "batch_size=2",
    ]
