"""Shared fixtures.

``trained_model`` trains the full-size autoencoder once per session (200
clean segments x 10 masks, 50 epochs, float32); the reconstruction, pipeline
and end-to-end tests all reuse it.
"""

import time

import numpy as np
import pytest

from ppgdae.synth import clean_training_segments, derive_seed, noisy_test_recordings
from ppgdae.train import MaskSpec, TrainConfig, build_dataset, train_dae

MASTER_SEED = 2024
TRAIN_SEGMENTS = 200
EPOCHS = 50

_ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per criterion; printed in the terminal summary."""

    def record(key: int, ok: bool, detail: str) -> None:
        _ACCEPTANCE[key] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def trained():
    """Full-size training run; returns (TrainResult, wall seconds)."""
    t0 = time.perf_counter()
    segments = clean_training_segments(TRAIN_SEGMENTS, derive_seed(MASTER_SEED, "train-corpus"))
    dataset = build_dataset(segments, MaskSpec(seed=derive_seed(MASTER_SEED, "masks")))
    config = TrainConfig(
        epochs=EPOCHS,
        batch_size=32,
        shuffle_seed=derive_seed(MASTER_SEED, "shuffle"),
        model_seed=derive_seed(MASTER_SEED, "init"),
        dtype="float32",
    )
    result = train_dae(dataset, config)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def trained_model(trained):
    return trained[0].model


@pytest.fixture(scope="session")
def test_corpus():
    """20 paired clean/noisy 3-minute recordings."""
    return noisy_test_recordings(20, 180.0, derive_seed(MASTER_SEED, "test-corpus"))
