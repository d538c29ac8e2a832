import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaitml.dataset import split_by_recording, synthesize_dataset  # noqa: E402
from gaitml.pipeline import PipelineConfig, featurize, fit_pipeline  # noqa: E402


@pytest.fixture(scope="session")
def synth_ds():
    return synthesize_dataset(per_class=10, duration_s=10.0, rate_hz=100.0, seed=42)


@pytest.fixture(scope="session")
def split(synth_ds):
    return split_by_recording(synth_ds, 0.8, 42)


@pytest.fixture(scope="session")
def trained(split):
    train_ds, test_ds = split
    return fit_pipeline(train_ds, test_ds, PipelineConfig(seed=42))


@pytest.fixture(scope="session")
def test_features(trained, split):
    b = trained.bundle
    windows, x, y = featurize(split[1], b.window_cfg, b.feature_cfg)
    return windows, b.normalizer(x), y
