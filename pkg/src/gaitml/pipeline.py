"""End-to-end orchestration shared by the CLI and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from gaitml.anomaly import fit_kmeans
from gaitml.dataset import ActivityLabel, Dataset
from gaitml.deploy.bundle import ModelBundle
from gaitml.deploy.quant import quantize
from gaitml.deploy.stream import classify_windows
from gaitml.features import FeatureConfig, extract_many, fit_normalizer
from gaitml.fft import next_power_of_two
from gaitml.metrics import EvalReport, evaluate_predictions
from gaitml.model import MlpModel, TrainConfig, TrainHistory, init_mlp, loss_ce, train
from gaitml.windowing import Window, WindowConfig, segment_all


@dataclass(frozen=True)
class PipelineConfig:
    window: WindowConfig = field(default_factory=WindowConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden: tuple[int, int] = (20, 10)
    k_clusters: int = 8
    train_fraction: float = 0.8
    seed: int = 42
    quantize: bool = False


def stage_seeds(seed: int) -> dict[str, int]:
    """Independent sub-seeds for init, shuffling and k-means, all from ``seed``."""
    init, shuffle, kmeans = np.random.SeedSequence(seed).generate_state(3)
    return {"init": int(init), "shuffle": int(shuffle), "kmeans": int(kmeans)}


def resolve_feature_config(fcfg: FeatureConfig, window_samples: int) -> FeatureConfig:
    """Grow n_fft to the next power of two when the window would not fit."""
    if fcfg.n_fft >= window_samples:
        return fcfg
    return replace(fcfg, n_fft=next_power_of_two(window_samples))


def featurize(recordings, wcfg: WindowConfig, fcfg: FeatureConfig) -> tuple[list[Window], np.ndarray, np.ndarray]:
    windows = segment_all(recordings, wcfg)
    x = extract_many(windows, fcfg)
    y = np.array([int(w.label) for w in windows], dtype=np.intp)
    return windows, x, y


@dataclass
class TrainResult:
    bundle: ModelBundle
    float_model: MlpModel
    history: TrainHistory
    report: EvalReport
    train_windows: int
    test_windows: int


def fit_pipeline(train_ds: Dataset, test_ds: Dataset, cfg: PipelineConfig = PipelineConfig()) -> TrainResult:
    rate = train_ds.rate_hz
    fcfg = resolve_feature_config(cfg.features, cfg.window.window_samples(rate))
    seeds = stage_seeds(cfg.seed)

    _, x_tr, y_tr = featurize(train_ds, cfg.window, fcfg)
    test_windows, x_te, y_te = featurize(test_ds, cfg.window, fcfg)
    normalizer = fit_normalizer(x_tr)
    z_tr, z_te = normalizer(x_tr), normalizer(x_te)

    dims = (x_tr.shape[1], *cfg.hidden, len(ActivityLabel))
    model = init_mlp(dims, seeds["init"])
    tcfg = replace(cfg.train, seed=seeds["shuffle"])
    model, history = train(model, (z_tr, y_tr), (z_te, y_te), tcfg)
    anomaly = fit_kmeans(z_tr, cfg.k_clusters, seeds["kmeans"])

    bundle = ModelBundle(
        classifier=quantize(model) if cfg.quantize else model,
        normalizer=normalizer,
        anomaly=anomaly,
        feature_cfg=fcfg,
        window_cfg=cfg.window,
        rate_hz=rate,
        meta={
            "seed": cfg.seed,
            "train_fraction": cfg.train_fraction,
            "train_ids": sorted(train_ds.ids),
            "test_ids": sorted(test_ds.ids),
        },
    )
    report = evaluate_windows(bundle, test_windows)
    return TrainResult(bundle, model, history, report, len(y_tr), len(y_te))


def evaluate_windows(bundle: ModelBundle, windows: list[Window]) -> EvalReport:
    events = classify_windows(bundle, windows)
    probs = np.array([ev.raw_probs for ev in events])
    labels = np.array([int(w.label) for w in windows], dtype=np.intp)
    mean_loss = float(np.mean(loss_ce(probs, labels)))
    return evaluate_predictions(probs, labels, mean_loss, bundle.labels)


def evaluate_bundle(bundle: ModelBundle, recordings) -> EvalReport:
    return evaluate_windows(bundle, segment_all(recordings, bundle.window_cfg))
