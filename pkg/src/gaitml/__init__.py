"""Gait recognition pipeline: IMU ingestion, spectral features, a tiny dense
classifier, k-means anomaly scoring and int8 deployment artifacts."""

from gaitml.dataset import ActivityLabel, Dataset, Recording, Sample, split_by_recording, synthesize_dataset
from gaitml.windowing import Window, WindowConfig, segment
from gaitml.features import FeatureConfig, Normalizer, extract_features, fit_normalizer
from gaitml.model import MlpModel, TrainConfig, TrainHistory, init_mlp, train
from gaitml.anomaly import AnomalyModel, anomaly_score, fit_kmeans

__version__ = "0.1.0"

__all__ = [
    "ActivityLabel",
    "AnomalyModel",
    "Dataset",
    "FeatureConfig",
    "MlpModel",
    "Normalizer",
    "Recording",
    "Sample",
    "TrainConfig",
    "TrainHistory",
    "Window",
    "WindowConfig",
    "anomaly_score",
    "extract_features",
    "fit_kmeans",
    "fit_normalizer",
    "init_mlp",
    "segment",
    "split_by_recording",
    "synthesize_dataset",
    "train",
]
