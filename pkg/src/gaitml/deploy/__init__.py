"""Deployment artifacts: int8 quantization, bundle files, C headers, streaming."""

from gaitml.deploy.quant import QuantModel, quantize, quantize_probs
from gaitml.deploy.bundle import ModelBundle, load_bundle, save_bundle
from gaitml.deploy.header import export_c_header
from gaitml.deploy.stream import ClassificationEvent, StreamEngine, format_event, infer_window

__all__ = [
    "ClassificationEvent",
    "ModelBundle",
    "QuantModel",
    "StreamEngine",
    "export_c_header",
    "format_event",
    "infer_window",
    "load_bundle",
    "quantize",
    "quantize_probs",
    "save_bundle",
]
