"""ModelBundle and its binary file format (layout in docs/bundle_format.md)."""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gaitml.anomaly import AnomalyModel
from gaitml.dataset import ActivityLabel
from gaitml.errors import (
    BadMagic,
    BundleError,
    ChecksumMismatch,
    DimensionMismatch,
    TruncatedFile,
    UnsupportedVersion,
)
from gaitml.features import FeatureConfig, Normalizer
from gaitml.model import MlpModel
from gaitml.deploy.quant import QuantModel
from gaitml.windowing import WindowConfig

MAGIC = b"GAIT"
VERSION = 1
SUPPORTED_VERSIONS = (1,)
_HEADER = struct.Struct("<4sHII")  # magic, version, crc32, payload length

KIND_FLOAT = 0
KIND_INT8 = 1


@dataclass(eq=False)
class ModelBundle:
    classifier: MlpModel | QuantModel
    normalizer: Normalizer
    anomaly: AnomalyModel
    feature_cfg: FeatureConfig
    window_cfg: WindowConfig
    rate_hz: float
    labels: tuple[str, ...] = tuple(ActivityLabel.display_names())
    version: int = VERSION
    # free-form provenance (split seed, held-out recording ids, ...)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = tuple(self.labels)
        dims = self.classifier.dims
        if self.normalizer.dim != dims[0]:
            raise DimensionMismatch(f"normalizer has {self.normalizer.dim} features, classifier expects {dims[0]}")
        if self.anomaly.dim != dims[0]:
            raise DimensionMismatch(f"anomaly model has {self.anomaly.dim} features, classifier expects {dims[0]}")
        if len(self.labels) != dims[-1]:
            raise DimensionMismatch(f"{len(self.labels)} labels for {dims[-1]} outputs")
        if dims[0] % self.feature_cfg.per_axis:
            raise DimensionMismatch("input width is not a whole number of axes")
        if self.version not in SUPPORTED_VERSIONS:
            raise UnsupportedVersion(f"bundle version {self.version} not supported")
        self.window_cfg.window_samples(self.rate_hz)
        self.window_cfg.stride_samples(self.rate_hz)

    @property
    def axes(self) -> int:
        return self.classifier.dims[0] // self.feature_cfg.per_axis

    @property
    def quantized(self) -> bool:
        return isinstance(self.classifier, QuantModel)

    def with_classifier(self, classifier) -> "ModelBundle":
        return ModelBundle(
            classifier, self.normalizer, self.anomaly, self.feature_cfg,
            self.window_cfg, self.rate_hz, self.labels, self.version, dict(self.meta),
        )


# --- encoding -------------------------------------------------------------


def _section(tag: bytes, body: bytes) -> bytes:
    assert len(tag) == 4
    return tag + struct.pack("<I", len(body)) + body


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _config_json(b: ModelBundle) -> bytes:
    doc = {
        "rate_hz": b.rate_hz,
        "window": {"window_ms": b.window_cfg.window_ms, "stride_ms": b.window_cfg.stride_ms},
        "features": b.feature_cfg.to_dict(),
        "meta": b.meta,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def encode_payload(b: ModelBundle) -> bytes:
    clf = b.classifier
    dims = clf.dims
    parts = [
        _section(b"DIMS", struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}I", *dims)),
        _section(b"KIND", struct.pack("<B", KIND_INT8 if b.quantized else KIND_FLOAT)),
    ]
    for i in range(len(dims) - 1):
        if b.quantized:
            parts.append(_section(b"WGT%d" % i, np.ascontiguousarray(clf.qweights[i], dtype="i1").tobytes()))
            parts.append(_section(b"SCL%d" % i, _f64(clf.scales[i])))
        else:
            parts.append(_section(b"WGT%d" % i, _f64(clf.weights[i])))
        parts.append(_section(b"BIA%d" % i, _f64(clf.biases[i])))
    nz = b.normalizer
    parts.append(_section(b"NORM", struct.pack("<Id", nz.dim, nz.epsilon) + _f64(nz.mean) + _f64(nz.std)))
    an = b.anomaly
    parts.append(_section(b"CENT", struct.pack("<II", an.k, an.dim) + _f64(an.centroids)))
    parts.append(_section(b"RADI", _f64(an.radii)))
    parts.append(_section(b"CONF", _config_json(b)))
    labels = b"".join(struct.pack("<H", len(s)) + s for s in (lab.encode() for lab in b.labels))
    parts.append(_section(b"LABL", struct.pack("<I", len(b.labels)) + labels))
    return b"".join(parts)


def payload_checksum(b: ModelBundle) -> int:
    return zlib.crc32(encode_payload(b)) & 0xFFFFFFFF


def to_bytes(b: ModelBundle) -> bytes:
    payload = encode_payload(b)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    return _HEADER.pack(MAGIC, b.version, crc, len(payload)) + payload


def save_bundle(b: ModelBundle, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(b))


# --- decoding -------------------------------------------------------------


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFile("bundle payload ends inside a section")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def f64(self, count: int, shape=None) -> np.ndarray:
        a = np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)
        return a.reshape(shape) if shape is not None else a

    def done(self) -> bool:
        return self.pos >= len(self.buf)


def _split_sections(payload: bytes) -> dict[bytes, bytes]:
    r = _Reader(payload)
    sections = {}
    while not r.done():
        tag = r.take(4)
        (n,) = r.unpack("<I")
        sections[tag] = r.take(n)
    return sections


def from_bytes(data: bytes) -> ModelBundle:
    if len(data) < _HEADER.size:
        if len(data) >= 4 and data[:4] != MAGIC:
            raise BadMagic("not a GAIT bundle")
        raise TruncatedFile(f"bundle is {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, crc, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersion(f"bundle version {version} not supported")
    payload = data[_HEADER.size :]
    if len(payload) < n:
        raise TruncatedFile(f"payload is {len(payload)} bytes, header says {n}")
    if len(payload) > n:
        raise BundleError(f"{len(payload) - n} trailing bytes after payload")
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise ChecksumMismatch("payload CRC32 does not match header")
    return _decode_payload(payload, version)


def _need(sections: dict, tag: bytes) -> _Reader:
    if tag not in sections:
        raise TruncatedFile(f"missing section {tag.decode(errors='replace')}")
    return _Reader(sections[tag])


def _decode_payload(payload: bytes, version: int) -> ModelBundle:
    sec = _split_sections(payload)
    r = _need(sec, b"DIMS")
    (nd,) = r.unpack("<I")
    dims = r.unpack(f"<{nd}I")
    (kind,) = _need(sec, b"KIND").unpack("<B")
    ws, ss, bs = [], [], []
    for i in range(nd - 1):
        shape = (dims[i + 1], dims[i])
        r = _need(sec, b"WGT%d" % i)
        if kind == KIND_INT8:
            ws.append(np.frombuffer(r.take(shape[0] * shape[1]), dtype="i1").reshape(shape).copy())
            ss.append(_need(sec, b"SCL%d" % i).f64(shape[0]))
        else:
            ws.append(r.f64(shape[0] * shape[1], shape))
        bs.append(_need(sec, b"BIA%d" % i).f64(shape[0]))
    if kind == KIND_INT8:
        clf = QuantModel(dims, ws, ss, bs)
    elif kind == KIND_FLOAT:
        clf = MlpModel(dims, ws, bs)
    else:
        raise BundleError(f"unknown classifier kind {kind}")

    r = _need(sec, b"NORM")
    dim, eps = r.unpack("<Id")
    normalizer = Normalizer(r.f64(dim), r.f64(dim), eps)
    r = _need(sec, b"CENT")
    k, cdim = r.unpack("<II")
    centroids = r.f64(k * cdim, (k, cdim))
    radii = _need(sec, b"RADI").f64(k)
    conf = json.loads(sec[b"CONF"].decode()) if b"CONF" in sec else None
    if conf is None:
        raise TruncatedFile("missing section CONF")
    r = _need(sec, b"LABL")
    (nl,) = r.unpack("<I")
    labels = []
    for _ in range(nl):
        (ln,) = r.unpack("<H")
        labels.append(r.take(ln).decode())
    return ModelBundle(
        classifier=clf,
        normalizer=normalizer,
        anomaly=AnomalyModel(centroids, radii),
        feature_cfg=FeatureConfig.from_dict(conf["features"]),
        window_cfg=WindowConfig(**conf["window"]),
        rate_hz=conf["rate_hz"],
        labels=tuple(labels),
        version=version,
        meta=conf.get("meta", {}),
    )


def load_bundle(path: str | Path) -> ModelBundle:
    return from_bytes(Path(path).read_bytes())
