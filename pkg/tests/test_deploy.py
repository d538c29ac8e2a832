import re
import struct
import zlib

import numpy as np
import pytest

from gaitml.dataset import ActivityLabel, Sample, synthesize_recording
from gaitml.deploy import (
    ClassificationEvent,
    StreamEngine,
    export_c_header,
    format_event,
    infer_window,
    load_bundle,
    quantize,
    quantize_probs,
    save_bundle,
)
from gaitml.deploy.bundle import from_bytes, payload_checksum, to_bytes
from gaitml.deploy.stream import classify_windows, stream_push
from gaitml.errors import (
    BadMagic,
    ChecksumMismatch,
    DimensionMismatch,
    NotQuantized,
    OutOfOrderSample,
    TruncatedFile,
    UnsupportedVersion,
)
from gaitml.model import forward, init_mlp
from gaitml.windowing import segment

LABELS = ("Going Downstairs", "Going Upstairs", "Stationary", "Walking")


@pytest.fixture(scope="module")
def qbundle(trained):
    return trained.bundle.with_classifier(quantize(trained.float_model))


# --- quantization --------------------------------------------------------


def test_zero_weights_quantize_to_zero():
    m = init_mlp(seed=0)
    for w in m.weights:
        w[...] = 0.0
    q = quantize(m)
    assert all(np.all(a == 0) and a.dtype == np.int8 for a in q.qweights)
    assert all(np.all(s == 1e-12) for s in q.scales)


def test_round_trip_error_bound():
    for seed in range(5):
        m = init_mlp(seed=seed)
        q = quantize(m)
        for w, qw, s, deq in zip(m.weights, q.qweights, q.scales, q.dequantized_weights()):
            assert np.all(np.abs(qw.astype(int)) <= 127)
            assert np.all(s > 0)
            np.testing.assert_allclose(s, np.abs(w).max(axis=1) / 127)
            assert np.all(np.abs(w - deq) <= s[:, None] / 2 + 1e-15)
        assert np.all(np.abs(q.qweights[0]).max(axis=1) == 127)


def test_quantized_matches_float_on_test_windows(trained, test_features):
    _, z, _ = test_features
    q = quantize(trained.float_model)
    pf, pq = forward(trained.float_model, z), forward(q, z)
    assert np.mean(pf.argmax(1) == pq.argmax(1)) >= 0.99
    assert np.max(np.abs(pf - pq)) <= 0.02


def test_quantize_probs_grid():
    np.testing.assert_array_equal(quantize_probs([0.0, 1.0, 0.996, 0.5 / 256]), [0, 1, 255 / 256, 1 / 256])
    p = np.random.default_rng(0).dirichlet(np.ones(4), size=100)
    g = quantize_probs(p) * 256
    assert np.all(g == np.round(g)) and np.all((g >= 0) & (g <= 256))
    assert np.all(np.abs(quantize_probs(p) - p) <= 0.5 / 256)


# --- bundle file ---------------------------------------------------------


@pytest.mark.parametrize("quant", [False, True])
def test_save_load_identity(tmp_path, trained, qbundle, quant):
    b = qbundle if quant else trained.bundle
    save_bundle(b, tmp_path / "m.bin")
    back = load_bundle(tmp_path / "m.bin")
    assert back.quantized == quant
    assert to_bytes(back) == (tmp_path / "m.bin").read_bytes()
    assert back.labels == LABELS and back.meta == b.meta
    x = np.random.default_rng(1).normal(size=(100, 200, 3))
    for w in x:
        e1, e2 = infer_window(b, w), infer_window(back, w)
        assert e1.raw_probs == e2.raw_probs and e1.anomaly_score == e2.anomaly_score


def test_header_layout(trained):
    data = to_bytes(trained.bundle)
    magic, version, crc, n = struct.unpack_from("<4sHII", data)
    assert magic == b"GAIT" and version == 1
    assert n == len(data) - 14
    assert crc == zlib.crc32(data[14:]) == payload_checksum(trained.bundle)


def test_bad_magic(trained):
    data = bytearray(to_bytes(trained.bundle))
    data[:4] = b"XXXX"
    with pytest.raises(BadMagic):
        from_bytes(bytes(data))


def test_flipped_payload_byte(trained):
    data = bytearray(to_bytes(trained.bundle))
    for pos in (14, len(data) // 2, len(data) - 1):
        bad = data.copy()
        bad[pos] ^= 0xFF
        with pytest.raises(ChecksumMismatch):
            from_bytes(bytes(bad))


def test_unsupported_version(trained):
    data = bytearray(to_bytes(trained.bundle))
    data[4:6] = struct.pack("<H", 99)
    with pytest.raises(UnsupportedVersion):
        from_bytes(bytes(data))


@pytest.mark.parametrize("keep", [0, 3, 10, 100])
def test_truncated(trained, keep):
    data = to_bytes(trained.bundle)
    with pytest.raises(TruncatedFile):
        from_bytes(data[:keep])


# --- C header ------------------------------------------------------------


def test_header_requires_quantized(trained):
    with pytest.raises(NotQuantized):
        export_c_header(trained.bundle)


def _declared(text):
    return {m.group(2): int(m.group(3)) for m in re.finditer(r"static const (\w+) (\w+)\[(\d+)\]", text)}


def test_header_arrays_match_dims(qbundle):
    text = export_c_header(qbundle)
    decl = _declared(text)
    params = sum(n for name, n in decl.items() if re.fullmatch(r"gait_[wb]\d", name))
    assert params == 1054
    assert decl["gait_w0"] == 780 and decl["gait_scale0"] == 20 and decl["gait_b2"] == 4
    assert decl["gait_norm_mean"] == 39
    assert "static const char *const gait_labels[4]" in text
    for name, n in decl.items():
        body = re.search(rf"{name}\[{n}\] = \{{(.*?)\}};", text, re.S).group(1)
        assert len([v for v in body.replace("\n", " ").split(",") if v.strip()]) == n
    assert '"Going Downstairs", "Going Upstairs", "Stationary", "Walking"' in text
    assert "#define GAIT_N_PARAMS 1054" in text


def test_header_int8_values_match_bundle(qbundle):
    text = export_c_header(qbundle)
    body = re.search(r"gait_w1\[200\] = \{(.*?)\};", text, re.S).group(1)
    vals = [int(v) for v in body.replace("\n", " ").split(",")]
    assert vals == qbundle.classifier.qweights[1].ravel().tolist()


def test_header_deterministic_and_checksum(tmp_path, qbundle):
    a, b = export_c_header(qbundle), export_c_header(qbundle)
    assert a == b
    save_bundle(qbundle, tmp_path / "q.bin")
    crc = struct.unpack_from("<I", (tmp_path / "q.bin").read_bytes(), 6)[0]
    assert f"0x{crc:08x}" in a.splitlines()[1]


# --- streaming -----------------------------------------------------------


def test_buffer_fill_rule(trained):
    rec = synthesize_recording(ActivityLabel.WALKING, 3.0, 100, seed=5)
    eng = StreamEngine(trained.bundle)
    samples = list(rec.samples())
    for s in samples[:199]:
        assert stream_push(eng, s) is None
    ev = eng.push(samples[199])
    assert ev is not None and ev.t_end_ms == rec.t_ms[199]
    emitted = [i for i, s in enumerate(samples[200:], start=200) if eng.push(s) is not None]
    assert emitted[:3] == [207, 215, 223]


def test_stream_equals_batch(trained):
    b = trained.bundle
    rec = synthesize_recording(ActivityLabel.GOING_UPSTAIRS, 10.0, 100, seed=77)
    events = list(StreamEngine(b).run(rec.samples()))
    batch = classify_windows(b, segment(rec, b.window_cfg))
    assert len(events) == len(batch) == 101
    for s, w in zip(events, batch):
        assert s.probs == w.probs
        assert s.t_end_ms == w.t_end_ms
        assert abs(s.anomaly_score - w.anomaly_score) <= 1e-9


def test_stationary_replay(qbundle):
    rec = synthesize_recording(ActivityLabel.STATIONARY, 10.0, 100, seed=31337)
    events = list(StreamEngine(qbundle).run(rec.samples()))
    assert len(events) == 101
    for ev in events:
        assert ev.top_label == "Stationary"
        assert all(p * 256 == int(p * 256) for p in ev.probs)
        assert ev.anomaly_score < 0
        assert sum(ev.raw_probs) == pytest.approx(1.0, abs=1e-9)


def test_out_of_order(trained):
    eng = StreamEngine(trained.bundle)
    eng.push(Sample(10, 0.0, 0.0, 1.0))
    with pytest.raises(OutOfOrderSample):
        eng.push(Sample(10, 0.0, 0.0, 1.0))
    with pytest.raises(DimensionMismatch):
        eng.push(Sample(20, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0))


def test_reset(trained):
    rec = synthesize_recording(ActivityLabel.WALKING, 2.5, 100, seed=1)
    eng = StreamEngine(trained.bundle)
    first = list(eng.run(rec.samples()))
    eng.reset()
    again = list(eng.run(rec.samples()))
    assert [e.probs for e in first] == [e.probs for e in again]


# --- serial monitor format -----------------------------------------------


def _event(**kw):
    base = dict(
        probs=(0.0, 0.0, 255 / 256, 0.0),
        raw_probs=(0.001, 0.001, 0.996, 0.002),
        anomaly_score=-0.069,
        t_end_ms=1990,
        labels=LABELS,
        dsp_ms=3.2,
        classify_ms=0.4,
        anomaly_ms=0.6,
    )
    base.update(kw)
    return ClassificationEvent(**base)


def test_format_golden():
    assert format_event(_event()) == (
        "Predictions (DSP: 3 ms., Classification: 0 ms., Anomaly: 1 ms.):\n"
        "    Going Downstairs: 0.00000\n"
        "    Going Upstairs: 0.00000\n"
        "    Stationary: 0.99609\n"
        "    Walking: 0.00000\n"
        "    anomaly score: -0.069"
    )


def test_format_zero_has_no_sign():
    text = format_event(_event(probs=(-0.0, 0.0, 1.0, 0.0)))
    assert "Going Downstairs: 0.00000" in text and "-0.00000" not in text


def test_format_is_stable():
    ev = _event()
    assert len({format_event(ev) for _ in range(5)}) == 1
