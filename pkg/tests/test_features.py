import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaitml.dataset import ActivityLabel, Recording
from gaitml.errors import DimensionMismatch, EmptySeries, EmptyTrainingSet, GaitError, SeriesTooLong
from gaitml.features import (
    DEFAULT_BANDS,
    FeatureConfig,
    Normalizer,
    band_power,
    extract_array,
    extract_features,
    fft_magnitude,
    fit_normalizer,
    rms,
    spectral_peaks,
    write_feature_csv,
)
from gaitml.fft import fft, next_power_of_two, rfft
from gaitml.windowing import WindowConfig, segment
from oracles import local_maxima, naive_dft_loop, oracle_magnitude, sum_of_squares_rms

RECT = FeatureConfig(taper="rectangular")


def _sine(freq, n=200, rate=100.0, amp=1.0, phase=0.0):
    return amp * np.sin(2 * np.pi * freq * np.arange(n) / rate + phase)


# --- fft -----------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_fft_small_against_loop_dft(n):
    x = np.random.default_rng(n).normal(size=n)
    np.testing.assert_allclose(fft(x), naive_dft_loop(list(x)), atol=1e-12)


def test_fft_complex_and_batched():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 64)) + 1j * rng.normal(size=(3, 64))
    got = fft(x)
    for row, ref in zip(got, x):
        k = np.arange(64)
        np.testing.assert_allclose(row, np.exp(-2j * np.pi * np.outer(k, k) / 64) @ ref, atol=1e-9)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(GaitError):
        fft(np.zeros(12))
    with pytest.raises(GaitError):
        rfft(np.zeros(10), 8)


def test_next_power_of_two():
    assert [next_power_of_two(n) for n in (1, 2, 3, 200, 256, 257)] == [1, 2, 4, 256, 256, 512]


# --- rms -----------------------------------------------------------------


def test_rms_examples():
    assert rms([-2.5] * 7) == 2.5
    assert rms([3, -4]) == pytest.approx(math.sqrt(12.5), abs=1e-12)
    assert rms([3, -4]) == pytest.approx(3.535534, abs=1e-6)
    with pytest.raises(EmptySeries):
        rms([])


def test_rms_matches_accumulator():
    x = np.random.default_rng(7).normal(size=200)
    assert rms(x) == pytest.approx(sum_of_squares_rms(list(x)), rel=1e-12)


# --- fft_magnitude -------------------------------------------------------


def test_constant_has_no_ac_content():
    m = fft_magnitude(np.full(200, 3.7))
    assert m.shape == (129,)
    assert np.all(m[1:] <= 1e-9)


def test_bin_aligned_sinusoid():
    x = np.cos(2 * np.pi * 8 * np.arange(256) / 256)
    m = fft_magnitude(x, RECT)
    assert 1 + np.argmax(m[1:]) == 8


@pytest.mark.parametrize("taper", ["hann", "rectangular"])
def test_magnitude_matches_naive_dft(taper):
    x = np.random.default_rng(1).normal(size=200)
    cfg = FeatureConfig(n_fft=256, taper=taper)
    np.testing.assert_allclose(fft_magnitude(x, cfg), oracle_magnitude(x, 256, taper), atol=1e-6)


@pytest.mark.parametrize("n_fft", [64, 128, 256, 512, 1024])
def test_magnitude_oracle_all_sizes(n_fft):
    rng = np.random.default_rng(n_fft)
    for _ in range(3):
        n = int(rng.integers(2, n_fft + 1))
        x = rng.normal(size=n)
        cfg = FeatureConfig(n_fft=n_fft)
        np.testing.assert_allclose(fft_magnitude(x, cfg), oracle_magnitude(x, n_fft), atol=1e-6)


def test_series_too_long():
    with pytest.raises(SeriesTooLong):
        fft_magnitude(np.zeros(257))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), s=st.floats(0.01, 100.0))
def test_magnitude_scales_linearly(seed, s):
    x = np.random.default_rng(seed).normal(size=200)
    a = fft_magnitude(x)
    b = fft_magnitude(s * x)
    np.testing.assert_allclose(b, s * a, rtol=1e-9, atol=1e-12)


# --- peaks ---------------------------------------------------------------


def test_single_sinusoid_peak():
    m = fft_magnitude(_sine(2.0))
    (f1, m1), (f2, m2) = spectral_peaks(m, 100.0, 2)
    assert abs(f1 - 2.0) <= 100 / 256
    assert m1 > m2


def test_two_sinusoids_ordered_by_magnitude():
    x = _sine(3.0, amp=1.0) + _sine(12.0, amp=2.0)
    m = fft_magnitude(x)
    ref = oracle_magnitude(x, 256)
    maxima = sorted(local_maxima(ref), key=lambda i: (-ref[i], i))[:2]
    expected = [(i * 100 / 256, ref[i]) for i in maxima]
    got = spectral_peaks(m, 100.0, 2)
    assert got[0][0] == pytest.approx(expected[0][0]) and abs(got[0][0] - 12.0) < 0.4
    assert got[1][0] == pytest.approx(expected[1][0]) and abs(got[1][0] - 3.0) < 0.4
    np.testing.assert_allclose([g[1] for g in got], [e[1] for e in expected], atol=1e-6)


def test_zero_spectrum_pads():
    assert spectral_peaks(np.zeros(129), 100.0, 2) == [(0.0, 0.0), (0.0, 0.0)]


def test_peak_ties_go_to_lower_frequency():
    m = np.zeros(129)
    m[[10, 20, 30]] = [5.0, 5.0, 7.0]
    assert spectral_peaks(m, 100.0, 3) == [(30 * 100 / 256, 7.0), (10 * 100 / 256, 5.0), (20 * 100 / 256, 5.0)]


def test_peaks_ignore_edge_bins():
    m = np.zeros(129)
    m[0] = 100.0
    m[128] = 50.0
    m[5] = 1.0
    assert spectral_peaks(m, 100.0, 2) == [(5 * 100 / 256, 1.0), (0.0, 0.0)]


# --- band power ----------------------------------------------------------


def test_dc_only_has_no_band_power():
    m = np.zeros(129)
    m[0] = 42.0
    np.testing.assert_array_equal(band_power(m, 100.0), np.zeros(6))


def test_three_hz_lands_in_band_three():
    x = _sine(3.0)
    ref = oracle_magnitude(x, 256)
    freqs = np.arange(129) * 100 / 256
    total = np.sum(ref[1:] ** 2) / 256
    in_band = np.sum(ref[(freqs >= 2) & (freqs < 4)] ** 2) / 256
    bp = band_power(fft_magnitude(x), 100.0)
    assert bp[2] == pytest.approx(in_band, rel=1e-9)
    assert bp[2] / total >= 0.9


def test_band_power_bounded_by_total():
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.normal(size=200)
        ref = oracle_magnitude(x, 256)
        total = np.sum(ref[1:] ** 2) / 256
        assert band_power(fft_magnitude(x), 100.0).sum() <= total * (1 + 1e-12)


def test_last_band_includes_nyquist():
    m = np.zeros(129)
    m[128] = 2.0
    assert band_power(m, 100.0)[-1] == pytest.approx(4.0 / 256)


def test_bad_bands():
    with pytest.raises(GaitError):
        FeatureConfig(bands=((1.0, 2.0), (1.5, 3.0)))
    with pytest.raises(GaitError):
        FeatureConfig(bands=((2.0, 1.0),))
    with pytest.raises(GaitError):
        FeatureConfig(n_fft=200)


# --- extract_features ----------------------------------------------------


def _window(data, rate=100.0):
    n = data.shape[0]
    rec = Recording("w", ActivityLabel.WALKING, rate, np.arange(n) * int(1000 / rate), data)
    return segment(rec, WindowConfig(n * 1000 / rate, n * 1000 / rate))[0]


def test_vector_lengths():
    rng = np.random.default_rng(0)
    assert extract_features(_window(rng.normal(size=(200, 3)))).shape == (39,)
    assert extract_features(_window(rng.normal(size=(200, 6)))).shape == (78,)
    assert len(FeatureConfig().feature_names(3)) == 39


def test_all_zero_window():
    np.testing.assert_array_equal(extract_features(_window(np.zeros((200, 3)))), np.zeros(39))


def test_golden_layout():
    # axis 0: 3 Hz sine offset by 0.5; axis 1: zeros; axis 2: constant 1
    data = np.zeros((200, 3))
    data[:, 0] = 0.5 + _sine(3.0)
    data[:, 2] = 1.0
    v = extract_features(_window(data)).reshape(3, 13)
    names = FeatureConfig().feature_names(3)
    assert names[:7] == [
        "accX_mean", "accX_std", "accX_rms", "accX_peak1_freq_hz",
        "accX_peak1_mag", "accX_peak2_freq_hz", "accX_peak2_mag",
    ]
    assert names[7] == "accX_band_power_1" and names[13] == "accY_mean"
    x = data[:, 0]
    assert v[0, 0] == pytest.approx(x.mean())
    assert v[0, 1] == pytest.approx(np.sqrt(np.mean((x - x.mean()) ** 2)))  # population std
    assert v[0, 2] == pytest.approx(sum_of_squares_rms(list(x)))
    assert abs(v[0, 3] - 3.0) <= 100 / 256
    ref = oracle_magnitude(x, 256)
    assert v[0, 4] == pytest.approx(ref.max(), rel=1e-9)
    assert np.argmax(v[0, 7:]) == 2  # [2, 4) Hz band
    np.testing.assert_array_equal(v[1], np.zeros(13))
    assert v[2, 0] == 1.0 and v[2, 1] == 0.0 and v[2, 2] == 1.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), s=st.floats(0.1, 10.0))
def test_scaling_per_field(seed, s):
    rng = np.random.default_rng(seed)
    t = np.arange(200) / 100
    data = np.stack([np.sin(2 * np.pi * 1.7 * t) + 0.3 * rng.normal(size=200) + 1.0 for _ in range(3)], axis=1)
    a = extract_array(data, 100.0).reshape(3, 13)
    b = extract_array(s * data, 100.0).reshape(3, 13)
    lin = [0, 1, 2, 4, 6]
    np.testing.assert_allclose(b[:, lin], s * a[:, lin], rtol=1e-9)
    np.testing.assert_array_equal(b[:, [3, 5]], a[:, [3, 5]])
    np.testing.assert_allclose(b[:, 7:], s * s * a[:, 7:], rtol=1e-9, atol=1e-300)


def test_extract_is_deterministic():
    data = np.random.default_rng(5).normal(size=(200, 3))
    assert extract_array(data, 100.0).tobytes() == extract_array(data.copy(), 100.0).tobytes()


def test_extract_rejects_1d():
    with pytest.raises(DimensionMismatch):
        extract_array(np.zeros(200), 100.0)


# --- normalizer ----------------------------------------------------------


def test_normalizer_zscores_training_set():
    x = np.random.default_rng(0).normal(3.0, 2.0, size=(500, 39))
    nz = fit_normalizer(x)
    z = nz(x)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-9)
    np.testing.assert_allclose(z.std(axis=0), 1.0, atol=1e-6)


def test_constant_column_maps_to_zero():
    x = np.random.default_rng(1).normal(size=(50, 4))
    x[:, 2] = 0.1
    z = fit_normalizer(x)(x)
    assert np.all(z[:, 2] == 0.0)


def test_normalizer_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    nz = fit_normalizer(rng.normal(size=(100, 39)))
    nz.save(tmp_path / "n.json")
    back = Normalizer.load(tmp_path / "n.json")
    v = rng.normal(size=(100, 39))
    assert nz(v).tobytes() == back(v).tobytes()


def test_normalizer_errors():
    with pytest.raises(EmptyTrainingSet):
        fit_normalizer(np.zeros((0, 39)))
    nz = fit_normalizer(np.ones((3, 5)))
    with pytest.raises(DimensionMismatch):
        nz(np.zeros(4))


def test_feature_csv(tmp_path):
    rec_data = np.random.default_rng(0).normal(size=(300, 3))
    rec = Recording("rid", ActivityLabel.WALKING, 100.0, np.arange(300) * 10, rec_data)
    wins = segment(rec, WindowConfig(2000, 80))
    feats = np.stack([extract_features(w) for w in wins])
    write_feature_csv(tmp_path / "f.csv", wins, feats)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].split(",")[:4] == ["recording_id", "start_ms", "label", "f0"]
    assert lines[0].split(",")[-1] == "f38"
    assert lines[2].startswith("rid,80,Walking,")
    assert len(lines) == 1 + len(wins)


def test_default_bands():
    assert DEFAULT_BANDS[0] == (0.5, 1.0) and DEFAULT_BANDS[-1] == (16.0, None)
    assert FeatureConfig().per_axis == 13
