import numpy as np
import pytest

from src.dsp.spectral import (
    ComplexSpectrogram,
    check_cola,
    denormalize,
    fit_stats,
    hann_window,
    istft,
    log_mag,
    magnitude_db,
    normalize,
    stft,
)
from src.exceptions import InvalidArgumentError
from src.signals.siggen import SourceSignal

SR = 4000


def test_sine_lands_in_expected_bin():
    t = np.arange(SR) / SR
    spec = stft(np.sin(2 * np.pi * 250.0 * t), 256, 64, SR)
    peak_bins = np.argmax(np.abs(spec.bins), axis=0)
    assert np.all(peak_bins[1:-1] == 16)


def test_stft_matches_naive_dft_per_frame(rng):
    x = rng.standard_normal(1024)
    spec = stft(x, 256, 64)
    w = hann_window(256)
    n = np.arange(256)
    k = np.arange(129)[:, np.newaxis]
    basis = np.exp(-2j * np.pi * k * n / 256)
    for t in (0, 5, spec.n_frames - 1):
        frame = x[t * 64:t * 64 + 256] * w
        np.testing.assert_allclose(spec.bins[:, t], basis @ frame, atol=1e-9)


def test_frame_energy_obeys_parseval(rng):
    x = rng.standard_normal(2048)
    spec = stft(x, 256, 64)
    power = np.abs(spec.bins) ** 2
    full = power[0] + power[-1] + 2.0 * power[1:-1].sum(axis=0)
    frames = np.stack([x[t * 64:t * 64 + 256] * hann_window(256) for t in range(spec.n_frames)])
    np.testing.assert_allclose(full, 256 * (frames ** 2).sum(axis=1), rtol=1e-10)


@pytest.mark.parametrize("a,b", [(1.0, 1.0), (2.5, -0.5), (-1.0, 0.0)])
def test_stft_is_linear(rng, a, b):
    x = rng.standard_normal(1500)
    y = rng.standard_normal(1500)
    combined = stft(a * x + b * y, 256, 64).bins
    np.testing.assert_allclose(combined, a * stft(x, 256, 64).bins + b * stft(y, 256, 64).bins, atol=1e-10)


def test_zero_signal_gives_zero_spectrogram():
    spec = stft(np.zeros(2048), 256, 64)
    assert not np.any(spec.bins)
    assert not np.any(istft(spec))


def test_signal_of_exactly_n_fft_is_one_frame():
    spec = stft(np.ones(256), 256, 64)
    assert spec.n_frames == 1
    assert spec.n_bins == 129


def test_stft_keeps_sample_rate_of_signal_objects():
    spec = stft(SourceSignal(np.zeros(512), 8000), 256, 64)
    assert spec.sample_rate == 8000


@pytest.mark.parametrize("n_fft,hop", [(256, 64), (512, 128), (256, 32)])
def test_round_trip_is_exact_in_interior(rng, n_fft, hop):
    errors = []
    for _ in range(20):
        x = rng.uniform(-1.0, 1.0, 2 * SR)
        y = istft(stft(x, n_fft, hop))
        interior = slice(n_fft, y.size - n_fft)
        errors.append(np.linalg.norm(y[interior] - x[interior]) / np.linalg.norm(x[interior]))
    assert max(errors) < 1e-6


def test_single_frame_inverse_returns_windowed_sine():
    n = np.arange(256)
    windowed = np.sin(2 * np.pi * 10 * n / 256) * hann_window(256)
    np.testing.assert_allclose(istft(stft(windowed, 256, 64)), windowed, atol=1e-6)


def test_hop_must_be_cola():
    check_cola(256, 64)
    with pytest.raises(InvalidArgumentError):
        check_cola(256, 100)
    # Squared Hann windows at 50% overlap do not add to a constant.
    with pytest.raises(InvalidArgumentError):
        check_cola(256, 128)


def test_stft_rejects_bad_arguments():
    with pytest.raises(InvalidArgumentError):
        stft(np.zeros(1000), 250, 50)
    with pytest.raises(InvalidArgumentError):
        stft(np.zeros(100), 256, 64)


def test_log_mag_floor_and_values():
    bins = np.zeros((129, 3), dtype=complex)
    bins[0, 0] = 1.0
    bins[1, 1] = -np.exp(2.0)
    bins[2, 2] = 1j
    features = log_mag(ComplexSpectrogram(bins, 256, 64, SR), floor=1e-5)
    assert features.shape == (3, 129)
    assert features[0, 0] == 0.0
    assert features[1, 1] == pytest.approx(2.0)
    assert features[2, 2] == 0.0
    assert features[0, 5] == pytest.approx(np.log(1e-5))
    assert np.log(1e-5) == pytest.approx(-11.5129, abs=1e-4)


def test_normalize_with_own_stats(rng):
    frames = rng.normal(3.0, 2.0, size=(200, 10))
    frames[:, 4] = 7.0
    stats = fit_stats(frames)
    normed = normalize(frames, stats)
    varying = np.arange(10) != 4
    assert np.all(np.abs(normed.mean(axis=0)) < 1e-9)
    np.testing.assert_allclose(normed.std(axis=0)[varying], 1.0, atol=1e-9)
    np.testing.assert_array_equal(normed[:, 4], 0.0)
    np.testing.assert_allclose(denormalize(normed, stats), frames, atol=1e-9)


def test_normalize_rejects_dimension_mismatch(rng):
    stats = fit_stats(rng.standard_normal((5, 4)))
    with pytest.raises(InvalidArgumentError):
        normalize(rng.standard_normal((5, 3)), stats)


def test_magnitude_db_layout():
    bins = np.full((3, 2), 10.0, dtype=complex)
    db = magnitude_db(ComplexSpectrogram(bins, 4, 1, SR))
    assert db.shape == (3, 2)
    np.testing.assert_allclose(db, 20.0)
