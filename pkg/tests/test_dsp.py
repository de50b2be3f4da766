import numpy as np
import pytest

from popmetrics.dsp import (
    AudioClip,
    WavFormatError,
    decode_wav,
    frame_signal,
    hamming_window,
    magnitude_spectrum,
    mel_filterbank,
    mel_filterbank_energies,
    mfcc,
    resample_to,
)

import helpers
import oracles


# ---------------------------------------------------------------- decode_wav

def test_decode_silence():
    clip = decode_wav(helpers.wav_bytes_from_int16(np.zeros(44100, dtype=np.int16)))
    assert clip.sample_rate == 44100
    assert clip.samples.size == 44100
    assert np.all(clip.samples == 0.0)


def test_decode_stereo_opposite_channels_cancel():
    x = np.array([1000, -2000, 30000] * 50, dtype=np.int16)
    interleaved = np.empty(x.size * 2, dtype=np.int16)
    interleaved[0::2] = x
    interleaved[1::2] = -x
    clip = decode_wav(helpers.wav_bytes_from_int16(interleaved, channels=2))
    assert np.all(clip.samples == 0.0)


def test_decode_full_scale_square_wave_scaling():
    ints = np.full(1000, 32767, dtype=np.int16)
    clip = decode_wav(helpers.wav_bytes_from_int16(ints))
    assert np.all(clip.samples == 32767 / 32768)


def test_decode_rejects_bad_streams():
    good = helpers.wav_bytes_from_int16(np.zeros(100, dtype=np.int16))
    with pytest.raises(WavFormatError, match="RIFF"):
        decode_wav(b"not a wav file at all")
    # IEEE-float format tag
    with pytest.raises(WavFormatError, match="non-PCM"):
        decode_wav(good.replace(b"\x01\x00\x01\x00", b"\x03\x00\x01\x00", 1))
    # 8-bit depth
    bad_depth = bytearray(good)
    bad_depth[34] = 8
    with pytest.raises(WavFormatError, match="bit depth"):
        decode_wav(bytes(bad_depth))
    with pytest.raises(WavFormatError, match="truncated|missing"):
        decode_wav(good[:-50])


# ---------------------------------------------------------------- resampling

def test_resample_identity():
    clip = AudioClip(44100, helpers.sine(440, 1.0))
    out = resample_to(clip, 44100)
    assert out.samples is clip.samples


def test_resample_constant_stays_constant():
    clip = AudioClip(22050, np.full(22050, 0.25))
    out = resample_to(clip, 44100)
    assert out.samples.size == 44100
    assert np.allclose(out.samples, 0.25, atol=1e-12)


def test_resample_preserves_dominant_frequency():
    clip = AudioClip(22050, helpers.sine(440, 1.0, rate=22050))
    out = resample_to(clip, 44100)
    spectrum = np.abs(np.fft.rfft(out.samples))
    assert abs(int(np.argmax(spectrum)) - 440) <= 1  # 1 Hz bins on a 1 s clip


# ------------------------------------------------------------------- framing

def test_frame_counts_match_spec_examples():
    ten_s = AudioClip(44100, np.zeros(441000))
    assert frame_signal(ten_s, 2.97, 1.0).shape[0] == 8
    one_s = AudioClip(44100, np.zeros(44100))
    assert frame_signal(one_s, 0.025, 0.01).shape[0] == 98
    assert frame_signal(one_s, 1.0, 1.0).shape[0] == 1


def test_frame_counts_match_formula_on_random_triples():
    rng = np.random.default_rng(41)
    for _ in range(100):
        rate = int(rng.integers(8000, 48000))
        n = int(rng.integers(rate, rate * 5))
        hop_s = float(rng.uniform(0.01, 0.8))
        win_s = float(rng.uniform(hop_s, 1.0))
        frame_len = int(round(win_s * rate))
        if frame_len > n or frame_len < 1:
            continue
        clip = AudioClip(rate, np.zeros(n))
        frames = frame_signal(clip, win_s, hop_s)
        expected = oracles.frame_count_reference(n, frame_len, int(round(hop_s * rate)))
        assert frames.shape == (expected, frame_len)


def test_frame_signal_too_short_errors():
    with pytest.raises(ValueError, match="shorter"):
        frame_signal(AudioClip(44100, np.zeros(1000)), 1.0, 0.5)
    with pytest.raises(ValueError):
        frame_signal(AudioClip(44100, np.zeros(44100)), 0.5, 1.0)  # hop > window


# ----------------------------------------------------------------- windowing

def test_hamming_window_formula():
    out = hamming_window(np.ones(5))
    assert np.allclose(out, [0.08, 0.54, 1.0, 0.54, 0.08], atol=1e-12)
    n = 101
    mid = hamming_window(np.ones(n))[n // 2]
    assert mid == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        hamming_window(np.ones(1))


# -------------------------------------------------------------------- spectra

def test_magnitude_spectrum_zero_and_sine():
    assert np.all(magnitude_spectrum(np.zeros(64)) == 0.0)
    n, k = 256, 10
    frame = np.sin(2 * np.pi * k * np.arange(n) / n)
    spec = magnitude_spectrum(frame)
    assert spec[k] == pytest.approx(n / 2, rel=1e-9)
    others = np.delete(spec, k)
    assert np.max(others) < 1e-9 * n


def test_parseval_identity_on_random_frames():
    rng = np.random.default_rng(43)
    for _ in range(20):
        n = int(rng.integers(16, 2048)) * 2  # even frame lengths
        x = rng.normal(size=n)
        spec = magnitude_spectrum(x)
        lhs = np.sum(x**2)
        rhs = (spec[0] ** 2 + 2 * np.sum(spec[1:-1] ** 2) + spec[-1] ** 2) / n
        assert rhs == pytest.approx(lhs, rel=1e-6)


# ---------------------------------------------------------------- mel + mfcc

def test_mel_zero_spectrum_gives_zero_energies():
    energies = mel_filterbank_energies(np.zeros(257), 44100, 36)
    assert energies.shape == (36,)
    assert np.all(energies == 0.0)


def test_mel_single_band_support():
    weights_ref = oracles.mel_weights_reference(257, 44100, 12)
    # a bin covered by exactly one filter
    only_one = np.where((weights_ref > 0).sum(axis=0) == 1)[0]
    assert only_one.size > 0
    k = int(only_one[0])
    band = int(np.argmax(weights_ref[:, k]))
    spectrum = np.zeros(257)
    spectrum[k] = 2.0
    energies = mel_filterbank_energies(spectrum, 44100, 12)
    assert energies[band] > 0
    assert np.all(np.delete(energies, band) == 0.0)


def test_mel_flat_spectrum_proportional_to_filter_sums():
    weights_ref = oracles.mel_weights_reference(257, 44100, 36)
    flat = np.full(257, 3.0)
    energies = mel_filterbank_energies(flat, 44100, 36)
    assert np.allclose(energies, 3.0 * weights_ref.sum(axis=1), rtol=1e-9)


def test_mel_weights_match_reference_construction():
    for n_bands in (12, 36):
        ref = oracles.mel_weights_reference(552, 44100, n_bands)
        got = mel_filterbank(552, 44100, n_bands)
        assert np.allclose(got, ref, atol=1e-9)


def test_mel_linearity():
    rng = np.random.default_rng(47)
    spectrum = rng.uniform(size=257)
    one = mel_filterbank_energies(spectrum, 44100, 36)
    ten = mel_filterbank_energies(10.0 * spectrum, 44100, 36)
    assert np.allclose(ten, 10.0 * one, rtol=1e-12)


def test_mfcc_constant_energy_only_dc_coefficient():
    coeffs = mfcc(np.full(36, 2.5), 20)
    assert abs(coeffs[0]) > 1.0
    assert np.max(np.abs(coeffs[1:])) < 1e-10


def test_mfcc_zero_energy_finite():
    coeffs = mfcc(np.zeros(36), 20)
    assert np.all(np.isfinite(coeffs))
    expected_dc = 2 * 36 * np.log(1e-10)
    assert coeffs[0] == pytest.approx(expected_dc, rel=1e-12)
    assert np.max(np.abs(coeffs[1:])) < 1e-9


def test_mfcc_matches_hand_computed_dct():
    energies = np.array([1.0, 2.0, 4.0, 8.0])
    got = mfcc(energies, 4)
    ref = oracles.dct2_reference(np.log(energies + 1e-10))
    assert np.allclose(got, ref, atol=1e-9)


def test_mfcc_too_many_coefficients_errors():
    with pytest.raises(ValueError):
        mfcc(np.ones(10), 11)


# -------------------------------------------------------------- determinism

def test_dsp_operations_are_bit_deterministic():
    rng = np.random.default_rng(53)
    x = rng.normal(size=4096)
    assert np.array_equal(magnitude_spectrum(x), magnitude_spectrum(x.copy()))
    e = rng.uniform(size=36)
    assert np.array_equal(mfcc(e, 20), mfcc(e.copy(), 20))
    clip = AudioClip(22050, np.clip(rng.normal(0, 0.1, size=44100), -1, 1))
    a = resample_to(clip, 44100).samples
    b = resample_to(AudioClip(22050, clip.samples.copy()), 44100).samples
    assert np.array_equal(a, b)


def test_audio_clip_validation():
    with pytest.raises(ValueError):
        AudioClip(0, np.zeros(10))
    with pytest.raises(ValueError):
        AudioClip(44100, np.array([]))
    with pytest.raises(ValueError):
        AudioClip(44100, np.array([np.nan]))
    with pytest.raises(ValueError):
        AudioClip(44100, np.array([1.5]))
