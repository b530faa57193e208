import numpy as np
import pytest

from styletune.audio import AudioBuffer, apply_gain_db, make_rng
from styletune.features import (
    DEFAULT_CONFIG,
    EMBED_DIM,
    Embedding,
    FeatureError,
    SpectrogramConfig,
    cosine_similarity,
    embed,
    log_mel,
    mel_filterbank,
    mfcc,
    stft_mag,
    style_similarity,
)


def test_config_validation():
    with pytest.raises(FeatureError):
        SpectrogramConfig(window_size=512, hop=1024)
    with pytest.raises(FeatureError):
        SpectrogramConfig(clip_lo=40.0, clip_hi=-80.0)


def test_stft_frame_count():
    sig = np.zeros(48000)
    assert stft_mag(sig).shape == (90, 1025)


def test_stft_frame_count_formula():
    for n in (2048, 2049, 4096, 10000, 48000):
        frames = (n - 2048) // 512 + 1
        assert stft_mag(np.zeros(n)).shape[0] == frames


def test_stft_short_signal_padded():
    assert stft_mag(np.zeros(100)).shape == (1, 1025)


def test_stft_silence():
    assert not np.any(stft_mag(np.zeros(8192)))


def test_stft_sine_bin():
    # sine at exactly bin 23 of a 2048-point FFT
    fs = 48000
    f = 23 * fs / 2048.0
    t = np.arange(fs) / fs
    mag = stft_mag(np.sin(2 * np.pi * f * t))
    assert np.all(np.argmax(mag, axis=1) == 23)


def test_mel_filterbank_shape_and_coverage():
    fb = mel_filterbank(48000, 2048, 128)
    assert fb.shape == (128, 1025)
    assert np.all(fb >= 0.0)
    # every band has some support
    assert np.all(fb.sum(axis=1) > 0.0)


def test_log_mel_silence_floor():
    mag = np.zeros((4, 1025))
    lm = log_mel(mag, DEFAULT_CONFIG, 48000)
    assert np.allclose(lm, -1.0)


def test_log_mel_scaling_points():
    # a cell at exactly -20 dB maps to 0, at >= +40 dB maps to +1
    fb = mel_filterbank(48000, 2048, 128)
    col = np.argmax(fb[0])
    weight = fb[0, col]
    for target_db, expected in ((-20.0, 0.0), (60.0, 1.0)):
        power = 10.0 ** (target_db / 10.0) / weight
        mag = np.zeros((1, 1025))
        mag[0, col] = np.sqrt(power)
        lm = log_mel(mag, DEFAULT_CONFIG, 48000)
        assert lm[0, 0] == pytest.approx(expected, abs=1e-3)


def test_log_mel_bounded():
    r = make_rng(1)
    mag = r.uniform(0.0, 100.0, (10, 1025))
    lm = log_mel(mag, DEFAULT_CONFIG, 48000)
    assert np.all(lm >= -1.0) and np.all(lm <= 1.0)


def test_mfcc_constant_input():
    lm = np.full((5, 128), 0.3)
    coeffs = mfcc(lm)
    assert np.all(np.abs(coeffs[:, 1:]) < 1e-9)
    assert np.all(np.abs(coeffs[:, 0]) > 0.0)


def test_mfcc_zero_input():
    assert not np.any(mfcc(np.zeros((3, 128))))


def test_mfcc_orthonormality():
    # DCT of a basis cosine lands on a single unit coefficient
    import scipy.fft

    full = scipy.fft.dct(np.eye(128), type=2, norm="ortho", axis=0)
    basis = full[7]  # row 7 of the orthonormal DCT matrix
    coeffs = mfcc(basis[np.newaxis, :])
    expect = np.zeros(20)
    expect[7] = 1.0
    assert np.max(np.abs(coeffs[0] - expect)) < 1e-9
    # full-matrix orthonormality
    assert np.max(np.abs(full @ full.T - np.eye(128))) < 1e-9


def test_mfcc_rejects_too_many_coeffs():
    with pytest.raises(FeatureError):
        mfcc(np.zeros((2, 10)), n_coeffs=11)


def test_embedding_dimension_checked():
    with pytest.raises(FeatureError):
        Embedding(np.zeros(87))


def test_embed_dimension_and_half_norms(stereo_noise):
    z = embed(stereo_noise).values
    assert z.shape == (EMBED_DIM,)
    assert np.linalg.norm(z[:44]) == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(z[44:]) == pytest.approx(1.0, abs=1e-9)


def test_embed_mono_side_zero(mono_noise):
    z = embed(mono_noise).values
    assert not np.any(z[44:])
    assert np.linalg.norm(z[:44]) == pytest.approx(1.0, abs=1e-9)


def test_embed_too_short():
    with pytest.raises(FeatureError):
        embed(AudioBuffer(np.zeros(1000), 48000))


def test_embed_uses_first_ten_seconds():
    r = make_rng(8)
    long = r.standard_normal((2, 48000 * 12)) * 0.2
    a = embed(AudioBuffer(long, 48000))
    b = embed(AudioBuffer(long[:, : 48000 * 10], 48000))
    assert np.array_equal(a.values, b.values)


def test_cosine_basics():
    a = np.zeros(88)
    a[0] = 1.0
    b = np.zeros(88)
    b[1] = 1.0
    assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-9)
    assert cosine_similarity(a, b) == 0.0
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == (
        pytest.approx(1.0 / np.sqrt(2.0))
    )


def test_cosine_zero_vector():
    assert cosine_similarity(np.zeros(4), np.ones(4)) == 0.0


def test_cosine_scale_invariant(stereo_noise):
    z = embed(stereo_noise)
    assert cosine_similarity(z.values, 7.5 * z.values) == pytest.approx(1.0, abs=1e-9)


def test_cosine_dimension_mismatch():
    with pytest.raises(FeatureError):
        cosine_similarity(np.zeros(3), np.zeros(4))


def test_style_similarity_self(stereo_noise):
    assert style_similarity(stereo_noise, stereo_noise) == pytest.approx(1.0, abs=1e-9)


def test_style_similarity_symmetric(stereo_noise, mono_noise):
    assert style_similarity(stereo_noise, mono_noise) == pytest.approx(
        style_similarity(mono_noise, stereo_noise)
    )


def test_style_similarity_rate_mismatch(stereo_noise):
    other = AudioBuffer(stereo_noise.samples, 44100)
    with pytest.raises(FeatureError):
        style_similarity(stereo_noise, other)


def test_processing_moves_embedding_more_than_content():
    # heavy lowpass changes style more than a different noise realization
    from styletune.bench import pink_noise
    from styletune.effects import get_descriptor, process_effect, unmap_param

    desc = get_descriptor("lowpass")
    norm = np.array([unmap_param(500.0, desc.params[0]),
                     unmap_param(0.707, desc.params[1])])
    wins = 0
    for seed in range(20):
        x = AudioBuffer(pink_noise(48000, make_rng(seed)), 48000)
        x2 = AudioBuffer(pink_noise(48000, make_rng(1000 + seed)), 48000)
        processed = process_effect("lowpass", x, norm)
        if style_similarity(x, processed) < style_similarity(x, x2):
            wins += 1
    assert wins >= 15
