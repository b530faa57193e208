"""Production-style features: STFT, log-mel, MFCC, the mid/side embedding,
and cosine similarity.

The embedding summarizes a recording's production attributes (spectral
envelope, dynamics, stereo field) in 88 dimensions: 44 per mid/side half,
each half L2-normalized so similarity is insensitive to overall level of
either half.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .audio import AudioBuffer, mid_side_split


class FeatureError(Exception):
    pass


@dataclass(frozen=True)
class SpectrogramConfig:
    window_size: int = 2048
    hop: int = 512
    n_mels: int = 128
    clip_lo: float = -80.0  # dB
    clip_hi: float = 40.0  # dB

    def __post_init__(self):
        if self.hop > self.window_size:
            raise FeatureError("hop must be <= window_size")
        if self.clip_lo >= self.clip_hi:
            raise FeatureError("clip_lo must be < clip_hi")


DEFAULT_CONFIG = SpectrogramConfig()

EMBED_DIM = 88
HALF_DIM = 44
N_MFCC = 20
EMBED_MAX_SECONDS = 10.0  # longer buffers are embedded from their first 10 s


_LOCAL = threading.local()


def _workspace(shape) -> np.ndarray:
    """Per-thread reusable frame buffer; avoids large allocations per call."""
    buffers = getattr(_LOCAL, "buffers", None)
    if buffers is None:
        buffers = _LOCAL.buffers = {}
    buf = buffers.get(shape)
    if buf is None:
        buf = buffers[shape] = np.empty(shape, dtype=np.float32)
    return buf


@lru_cache(maxsize=8)
def _hann(n: int) -> np.ndarray:
    # periodic Hann
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)).astype(np.float32)


def stft_mag(signal: np.ndarray, cfg: SpectrogramConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Frame-major magnitude spectrogram, shape (frames, window_size // 2 + 1).

    Signals shorter than one window are zero-padded to a single frame.
    Runs in float32; this is the hot path of the optimizer's objective.
    """
    signal = np.asarray(signal, dtype=np.float32)
    if signal.size < cfg.window_size:
        signal = np.pad(signal, (0, cfg.window_size - signal.size))
    windows = np.lib.stride_tricks.sliding_window_view(signal, cfg.window_size)
    strided = windows[:: cfg.hop]
    frames = _workspace(strided.shape)
    np.multiply(strided, _hann(cfg.window_size), out=frames)
    return np.abs(scipy.fft.rfft(frames, axis=1))


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int) -> np.ndarray:
    """Triangular HTK-mel filterbank, shape (n_mels, n_fft // 2 + 1), 0..fs/2."""
    n_bins = n_fft // 2 + 1
    freqs = np.arange(n_bins) * sample_rate / n_fft
    edges = _mel_to_hz(np.linspace(0.0, _hz_to_mel(sample_rate / 2.0), n_mels + 2))
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / max(mid - lo, 1e-12)
        falling = (hi - freqs) / max(hi - mid, 1e-12)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb.astype(np.float32)


def _log_mel_from_power(
    power: np.ndarray, cfg: SpectrogramConfig, sample_rate: int
) -> np.ndarray:
    fb = mel_filterbank(sample_rate, cfg.window_size, cfg.n_mels)
    mel_power = power @ fb.T
    db = 10.0 * np.log10(mel_power + np.float32(1e-10))
    db = np.clip(db, cfg.clip_lo, cfg.clip_hi)
    return (db - cfg.clip_lo) / (cfg.clip_hi - cfg.clip_lo) * 2.0 - 1.0


def log_mel(
    mag: np.ndarray, cfg: SpectrogramConfig, sample_rate: int
) -> np.ndarray:
    """Clipped, [-1, 1]-scaled log-mel spectrogram, shape (frames, n_mels)."""
    power = np.square(np.asarray(mag, dtype=np.float32))
    return _log_mel_from_power(power, cfg, sample_rate)


@lru_cache(maxsize=8)
def _dct_matrix(n_coeffs: int, n_mels: int) -> np.ndarray:
    # orthonormal DCT-II, first n_coeffs rows
    full = scipy.fft.dct(np.eye(n_mels), type=2, norm="ortho", axis=0)
    return full[:n_coeffs]


def mfcc(log_mel_matrix: np.ndarray, n_coeffs: int = N_MFCC) -> np.ndarray:
    """Orthonormal DCT-II along the mel axis; first n_coeffs kept per frame."""
    log_mel_matrix = np.asarray(log_mel_matrix, dtype=np.float64)
    n_mels = log_mel_matrix.shape[1]
    if n_coeffs > n_mels:
        raise FeatureError("n_coeffs must be <= number of mel bands")
    return log_mel_matrix @ _dct_matrix(n_coeffs, n_mels).T


@dataclass(frozen=True)
class Embedding:
    """88-dim production-style vector; dims 0..43 mid half, 44..87 side half."""

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (EMBED_DIM,):
            raise FeatureError(f"embedding must have {EMBED_DIM} dims")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def _channel_features(signal: np.ndarray, sample_rate: int, cfg: SpectrogramConfig):
    """44-dim half: MFCC means/stds, level, crest, centroid, bandwidth."""
    if not np.any(signal):
        return np.zeros(HALF_DIM)
    mag = stft_mag(signal, cfg)
    power = np.square(mag)
    lm = _log_mel_from_power(power, cfg, sample_rate)
    coeffs = mfcc(lm, N_MFCC)

    rms = float(np.sqrt(np.mean(signal**2)))
    peak = float(np.max(np.abs(signal)))
    crest_db = 20.0 * np.log10(peak / rms) if rms > 0.0 else 0.0

    bins = (np.arange(mag.shape[1]) * sample_rate / cfg.window_size).astype(
        np.float32
    )
    frame_power = power.sum(axis=1) + np.float32(1e-12)
    centroid = (power @ bins) / frame_power
    # bandwidth via E[f^2] - E[f]^2, the power-weighted spectral spread
    mean_f2 = (power @ np.square(bins)) / frame_power
    bandwidth = np.sqrt(np.clip(mean_f2 - np.square(centroid), 0.0, None))
    nyquist = sample_rate / 2.0

    half = np.concatenate(
        [
            coeffs.mean(axis=0),
            coeffs.std(axis=0),
            [np.log10(rms + 1e-8)],
            [crest_db],
            [centroid.mean() / nyquist],
            [bandwidth.mean() / nyquist],
        ]
    )
    norm = np.linalg.norm(half)
    return half / norm if norm > 0.0 else half


def embed(buffer: AudioBuffer, cfg: SpectrogramConfig = DEFAULT_CONFIG) -> Embedding:
    """Mid/side production-style embedding; each half unit-norm (or zero)."""
    if buffer.num_samples < cfg.window_size:
        raise FeatureError(
            f"buffer too short to embed: {buffer.num_samples} < {cfg.window_size}"
        )
    limit = int(EMBED_MAX_SECONDS * buffer.sample_rate)
    if buffer.num_samples > limit:
        buffer = AudioBuffer(buffer.samples[:, :limit], buffer.sample_rate)
    mid, side = mid_side_split(buffer)
    halves = [
        _channel_features(mid.samples[0], buffer.sample_rate, cfg),
        _channel_features(side.samples[0], buffer.sample_rate, cfg),
    ]
    return Embedding(np.concatenate(halves))


def cosine_similarity(a, b, eps: float = 1e-8) -> float:
    """Cosine similarity with an epsilon floor on the norm product."""
    va = a.values if isinstance(a, Embedding) else np.asarray(a, dtype=np.float64)
    vb = b.values if isinstance(b, Embedding) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise FeatureError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    denom = max(np.linalg.norm(va) * np.linalg.norm(vb), eps)
    return float(np.dot(va, vb) / denom)


def style_similarity(x: AudioBuffer, y: AudioBuffer) -> float:
    """Cosine similarity between the two buffers' style embeddings."""
    if x.sample_rate != y.sample_rate:
        raise FeatureError(
            f"sample-rate mismatch: {x.sample_rate} vs {y.sample_rate}"
        )
    return cosine_similarity(embed(x), embed(y))
