"""Audio sample containers, WAV file I/O, and channel utilities.

Samples live in numpy float64 arrays of shape (channels, n) in the nominal
range [-1, 1]; excursions outside that range are allowed and preserved.
All randomness in the package flows through numpy PCG64 generators created
by :func:`make_rng`, so a fixed seed reproduces every draw across platforms.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np


class AudioError(Exception):
    """Base class for audio container and file errors."""


class UnsupportedEncodingError(AudioError):
    """WAV file uses an encoding other than PCM16/PCM24/float32."""


class UnsupportedChannelCountError(AudioError):
    """WAV file has more than two channels."""


class TruncatedFileError(AudioError):
    """WAV file ends before the declared chunk data."""


@dataclass(frozen=True)
class AudioBuffer:
    """Immutable multichannel audio: float64 samples, shape (channels, n)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        data = np.asarray(self.samples, dtype=np.float64)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise AudioError("samples must be 1-D or (channels, n)")
        if data.shape[0] not in (1, 2):
            raise UnsupportedChannelCountError(
                f"expected 1 or 2 channels, got {data.shape[0]}"
            )
        if int(self.sample_rate) <= 0:
            raise AudioError(f"sample_rate must be positive, got {self.sample_rate}")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic PCG64 generator; same seed gives the same stream everywhere."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_seeds(seed: int, n: int) -> list[int]:
    """Derive n independent child seeds (seed-splitting by stream index)."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def mid_side_split(buffer: AudioBuffer) -> tuple[AudioBuffer, AudioBuffer]:
    """Split into mid = (L+R)/2 and side = (L-R)/2 mono buffers.

    Mono input follows the package-wide convention: mid is the signal itself
    and side is silence.
    """
    if buffer.channels == 1:
        mid = buffer.samples[0]
        side = np.zeros_like(mid)
    else:
        left, right = buffer.samples
        mid = 0.5 * (left + right)
        side = 0.5 * (left - right)
    return (
        AudioBuffer(mid, buffer.sample_rate),
        AudioBuffer(side, buffer.sample_rate),
    )


def apply_gain_db(buffer: AudioBuffer, gain_db: float) -> AudioBuffer:
    if not np.isfinite(gain_db):
        raise AudioError("gain must be finite")
    return AudioBuffer(buffer.samples * 10.0 ** (gain_db / 20.0), buffer.sample_rate)


def random_crop(buffer: AudioBuffer, length: int, rng: np.random.Generator) -> AudioBuffer:
    """Contiguous random crop of `length` samples; uniform start offset."""
    if length > buffer.num_samples:
        raise AudioError(
            f"crop length {length} exceeds buffer length {buffer.num_samples}"
        )
    start = int(rng.integers(0, buffer.num_samples - length + 1))
    return AudioBuffer(buffer.samples[:, start : start + length], buffer.sample_rate)


_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def read_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file: PCM 16/24-bit or IEEE float 32-bit, 1-2 channels.

    Integer PCM is scaled to [-1, 1) by dividing by 2^(bits-1).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12:
        raise TruncatedFileError(f"{path}: too short for a RIFF header")
    if raw[0:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise UnsupportedEncodingError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + size]
        if len(body) < size and cid in (b"fmt ", b"data"):
            raise TruncatedFileError(f"{path}: chunk {cid!r} truncated")
        if cid == b"fmt ":
            fmt = body
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)

    if fmt is None or data is None:
        raise TruncatedFileError(f"{path}: missing fmt or data chunk")
    if len(fmt) < 16:
        raise TruncatedFileError(f"{path}: fmt chunk too short")
    tag, channels, sample_rate, _, block_align, bits = struct.unpack_from(
        "<HHIIHH", fmt, 0
    )
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise TruncatedFileError(f"{path}: extensible fmt chunk too short")
        (tag,) = struct.unpack_from("<H", fmt, 24)
    if channels > 2:
        raise UnsupportedChannelCountError(f"{path}: {channels} channels")
    if channels < 1:
        raise UnsupportedEncodingError(f"{path}: zero channels")

    if tag == _WAVE_FORMAT_PCM and bits == 16:
        frames = np.frombuffer(data[: len(data) - len(data) % (2 * channels)], "<i2")
        samples = frames.astype(np.float64) / 32768.0
    elif tag == _WAVE_FORMAT_PCM and bits == 24:
        usable = len(data) - len(data) % (3 * channels)
        b = np.frombuffer(data[:usable], np.uint8).reshape(-1, 3).astype(np.int64)
        vals = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
        samples = vals.astype(np.float64) / float(1 << 23)
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        frames = np.frombuffer(data[: len(data) - len(data) % (4 * channels)], "<f4")
        samples = frames.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{path}: unsupported encoding (format tag {tag}, {bits} bits)"
        )

    samples = samples.reshape(-1, channels).T
    return AudioBuffer(samples, sample_rate)


def write_wav(buffer: AudioBuffer, path, encoding: str = "float32") -> None:
    """Write PCM16 or float32 WAV. The file appears atomically (temp + rename)."""
    if encoding == "pcm16":
        scaled = np.rint(buffer.samples.T * 32768.0)
        frames = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
        tag, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        frames = buffer.samples.T.astype("<f4").tobytes()
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise UnsupportedEncodingError(f"unsupported encoding {encoding!r}")

    block_align = buffer.channels * bits // 8
    fmt = struct.pack(
        "<HHIIHH",
        tag,
        buffer.channels,
        buffer.sample_rate,
        buffer.sample_rate * block_align,
        block_align,
        bits,
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(frames)) + frames
    blob = b"RIFF" + struct.pack("<I", len(body)) + body

    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".wav.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
