"""Built-in parametric audio effects with a normalized-parameter interface.

Every effect processes an AudioBuffer given a vector of control values in
[0, 1]; the mapping to physical units (Hz, dB, ms, ...) is declared per
parameter. Filters follow the audio-EQ cookbook biquad forms; the
time-variant parts (compressor ballistics, delay line, reverb combs) run
in numba kernels for speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.signal import lfilter

from .audio import AudioBuffer


class EffectError(Exception):
    pass


class UnknownEffectError(EffectError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    """One control parameter: physical bounds and mapping curve."""

    name: str
    lo: float
    hi: float
    curve: str = "linear"  # "linear" or "log"
    unit: str = ""

    def __post_init__(self):
        if not self.lo < self.hi:
            raise EffectError(f"{self.name}: lo must be < hi")
        if self.curve == "log" and self.lo <= 0:
            raise EffectError(f"{self.name}: log curve requires lo > 0")
        if self.curve not in ("linear", "log"):
            raise EffectError(f"{self.name}: unknown curve {self.curve!r}")


@dataclass(frozen=True)
class EffectDescriptor:
    effect_id: str
    params: tuple[ParamSpec, ...]

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise EffectError(f"{self.effect_id}: duplicate parameter names")

    @property
    def num_params(self) -> int:
        return len(self.params)

    def param(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise EffectError(f"{self.effect_id}: no parameter {name!r}")


def map_param(norm: float, spec: ParamSpec) -> float:
    """Normalized [0,1] -> physical value; out-of-range input is clamped."""
    t = min(max(float(norm), 0.0), 1.0)
    if spec.curve == "log":
        return spec.lo * (spec.hi / spec.lo) ** t
    return spec.lo + t * (spec.hi - spec.lo)


def unmap_param(value: float, spec: ParamSpec) -> float:
    """Physical value -> normalized [0,1] (inverse of map_param), clamped."""
    if spec.curve == "log":
        t = math.log(value / spec.lo) / math.log(spec.hi / spec.lo)
    else:
        t = (value - spec.lo) / (spec.hi - spec.lo)
    return min(max(t, 0.0), 1.0)


# ---------------------------------------------------------------------------
# biquad filters (audio-EQ cookbook, a0 normalized to 1)

def compute_biquad(kind: str, f0: float, gain_db: float, q: float, fs: float):
    """Return (b0, b1, b2, a1, a2) for one second-order section."""
    if not 0.0 < f0 < fs / 2.0:
        raise EffectError(f"biquad f0 {f0} out of range (0, {fs / 2})")
    if q <= 0.0:
        raise EffectError("biquad q must be positive")
    a = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * math.pi * f0 / fs
    cw = math.cos(w0)
    alpha = math.sin(w0) / (2.0 * q)
    if kind == "lowpass":
        b0 = (1.0 - cw) / 2.0
        b1 = 1.0 - cw
        b2 = (1.0 - cw) / 2.0
        a0 = 1.0 + alpha
        a1 = -2.0 * cw
        a2 = 1.0 - alpha
    elif kind == "highpass":
        b0 = (1.0 + cw) / 2.0
        b1 = -(1.0 + cw)
        b2 = (1.0 + cw) / 2.0
        a0 = 1.0 + alpha
        a1 = -2.0 * cw
        a2 = 1.0 - alpha
    elif kind == "peaking":
        b0 = 1.0 + alpha * a
        b1 = -2.0 * cw
        b2 = 1.0 - alpha * a
        a0 = 1.0 + alpha / a
        a1 = -2.0 * cw
        a2 = 1.0 - alpha / a
    elif kind == "low_shelf":
        sq = 2.0 * math.sqrt(a) * alpha
        b0 = a * ((a + 1) - (a - 1) * cw + sq)
        b1 = 2 * a * ((a - 1) - (a + 1) * cw)
        b2 = a * ((a + 1) - (a - 1) * cw - sq)
        a0 = (a + 1) + (a - 1) * cw + sq
        a1 = -2 * ((a - 1) + (a + 1) * cw)
        a2 = (a + 1) + (a - 1) * cw - sq
    elif kind == "high_shelf":
        sq = 2.0 * math.sqrt(a) * alpha
        b0 = a * ((a + 1) + (a - 1) * cw + sq)
        b1 = -2 * a * ((a - 1) + (a + 1) * cw)
        b2 = a * ((a + 1) + (a - 1) * cw - sq)
        a0 = (a + 1) - (a - 1) * cw + sq
        a1 = 2 * ((a - 1) - (a + 1) * cw)
        a2 = (a + 1) - (a - 1) * cw - sq
    else:
        raise EffectError(f"unknown biquad kind {kind!r}")
    return (b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0)


def _biquad(x: np.ndarray, coeffs) -> np.ndarray:
    b0, b1, b2, a1, a2 = coeffs
    return lfilter([b0, b1, b2], [1.0, a1, a2], x)


# ---------------------------------------------------------------------------
# numba kernels for the time-variant parts

@njit(cache=True, nogil=True)
def _compressor_gain_db(level_db, threshold, ratio, atk, rel):
    n = level_db.shape[0]
    gain = np.empty(n)
    g = 0.0
    inv = 1.0 / ratio - 1.0
    for i in range(n):
        over = level_db[i] - threshold
        target = inv * over if over > 0.0 else 0.0
        if target < g:  # more reduction: attack ballistics
            g = atk * g + (1.0 - atk) * target
        else:
            g = rel * g + (1.0 - rel) * target
        gain[i] = g
    return gain


@njit(cache=True, nogil=True)
def _delay_line(x, delay, feedback):
    # fractional delay via linear interpolation; delay >= 1 sample
    n = x.shape[0]
    written = np.zeros(n)
    wet = np.zeros(n)
    for i in range(n):
        pos = i - delay
        i0 = int(math.floor(pos))
        frac = pos - i0
        s = 0.0
        if i0 >= 0:
            s += written[i0] * (1.0 - frac)
        if i0 + 1 >= 0:
            s += written[i0 + 1] * frac
        wet[i] = s
        written[i] = x[i] + feedback * s
    return wet


@njit(cache=True, nogil=True)
def _comb_damped(x, delay, feedback, damp):
    # fractional delay keeps the response continuous in the delay length.
    # Cubic Lagrange interpolation (not linear) is used because linear
    # interpolation acts as a lowpass whose strength varies with the
    # fractional part, which ripples the output brightness as the delay
    # sweeps; the cubic kernel keeps the response nearly flat.
    n = x.shape[0]
    size = int(math.ceil(delay)) + 4
    buf = np.zeros(size)
    out = np.empty(n)
    store = 0.0
    idx = 0
    for i in range(n):
        pos = idx - delay
        if pos < 0.0:
            pos += size
        i1 = int(pos)
        f = pos - i1
        i0 = i1 - 1
        if i0 < 0:
            i0 += size
        i2 = i1 + 1
        if i2 >= size:
            i2 -= size
        i3 = i2 + 1
        if i3 >= size:
            i3 -= size
        c0 = -f * (f - 1.0) * (f - 2.0) / 6.0
        c1 = (f * f - 1.0) * (f - 2.0) / 2.0
        c2 = -f * (f + 1.0) * (f - 2.0) / 2.0
        c3 = f * (f * f - 1.0) / 6.0
        y = c0 * buf[i0] + c1 * buf[i1] + c2 * buf[i2] + c3 * buf[i3]
        out[i] = y
        store = y * (1.0 - damp) + store * damp
        buf[idx] = x[i] + feedback * store
        idx += 1
        if idx == size:
            idx = 0
    return out


@njit(cache=True, nogil=True)
def _allpass(x, delay_len, g):
    n = x.shape[0]
    buf = np.zeros(delay_len)
    out = np.empty(n)
    idx = 0
    for i in range(n):
        d = buf[idx]
        y = d - g * x[i]
        buf[idx] = x[i] + g * y
        out[i] = y
        idx += 1
        if idx == delay_len:
            idx = 0
    return out


# ---------------------------------------------------------------------------
# effect processors: (samples (ch, n) float64, fs, {param: physical}) -> samples

def _fx_gain(x, fs, p):
    return x * 10.0 ** (p["level"] / 20.0)


def _fx_lowpass(x, fs, p):
    f0 = min(p["cutoff"], 0.499 * fs)
    coeffs = compute_biquad("lowpass", f0, 0.0, p["q"], fs)
    return np.stack([_biquad(ch, coeffs) for ch in x])


def _fx_highpass(x, fs, p):
    coeffs = compute_biquad("highpass", p["cutoff"], 0.0, p["q"], fs)
    return np.stack([_biquad(ch, coeffs) for ch in x])


def _fx_parametric_eq(x, fs, p):
    sections = [
        compute_biquad("low_shelf", p["ls_freq"], p["ls_gain"], 0.707, fs),
        compute_biquad("peaking", p["p1_freq"], p["p1_gain"], p["p1_q"], fs),
        compute_biquad("peaking", p["p2_freq"], p["p2_gain"], p["p2_q"], fs),
        compute_biquad("high_shelf", min(p["hs_freq"], 0.499 * fs), p["hs_gain"], 0.707, fs),
    ]
    out = x
    for coeffs in sections:
        out = np.stack([_biquad(ch, coeffs) for ch in out])
    return out


_DETECTOR_MS = 10.0  # fixed pre-smoothing of |x| before the dB-domain detector


def _fx_compressor(x, fs, p):
    # channel-linked feed-forward compressor, hard knee
    c = math.exp(-1.0 / (fs * _DETECTOR_MS * 1e-3))
    linked = np.max(np.abs(x), axis=0)
    env = lfilter([1.0 - c], [1.0, -c], linked)
    level_db = 20.0 * np.log10(env + 1e-9)
    atk = math.exp(-1.0 / (fs * p["attack"] * 1e-3))
    rel = math.exp(-1.0 / (fs * p["release"] * 1e-3))
    gain_db = _compressor_gain_db(level_db, p["threshold"], p["ratio"], atk, rel)
    gain = 10.0 ** ((gain_db + p["makeup"]) / 20.0)
    return x * gain[np.newaxis, :]


def _fx_distortion(x, fs, p):
    drive = 10.0 ** (p["drive"] / 20.0)
    mix = p["mix"]
    if mix == 0.0:
        return x.copy()
    wet = np.tanh(drive * x)
    tone = compute_biquad("lowpass", min(p["tone"], 0.499 * fs), 0.0, 0.707, fs)
    wet = np.stack([_biquad(ch, tone) for ch in wet])
    return (1.0 - mix) * x + mix * wet


def _fx_delay(x, fs, p):
    mix = p["mix"]
    if mix == 0.0:
        return x.copy()
    delay = p["time"] * 1e-3 * fs
    wet = np.stack([_delay_line(ch, delay, p["feedback"]) for ch in x])
    return (1.0 - mix) * x + mix * wet


# mutually prime comb base lengths, roughly 25-45 ms at 48 kHz
_COMB_BASE = (1201, 1499, 1789, 2099)
_COMB_FEEDBACK = 0.84
_ALLPASS_MS = (5.0, 1.7)
_ALLPASS_G = 0.5
_SIDE_OFFSET = 23  # decorrelates the second channel


def _fx_reverb(x, fs, p):
    mix = p["mix"]
    if mix == 0.0:
        return x.copy()
    scale = (0.5 + p["size"]) * fs / 48000.0
    damp = p["damping"]
    out = np.empty_like(x)
    for ci, ch in enumerate(x):
        offset = _SIDE_OFFSET if ci == 1 else 0
        wet = np.zeros_like(ch)
        for base in _COMB_BASE:
            length = max(4.0, base * scale + offset)  # 4-point stencil floor
            wet += _comb_damped(ch, length, _COMB_FEEDBACK, damp)
        wet /= len(_COMB_BASE)
        for ms in _ALLPASS_MS:
            length = max(2, int(round(ms * 1e-3 * fs)))
            wet = _allpass(wet, length, _ALLPASS_G)
        out[ci] = (1.0 - mix) * ch + mix * wet
    return out


_REGISTRY: tuple[tuple[EffectDescriptor, object], ...] = (
    (
        EffectDescriptor("gain", (ParamSpec("level", -24.0, 24.0, "linear", "dB"),)),
        _fx_gain,
    ),
    (
        EffectDescriptor(
            "lowpass",
            (
                ParamSpec("cutoff", 200.0, 20000.0, "log", "Hz"),
                ParamSpec("q", 0.3, 4.0, "log"),
            ),
        ),
        _fx_lowpass,
    ),
    (
        EffectDescriptor(
            "highpass",
            (
                ParamSpec("cutoff", 20.0, 2000.0, "log", "Hz"),
                ParamSpec("q", 0.3, 4.0, "log"),
            ),
        ),
        _fx_highpass,
    ),
    (
        EffectDescriptor(
            "parametric_eq",
            (
                ParamSpec("ls_freq", 30.0, 450.0, "log", "Hz"),
                ParamSpec("ls_gain", -18.0, 18.0, "linear", "dB"),
                ParamSpec("p1_freq", 200.0, 2500.0, "log", "Hz"),
                ParamSpec("p1_gain", -18.0, 18.0, "linear", "dB"),
                ParamSpec("p1_q", 0.3, 8.0, "log"),
                ParamSpec("p2_freq", 600.0, 7000.0, "log", "Hz"),
                ParamSpec("p2_gain", -18.0, 18.0, "linear", "dB"),
                ParamSpec("p2_q", 0.3, 8.0, "log"),
                ParamSpec("hs_freq", 1500.0, 16000.0, "log", "Hz"),
                ParamSpec("hs_gain", -18.0, 18.0, "linear", "dB"),
            ),
        ),
        _fx_parametric_eq,
    ),
    (
        EffectDescriptor(
            "compressor",
            (
                ParamSpec("threshold", -60.0, 0.0, "linear", "dB"),
                ParamSpec("ratio", 1.0, 20.0, "log"),
                ParamSpec("attack", 1.0, 100.0, "log", "ms"),
                ParamSpec("release", 10.0, 1000.0, "log", "ms"),
                ParamSpec("makeup", 0.0, 12.0, "linear", "dB"),
            ),
        ),
        _fx_compressor,
    ),
    (
        EffectDescriptor(
            "distortion",
            (
                ParamSpec("drive", 0.0, 24.0, "linear", "dB"),
                ParamSpec("tone", 500.0, 10000.0, "log", "Hz"),
                ParamSpec("mix", 0.0, 1.0, "linear"),
            ),
        ),
        _fx_distortion,
    ),
    (
        EffectDescriptor(
            "delay",
            (
                ParamSpec("time", 50.0, 1000.0, "log", "ms"),
                ParamSpec("feedback", 0.0, 0.9, "linear"),
                ParamSpec("mix", 0.0, 1.0, "linear"),
            ),
        ),
        _fx_delay,
    ),
    (
        EffectDescriptor(
            "reverb",
            (
                ParamSpec("size", 0.0, 1.0, "linear"),
                ParamSpec("damping", 0.0, 1.0, "linear"),
                ParamSpec("mix", 0.0, 1.0, "linear"),
            ),
        ),
        _fx_reverb,
    ),
)


def builtin_effects() -> list[EffectDescriptor]:
    """The built-in effect registry, stable order."""
    return [desc for desc, _ in _REGISTRY]


def get_descriptor(effect_id: str) -> EffectDescriptor:
    for desc, _ in _REGISTRY:
        if desc.effect_id == effect_id:
            return desc
    raise UnknownEffectError(f"unknown effect {effect_id!r}")


def process_effect(
    effect_id: str, buffer: AudioBuffer, params_norm
) -> AudioBuffer:
    """Apply one effect with normalized parameters; length-preserving."""
    desc = None
    proc = None
    for d, fn in _REGISTRY:
        if d.effect_id == effect_id:
            desc, proc = d, fn
            break
    if desc is None:
        raise UnknownEffectError(f"unknown effect {effect_id!r}")
    params_norm = np.asarray(params_norm, dtype=np.float64)
    if params_norm.shape != (desc.num_params,):
        raise EffectError(
            f"{effect_id}: expected {desc.num_params} parameters, "
            f"got {params_norm.shape}"
        )
    phys = {
        spec.name: map_param(v, spec) for spec, v in zip(desc.params, params_norm)
    }
    out = proc(buffer.samples, float(buffer.sample_rate), phys)
    return AudioBuffer(out[:, : buffer.num_samples], buffer.sample_rate)
