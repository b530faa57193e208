"""Evaluation suite: zero-shot style classification, style retrieval,
parameter estimation, and a rule-based matching baseline.

All tasks run on a self-contained synthetic corpus (pink noise,
speech-shaped noise, tone complexes, impulse trains) so no external audio
is required; a directory of WAV files can be substituted for real corpora.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal

from .audio import AudioBuffer, apply_gain_db, make_rng, read_wav
from .chain import Chain, ChainStage, process_chain
from .effects import builtin_effects, get_descriptor, process_effect, unmap_param
from .features import cosine_similarity, embed
from .transfer import TransferConfig, style_transfer


class BenchError(Exception):
    pass


STYLES = ("TL", "BR", "WM", "BC", "NT")


@dataclass
class BenchReport:
    task: str
    rows: list[dict]
    aggregates: dict
    trials: int
    seed: int

    def to_tsv(self) -> str:
        lines = [f"# task\t{self.task}", f"# trials\t{self.trials}", f"# seed\t{self.seed}"]
        for key in sorted(self.aggregates):
            lines.append(f"# {key}\t{_fmt(self.aggregates[key])}")
        if self.rows:
            cols = list(self.rows[0])
            lines.append("\t".join(cols))
            for row in self.rows:
                lines.append("\t".join(_fmt(row[c]) for c in cols))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# ---------------------------------------------------------------------------
# synthetic corpus

def _shaped_noise(n, rng, shaper):
    """White noise spectrally shaped by `shaper(freq_bins) -> amplitude`."""
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0)
    spec *= shaper(freqs)
    out = np.fft.irfft(spec, n)
    return out / (np.max(np.abs(out)) + 1e-12)


def pink_noise(n, rng):
    return _shaped_noise(n, rng, lambda f: 1.0 / np.sqrt(np.maximum(f, 1e-5)))


def speech_shaped_noise(n, rng, sample_rate):
    # pink noise, mild formant-like bump, slow syllabic amplitude modulation
    def shaper(f):
        hz = f * sample_rate
        pink = 1.0 / np.sqrt(np.maximum(f, 1e-5))
        bump = 1.0 + 0.5 / (1.0 + ((hz - 400.0) / 300.0) ** 2)
        return pink * bump

    sig = _shaped_noise(n, rng, shaper)
    t = np.arange(n) / sample_rate
    am = 1.0 + 0.4 * np.sin(2.0 * math.pi * 4.0 * t + rng.uniform(0.0, 2 * math.pi))
    sig = sig * am
    return sig / (np.max(np.abs(sig)) + 1e-12)


def tone_complex(n, rng, sample_rate):
    # dense harmonic comb carved out of a pink envelope (keeps tilt pink-like)
    f0 = float(rng.uniform(80.0, 120.0))

    def shaper(f):
        hz = f * sample_rate
        pink = 1.0 / np.sqrt(np.maximum(f, 1e-5))
        dist = np.abs((hz / f0 + 0.5) % 1.0 - 0.5) * f0  # Hz to nearest harmonic
        comb = np.exp(-0.5 * (dist / (0.03 * f0)) ** 2) + 0.1
        comb[hz < 0.5 * f0] = 0.05
        return pink * comb

    return _shaped_noise(n, rng, shaper)


def impulse_train(n, rng, sample_rate):
    # drum-like: pink noise gated by a train of decaying envelopes
    rate = float(rng.uniform(5.0, 9.0))  # hits per second
    gate = np.full(n, 0.15)
    decay = np.exp(-np.arange(int(0.1 * sample_rate)) / (0.03 * sample_rate))
    pos = 0
    while pos < n:
        end = min(pos + decay.size, n)
        gate[pos:end] = np.maximum(gate[pos:end], decay[: end - pos])
        pos += max(1, int(sample_rate / rate * rng.uniform(0.8, 1.2)))
    sig = pink_noise(n, rng) * gate
    return sig / (np.max(np.abs(sig)) + 1e-12)


_FAMILIES = ("pink", "speech", "tones", "impulses")


def synthetic_clip(
    family: str, duration: float, sample_rate: int, rng: np.random.Generator
) -> AudioBuffer:
    """One stereo clip of the named family, peak near 0.5 full scale."""
    n = int(duration * sample_rate)
    if family == "pink":
        mid = pink_noise(n, rng)
    elif family == "speech":
        mid = speech_shaped_noise(n, rng, sample_rate)
    elif family == "tones":
        mid = tone_complex(n, rng, sample_rate)
    elif family == "impulses":
        mid = impulse_train(n, rng, sample_rate)
    else:
        raise BenchError(f"unknown clip family {family!r}")
    side = 0.05 * pink_noise(n, rng)
    stereo = 0.5 * np.stack([mid + side, mid - side])
    return AudioBuffer(stereo, sample_rate)


def make_corpus(
    n_clips: int,
    rng: np.random.Generator,
    duration: float = 5.0,
    sample_rate: int = 48000,
) -> list[AudioBuffer]:
    """Synthetic corpus cycling through the four clip families."""
    return [
        synthetic_clip(_FAMILIES[i % len(_FAMILIES)], duration, sample_rate, rng)
        for i in range(n_clips)
    ]


def load_corpus(directory) -> list[AudioBuffer]:
    paths = sorted(Path(directory).glob("*.wav"))
    if not paths:
        raise BenchError(f"no WAV files in {directory}")
    return [read_wav(p) for p in paths]


# ---------------------------------------------------------------------------
# the five fixed style presets (equalization + dynamics only)

def _stage(effect_id: str, **physical) -> ChainStage:
    desc = get_descriptor(effect_id)
    fixed = {}
    for spec in desc.params:
        if spec.name in physical:
            fixed[spec.name] = unmap_param(physical[spec.name], spec)
    return ChainStage(effect_id, fixed)


def _full_stage(effect_id: str, **physical) -> ChainStage:
    """Stage with every parameter fixed; unlisted params get their defaults."""
    defaults = dict(NEUTRAL_DEFAULTS_PHYSICAL[effect_id])
    defaults.update(physical)
    return _stage(effect_id, **defaults)


NEUTRAL_DEFAULTS_PHYSICAL = {
    "gain": {"level": 0.0},
    "lowpass": {"cutoff": 8000.0, "q": 0.707},
    "highpass": {"cutoff": 80.0, "q": 0.707},
    "parametric_eq": {
        "ls_freq": 120.0,
        "ls_gain": 0.0,
        "p1_freq": 700.0,
        "p1_gain": 0.0,
        "p1_q": 1.0,
        "p2_freq": 2000.0,
        "p2_gain": 0.0,
        "p2_q": 1.0,
        "hs_freq": 6000.0,
        "hs_gain": 0.0,
    },
    "compressor": {
        "threshold": -30.0,
        "ratio": 4.0,
        "attack": 10.0,
        "release": 100.0,
        "makeup": 0.0,
    },
    "distortion": {"drive": 12.0, "tone": 10000.0, "mix": 1.0},
    "delay": {"time": 200.0, "feedback": 0.3, "mix": 0.5},
    "reverb": {"size": 0.5, "damping": 0.5, "mix": 0.5},
}


def style_chain(style_id: str) -> Chain:
    if style_id == "TL":
        stages = (
            _full_stage("highpass", cutoff=300.0, q=0.707),
            _full_stage("lowpass", cutoff=3400.0, q=0.707),
            _full_stage("compressor", threshold=-30.0, ratio=4.0),
        )
    elif style_id == "BR":
        stages = (
            _full_stage("parametric_eq", hs_freq=6000.0, hs_gain=9.0,
                        ls_freq=150.0, ls_gain=-3.0),
        )
    elif style_id == "WM":
        stages = (
            _full_stage("parametric_eq", ls_freq=200.0, ls_gain=6.0,
                        hs_freq=6000.0, hs_gain=-6.0),
        )
    elif style_id == "BC":
        stages = (
            _full_stage("compressor", threshold=-35.0, ratio=8.0, makeup=6.0),
            _full_stage("parametric_eq", p2_freq=3000.0, p2_gain=3.0, p2_q=1.0),
        )
    elif style_id == "NT":
        stages = (_full_stage("gain", level=0.0),)
    else:
        raise BenchError(f"unknown style {style_id!r}")
    return Chain(stages)


def apply_style(style_id: str, buffer: AudioBuffer) -> AudioBuffer:
    chain = style_chain(style_id)
    return process_chain(chain, buffer, np.empty(0))


# ---------------------------------------------------------------------------
# zero-shot classification

def _default_embed(buffer: AudioBuffer) -> np.ndarray:
    return embed(buffer).values


def zero_shot_classify(query: AudioBuffer, prototypes: dict, embed_fn=None) -> str:
    """Style of the prototype most similar to the query; ties break in
    STYLES order."""
    if len(prototypes) < 2:
        raise BenchError("need at least 2 prototypes")
    embed_fn = embed_fn or _default_embed
    zq = embed_fn(query)
    best_style = None
    best_sim = -math.inf
    for style in STYLES:
        if style not in prototypes:
            continue
        sim = cosine_similarity(zq, embed_fn(prototypes[style]))
        if sim > best_sim:
            best_sim = sim
            best_style = style
    return best_style


def run_classification(
    corpus,
    trials: int = 200,
    rng: np.random.Generator | None = None,
    embed_fn=None,
    query_gain_db: float = 0.0,
) -> BenchReport:
    """Zero-shot style classification over random query/prototype draws."""
    if isinstance(corpus, (str, Path)):
        corpus = load_corpus(corpus)
    if len(corpus) < 6:
        raise BenchError("corpus needs at least 6 clips")
    if rng is None:
        rng = make_rng(0)
    seed = int(rng.integers(2**31))
    rng = make_rng(seed)

    rows = []
    for trial in range(trials):
        picks = rng.choice(len(corpus), size=6, replace=False)
        true_style = STYLES[int(rng.integers(len(STYLES)))]
        query = apply_style(true_style, corpus[int(picks[0])])
        if query_gain_db:
            query = apply_gain_db(query, query_gain_db)
        prototypes = {
            style: apply_style(style, corpus[int(picks[1 + i])])
            for i, style in enumerate(STYLES)
        }
        predicted = zero_shot_classify(query, prototypes, embed_fn)
        rows.append({"trial": trial, "true": true_style, "predicted": predicted})

    aggregates = {}
    per_style = []
    for style in STYLES:
        hits = [r for r in rows if r["true"] == style]
        acc = (
            sum(r["predicted"] == style for r in hits) / len(hits) if hits else 0.0
        )
        aggregates[f"accuracy_{style}"] = acc
        per_style.append(acc)
    aggregates["accuracy_avg"] = float(np.mean(per_style)) if rows else 0.0
    return BenchReport("classification", rows, aggregates, trials, seed)


# ---------------------------------------------------------------------------
# style retrieval

def _random_effect_chain(n_effects: int, rng: np.random.Generator):
    """(effect ids, params) for a random chain of n distinct effects."""
    registry = builtin_effects()
    picks = rng.choice(len(registry), size=n_effects, replace=False)
    ids = [registry[int(i)].effect_id for i in picks]
    params = [rng.random(registry[int(i)].num_params) for i in picks]
    return ids, params


def _apply_effect_list(buffer, ids, params):
    out = buffer
    for effect_id, values in zip(ids, params):
        out = process_effect(effect_id, out, values)
    return out


def run_retrieval(
    corpus,
    n_effects: int = 1,
    set_size: int = 5,
    trials: int = 200,
    rng: np.random.Generator | None = None,
    embed_fn=None,
) -> BenchReport:
    """Find the one retrieval-set item processed with the query's exact chain.

    The retrieval set holds `set_size` items: one content-mismatched clip
    with the query's chain and parameters, the rest with differing random
    chains. Chance accuracy is 1/set_size.
    """
    if isinstance(corpus, (str, Path)):
        corpus = load_corpus(corpus)
    if len(corpus) < set_size + 2:
        raise BenchError(f"corpus needs at least {set_size + 2} clips")
    if rng is None:
        rng = make_rng(0)
    seed = int(rng.integers(2**31))
    rng = make_rng(seed)
    embed_fn = embed_fn or _default_embed

    rows = []
    for trial in range(trials):
        picks = rng.choice(len(corpus), size=set_size + 1, replace=False)
        ids, params = _random_effect_chain(n_effects, rng)
        query = _apply_effect_list(corpus[int(picks[0])], ids, params)
        items = [_apply_effect_list(corpus[int(picks[1])], ids, params)]
        for j in range(2, set_size + 1):
            other_ids, other_params = _random_effect_chain(n_effects, rng)
            items.append(
                _apply_effect_list(corpus[int(picks[j])], other_ids, other_params)
            )
        zq = embed_fn(query)
        sims = np.array([cosine_similarity(zq, embed_fn(it)) for it in items])
        rank = int(np.sum(sims > sims[0])) + 1  # rank of the matching item
        rows.append({"trial": trial, "rank": rank, "hit": int(rank == 1)})

    hits = [r["hit"] for r in rows]
    mrr = float(np.mean([1.0 / r["rank"] for r in rows])) if rows else 0.0
    aggregates = {
        "accuracy": float(np.mean(hits)) if rows else 0.0,
        "mrr": mrr,
        "n_effects": n_effects,
        "set_size": set_size,
    }
    return BenchReport("retrieval", rows, aggregates, trials, seed)


# ---------------------------------------------------------------------------
# parameter estimation

def pearson_rho(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.size < 2:
        raise BenchError("need two equally sized sequences of length >= 2")
    if np.ptp(xs) == 0.0 or np.ptp(ys) == 0.0:
        raise BenchError("correlation undefined for constant sequences")
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    return float(np.dot(xc, yc) / (np.linalg.norm(xc) * np.linalg.norm(yc)))


def single_param_chain(effect_id: str, param_name: str) -> Chain:
    """One-effect chain where only `param_name` is free; the rest neutral."""
    desc = get_descriptor(effect_id)
    desc.param(param_name)  # validates the name
    defaults = NEUTRAL_DEFAULTS_PHYSICAL[effect_id]
    fixed = {
        spec.name: unmap_param(defaults[spec.name], spec)
        for spec in desc.params
        if spec.name != param_name
    }
    return Chain((ChainStage(effect_id, fixed),))


def run_param_estimation(
    effect_id: str,
    param_name: str,
    targets=(0.2, 0.4, 0.6, 0.8),
    trials_per_target: int = 3,
    rng: np.random.Generator | None = None,
    duration: float = 5.0,
    sample_rate: int = 48000,
    population: int = 64,
    max_generations: int = 25,
    threads: int = 1,
    families: tuple = _FAMILIES,
) -> BenchReport:
    """Estimate one hidden parameter value from a cross-content reference.

    `families` restricts the clip families drawn for reference and input;
    some parameters (reverb size) are only observable on transient content.
    Reference and input content always differ.
    """
    if rng is None:
        rng = make_rng(0)
    seed = int(rng.integers(2**31))
    rng = make_rng(seed)
    chain = single_param_chain(effect_id, param_name)

    rows = []
    for target in targets:
        for trial in range(trials_per_target):
            if len(families) >= 2:
                pair = rng.choice(len(families), size=2, replace=False)
                fam_ref, fam_in = families[int(pair[0])], families[int(pair[1])]
            else:
                fam_ref = fam_in = families[0]
            ref_clean = synthetic_clip(fam_ref, duration, sample_rate, rng)
            input_clip = synthetic_clip(fam_in, duration, sample_rate, rng)
            reference = process_chain(chain, ref_clean, np.array([target]))
            cfg = TransferConfig(
                chain=chain,
                population=population,
                max_generations=max_generations,
                # similarity improvements are far below the default stall
                # threshold, so early stopping would cap every run at
                # `patience` generations; run the full budget instead
                min_improvement=0.0,
                seed=int(rng.integers(2**31)),
                threads=threads,
            )
            _, report = style_transfer(input_clip, reference, cfg)
            rows.append(
                {
                    "target": float(target),
                    "trial": trial,
                    "estimate": float(report.best_params[0]),
                    "similarity": report.best_similarity,
                }
            )

    targets_v = [r["target"] for r in rows]
    estimates = [r["estimate"] for r in rows]
    if np.ptp(targets_v) > 0.0 and np.ptp(estimates) > 0.0:
        rho = pearson_rho(targets_v, estimates)
    else:
        rho = float("nan")  # undefined for constant sequences
    aggregates = {
        "effect": effect_id,
        "param": param_name,
        "mse": float(np.mean((np.array(targets_v) - np.array(estimates)) ** 2)),
        "rho": rho,
    }
    return BenchReport("param_estimation", rows, aggregates, len(rows), seed)


# ---------------------------------------------------------------------------
# rule-based baseline: FIR spectral matching + hill-climbed compression

def _welch_power(buffer: AudioBuffer, nperseg: int = 2048):
    """Channel-averaged Welch power spectrum (Hann, 50% overlap)."""
    freqs, psd = scipy.signal.welch(
        buffer.samples,
        fs=buffer.sample_rate,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        axis=-1,
    )
    return freqs, psd.mean(axis=0)


def third_octave_bands(sample_rate: int):
    """(center, lo, hi) triples of third-octave bands up to Nyquist."""
    bands = []
    k = -17  # 1000 * 2^(-17/3) ~= 19.7 Hz
    while True:
        center = 1000.0 * 2.0 ** (k / 3.0)
        if center > sample_rate / 2.0:
            break
        bands.append((center, center * 2 ** (-1 / 6), center * 2 ** (1 / 6)))
        k += 1
    return bands


def third_octave_power(freqs, psd, bands):
    out = np.empty(len(bands))
    for i, (_, lo, hi) in enumerate(bands):
        mask = (freqs >= lo) & (freqs < hi)
        out[i] = psd[mask].mean() if np.any(mask) else 1e-20
    return out


def third_octave_distance(a: AudioBuffer, b: AudioBuffer) -> float:
    """Mean absolute third-octave level difference in dB."""
    bands = third_octave_bands(a.sample_rate)
    fa, pa = _welch_power(a)
    fb, pb = _welch_power(b)
    la = 10.0 * np.log10(third_octave_power(fa, pa, bands) + 1e-20)
    lb = 10.0 * np.log10(third_octave_power(fb, pb, bands) + 1e-20)
    return float(np.mean(np.abs(la - lb)))


def crest_factor_db(buffer: AudioBuffer) -> float:
    rms = float(np.sqrt(np.mean(buffer.samples**2)))
    peak = float(np.max(np.abs(buffer.samples)))
    if rms <= 0.0:
        return 0.0
    return 20.0 * math.log10(peak / rms)


FIR_LENGTH = 1023
FIR_GAIN_CLIP_DB = 12.0


def matching_fir(input_buffer: AudioBuffer, reference: AudioBuffer) -> np.ndarray:
    """Linear-phase FIR whose response matches the third-octave level ratio."""
    bands = third_octave_bands(input_buffer.sample_rate)
    fi, pi = _welch_power(input_buffer)
    fr, pr = _welch_power(reference)
    p_in = third_octave_power(fi, pi, bands)
    p_ref = third_octave_power(fr, pr, bands)
    gain_db = np.clip(
        10.0 * np.log10((p_ref + 1e-20) / (p_in + 1e-20)),
        -FIR_GAIN_CLIP_DB,
        FIR_GAIN_CLIP_DB,
    )
    centers = np.array([c for c, _, _ in bands])
    nyquist = input_buffer.sample_rate / 2.0
    grid = np.concatenate([[0.0], centers / nyquist, [1.0]])
    grid = np.clip(grid, 0.0, 1.0)
    gains = np.concatenate([[gain_db[0]], gain_db, [gain_db[-1]]])
    # firwin2 needs a strictly increasing grid
    keep = np.concatenate([[True], np.diff(grid) > 1e-9])
    taps = scipy.signal.firwin2(
        FIR_LENGTH, grid[keep], 10.0 ** (gains[keep] / 20.0), window="hann"
    )
    return taps


def _apply_fir(buffer: AudioBuffer, taps: np.ndarray) -> AudioBuffer:
    delay = (len(taps) - 1) // 2
    out = np.stack(
        [
            scipy.signal.fftconvolve(ch, taps, mode="full")[
                delay : delay + buffer.num_samples
            ]
            for ch in buffer.samples
        ]
    )
    return AudioBuffer(out, buffer.sample_rate)


def _compress(buffer: AudioBuffer, threshold_db: float, ratio: float) -> AudioBuffer:
    desc = get_descriptor("compressor")
    phys = dict(NEUTRAL_DEFAULTS_PHYSICAL["compressor"])
    phys["threshold"] = threshold_db
    phys["ratio"] = ratio
    norm = np.array([unmap_param(phys[s.name], s) for s in desc.params])
    return process_effect("compressor", buffer, norm)


def rule_based_transfer(
    input_buffer: AudioBuffer, reference: AudioBuffer
) -> AudioBuffer:
    """FIR spectral matching followed by crest-matched compression."""
    if input_buffer.sample_rate != reference.sample_rate:
        raise BenchError("sample rates must match")
    taps = matching_fir(input_buffer, reference)
    matched = _apply_fir(input_buffer, taps)

    target_crest = crest_factor_db(reference)
    if crest_factor_db(matched) <= target_crest:
        return matched  # no compression needed

    # hill climb over (threshold dB, ratio) with step halving
    thr, ratio = -20.0, 2.0
    step_thr, step_ratio = 8.0, 4.0
    best = abs(crest_factor_db(_compress(matched, thr, ratio)) - target_crest)
    while step_thr >= 0.5 or step_ratio >= 0.25:
        improved = False
        for d_thr, d_ratio in ((step_thr, 0), (-step_thr, 0), (0, step_ratio), (0, -step_ratio)):
            cand_thr = min(max(thr + d_thr, -60.0), 0.0)
            cand_ratio = min(max(ratio + d_ratio, 1.0), 20.0)
            err = abs(
                crest_factor_db(_compress(matched, cand_thr, cand_ratio))
                - target_crest
            )
            if err < best - 1e-12:
                best = err
                thr, ratio = cand_thr, cand_ratio
                improved = True
        if not improved:
            step_thr /= 2.0
            step_ratio /= 2.0
    return _compress(matched, thr, ratio)
