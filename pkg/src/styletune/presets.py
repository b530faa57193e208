"""Preset generation via perceptual clustering, and pretext-pair export.

Presets are found by sampling many random parameter configurations for an
effect, processing a probe recording with each, clustering MFCC summaries
of the results, and keeping one configuration per cluster. The pretext
exporter writes (input, output) audio pairs labelled with the effect and
preset that produced them, for downstream classifier training.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import (
    AudioBuffer,
    apply_gain_db,
    make_rng,
    mid_side_split,
    random_crop,
    read_wav,
    write_wav,
)
from .effects import builtin_effects, get_descriptor, process_effect
from .features import DEFAULT_CONFIG, log_mel, mfcc, stft_mag


class PresetError(Exception):
    pass


@dataclass(frozen=True)
class Preset:
    effect_id: str
    values: tuple[float, ...]
    preset_index: int


@dataclass(frozen=True)
class PretextExample:
    input_path: str
    output_path: str
    effect_id: str
    preset_index: int


def sample_random_configs(
    effect_id: str, n: int = 1000, rng: np.random.Generator | None = None
) -> np.ndarray:
    """n i.i.d. uniform normalized parameter vectors, shape (n, d)."""
    desc = get_descriptor(effect_id)
    if rng is None:
        rng = make_rng(0)
    return rng.random((n, desc.num_params))


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator):
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[j] = points[rng.integers(n)]
        else:
            centroids[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def kmeans(
    points,
    k: int = 10,
    max_iters: int = 100,
    rng: np.random.Generator | None = None,
):
    """Lloyd's algorithm with k-means++ seeding.

    Empty clusters are re-seeded with the point farthest from its assigned
    centroid. Returns (assignments, centroids, inertia).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise PresetError("points must be 2-D")
    if k > points.shape[0]:
        raise PresetError(f"k={k} exceeds number of points ({points.shape[0]})")
    if rng is None:
        rng = make_rng(0)

    centroids = _kmeans_pp_init(points, k, rng)
    assignments = np.full(points.shape[0], -1)
    for _ in range(max_iters):
        d2 = (
            np.sum(points**2, axis=1)[:, np.newaxis]
            - 2.0 * points @ centroids.T
            + np.sum(centroids**2, axis=1)[np.newaxis, :]
        )
        new_assignments = np.argmin(d2, axis=1)
        for j in range(k):
            members = new_assignments == j
            if np.any(members):
                centroids[j] = points[members].mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(points.shape[0]), new_assignments]))
                centroids[j] = points[far]
                new_assignments[far] = j
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments

    d2 = np.sum((points - centroids[assignments]) ** 2, axis=1)
    return assignments, centroids, float(d2.sum())


def _mfcc_mean(buffer: AudioBuffer) -> np.ndarray:
    """20-dim MFCC-mean summary of the mid channel (clustering feature)."""
    mid, _ = mid_side_split(buffer)
    mag = stft_mag(mid.samples[0], DEFAULT_CONFIG)
    lm = log_mel(mag, DEFAULT_CONFIG, buffer.sample_rate)
    return mfcc(lm).mean(axis=0)


def generate_presets(
    effect_id: str,
    probe: AudioBuffer,
    rng: np.random.Generator,
    n_configs: int = 1000,
    k: int = 10,
) -> list[Preset]:
    """K presets for one effect, one per perceptual cluster of processed probes."""
    if probe.duration < 1.0:
        raise PresetError("probe must be at least 1 second long")
    configs = sample_random_configs(effect_id, n_configs, rng)
    feats = np.stack(
        [_mfcc_mean(process_effect(effect_id, probe, cfg)) for cfg in configs]
    )
    assignments, _, _ = kmeans(feats, k=k, rng=rng)
    presets = []
    for j in range(k):
        members = np.flatnonzero(assignments == j)
        pick = int(members[rng.integers(len(members))])
        presets.append(Preset(effect_id, tuple(configs[pick]), j))
    return presets


def save_presets(presets: list[Preset], path) -> None:
    lines = []
    for p in presets:
        values = " ".join(f"{v:.12g}" for v in p.values)
        lines.append(f"{p.effect_id}\t{p.preset_index}\t{values}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_presets(path) -> dict[str, list[Preset]]:
    store: dict[str, list[Preset]] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        effect_id, index, values = line.split("\t")
        store.setdefault(effect_id, []).append(
            Preset(effect_id, tuple(float(v) for v in values.split()), int(index))
        )
    return store


def generate_pretext_dataset(
    audio_dirs,
    n_examples: int,
    crop_len: int,
    out_dir,
    rng: np.random.Generator,
    presets: dict[str, list[Preset]],
    gain_range_db: tuple[float, float] = (-32.0, 0.0),
) -> list[PretextExample]:
    """Export labelled (input, output) pairs for the effect/preset pretext task.

    Per example: pick a directory and file uniformly, random-crop, apply a
    random gain augmentation to the input, then process with a uniformly
    chosen effect and preset. Audio is stored as float32 WAV so re-applying
    the labelled effect to the stored input reproduces the stored output.
    """
    dirs = [Path(d) for d in audio_dirs]
    files_per_dir = []
    for d in dirs:
        wavs = sorted(d.glob("*.wav"))
        if not wavs:
            raise PresetError(f"no WAV files in {d}")
        files_per_dir.append(wavs)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    effect_ids = [d.effect_id for d in builtin_effects()]
    missing = [e for e in effect_ids if not presets.get(e)]
    if missing:
        raise PresetError(f"no presets for effects: {', '.join(missing)}")

    manifest: list[PretextExample] = []
    for i in range(n_examples):
        d_idx = int(rng.integers(len(dirs)))
        wav = files_per_dir[d_idx][int(rng.integers(len(files_per_dir[d_idx])))]
        buf = read_wav(wav)
        cropped = random_crop(buf, min(crop_len, buf.num_samples), rng)
        gain = float(rng.uniform(*gain_range_db))
        inp = apply_gain_db(cropped, gain)
        effect_id = effect_ids[int(rng.integers(len(effect_ids)))]
        bank = presets[effect_id]
        preset = bank[int(rng.integers(len(bank)))]

        in_path = out_dir / f"input_{i:05d}.wav"
        out_path = out_dir / f"output_{i:05d}.wav"
        write_wav(inp, in_path, "float32")
        # process the float32-quantized input so a manifest replay is exact
        stored = read_wav(in_path)
        out = process_effect(effect_id, stored, np.array(preset.values))
        write_wav(out, out_path, "float32")
        manifest.append(
            PretextExample(str(in_path), str(out_path), effect_id, preset.preset_index)
        )

    write_manifest(manifest, out_dir / "manifest.tsv")
    return manifest


def write_manifest(manifest: list[PretextExample], path) -> None:
    lines = ["input\toutput\teffect\tpreset"]
    for ex in manifest:
        lines.append(f"{ex.input_path}\t{ex.output_path}\t{ex.effect_id}\t{ex.preset_index}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[PretextExample]:
    lines = Path(path).read_text().splitlines()
    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        inp, outp, effect_id, preset = line.split("\t")
        out.append(PretextExample(inp, outp, effect_id, int(preset)))
    return out
