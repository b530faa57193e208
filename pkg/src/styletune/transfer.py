"""The style-transfer loop: search chain parameters to match a reference.

The reference embedding is computed once; each candidate parameter vector is
scored by the cosine similarity between the embedded processed input and
that reference embedding. CMA-ES minimizes the negated similarity.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioBuffer
from .chain import Chain, physical_view, process_chain
from .cmaes import CmaConfig, OptResult, optimize
from .features import Embedding, FeatureError, cosine_similarity, embed


@dataclass
class TransferConfig:
    chain: Chain
    population: int = 64
    sigma0: float = 0.3
    max_generations: int = 25
    patience: int = 10
    min_improvement: float = 0.1
    seed: int = 0
    threads: int = 1
    normalize_output: bool = False  # peak-normalize the final output to -1 dBFS


@dataclass
class TransferReport:
    best_similarity: float
    initial_similarity: float  # at phi0 = all 0.5
    input_reference_similarity: float
    best_params: np.ndarray
    best_params_physical: list[tuple[int, str, str, float]]
    history: list[tuple[int, float, float, float]]
    stop_reason: str
    evaluations: int
    seconds: float
    seed: int


def objective(
    input_buffer: AudioBuffer,
    reference_embedding: Embedding,
    chain: Chain,
    phi,
) -> float:
    """Negated style similarity of the processed input to the reference."""
    out = process_chain(chain, input_buffer, phi)
    return -cosine_similarity(embed(out), reference_embedding)


def style_transfer(
    input_buffer: AudioBuffer,
    reference: AudioBuffer,
    cfg: TransferConfig,
) -> tuple[AudioBuffer, TransferReport]:
    """Optimize the chain's free parameters, return (output, report)."""
    if input_buffer.sample_rate != reference.sample_rate:
        raise FeatureError(
            f"sample-rate mismatch: {input_buffer.sample_rate} "
            f"vs {reference.sample_rate}"
        )
    start = time.perf_counter()
    z_ref = embed(reference)
    chain = cfg.chain

    def f(phi):
        return objective(input_buffer, z_ref, chain, phi)

    evaluate = None
    if cfg.threads > 1:
        pool = ThreadPoolExecutor(max_workers=cfg.threads)

        def evaluate(candidates):
            return list(pool.map(f, candidates))

    phi0 = np.full(chain.num_params, 0.5)
    initial_similarity = -f(phi0)
    input_reference_similarity = cosine_similarity(embed(input_buffer), z_ref)

    cma_cfg = CmaConfig(
        dim=chain.num_params,
        population=cfg.population,
        sigma0=cfg.sigma0,
        mean0=phi0,
        max_generations=cfg.max_generations,
        patience=cfg.patience,
        min_improvement=cfg.min_improvement,
        seed=cfg.seed,
    )
    result: OptResult = optimize(
        f, cma_cfg, evaluate_population=evaluate, initial_value=-initial_similarity
    )
    if cfg.threads > 1:
        pool.shutdown()

    best_params = result.best_params
    best_similarity = -result.best_value

    output = process_chain(chain, input_buffer, best_params)
    if cfg.normalize_output:
        peak = float(np.max(np.abs(output.samples)))
        if peak > 0.0:
            target = 10.0 ** (-1.0 / 20.0)
            output = AudioBuffer(output.samples * (target / peak), output.sample_rate)

    report = TransferReport(
        best_similarity=best_similarity,
        initial_similarity=initial_similarity,
        input_reference_similarity=input_reference_similarity,
        best_params=best_params,
        best_params_physical=physical_view(chain, best_params),
        history=result.history,
        stop_reason=result.stop_reason,
        evaluations=result.evaluations,
        seconds=time.perf_counter() - start,
        seed=cfg.seed,
    )
    return output, report


def report_to_text(report: TransferReport) -> str:
    """Stable key/value + history-table serialization of a transfer report."""
    lines = [
        f"best_similarity\t{report.best_similarity:.8f}",
        f"initial_similarity\t{report.initial_similarity:.8f}",
        f"input_reference_similarity\t{report.input_reference_similarity:.8f}",
        f"stop_reason\t{report.stop_reason}",
        f"evaluations\t{report.evaluations}",
        f"seed\t{report.seed}",
        "best_params\t" + " ".join(f"{v:.8f}" for v in report.best_params),
        "",
        "stage\teffect\tparam\tvalue",
    ]
    for stage, effect_id, name, value in report.best_params_physical:
        lines.append(f"{stage}\t{effect_id}\t{name}\t{value:.6g}")
    lines.append("")
    lines.append("generation\tbest\tmean\tsigma")
    for gen, best, mean, sigma in report.history:
        lines.append(f"{gen}\t{best:.8f}\t{mean:.8f}\t{sigma:.8f}")
    return "\n".join(lines) + "\n"
