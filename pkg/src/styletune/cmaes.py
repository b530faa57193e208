"""CMA-ES for bounded minimization over [0, 1]^n.

Standard rank-mu update with cumulative step-size adaptation and the usual
log-rank recombination weights. Bounds are handled by clamping candidates
for evaluation while feeding the raw (unclamped) samples back into the
distribution update, which is unbiased for optima in the interior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audio import make_rng


class CmaError(Exception):
    pass


@dataclass
class CmaConfig:
    dim: int
    population: int = 64
    sigma0: float = 0.3
    mean0: np.ndarray | None = None  # default all 0.5
    max_generations: int = 25
    patience: int = 10
    min_improvement: float = 0.1  # 0 disables early stopping
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise CmaError("dim must be >= 1")
        if self.population < 2:
            raise CmaError("population must be >= 2")
        if self.sigma0 <= 0.0:
            raise CmaError("sigma0 must be positive")
        if self.patience < 1:
            raise CmaError("patience must be >= 1")
        if self.min_improvement < 0.0:
            raise CmaError("min_improvement must be >= 0")


@dataclass
class OptResult:
    best_params: np.ndarray
    best_value: float
    history: list[tuple[int, float, float, float]]  # (gen, best, mean, sigma)
    stop_reason: str  # "max_generations" or "early_stop"
    evaluations: int


def history_tsv(result: OptResult) -> str:
    lines = ["generation\tbest\tmean\tsigma"]
    for gen, best, mean, sigma in result.history:
        lines.append(f"{gen}\t{best:.10g}\t{mean:.10g}\t{sigma:.10g}")
    return "\n".join(lines) + "\n"


class CmaState:
    """Search-distribution state; mutate only through ask/tell."""

    MAX_CONDITION = 1e14

    def __init__(self, cfg: CmaConfig):
        n = cfg.dim
        lam = cfg.population
        self.cfg = cfg
        self.mean = (
            np.full(n, 0.5) if cfg.mean0 is None else np.asarray(cfg.mean0, float).copy()
        )
        if self.mean.shape != (n,):
            raise CmaError("mean0 has wrong dimension")
        self.sigma = cfg.sigma0
        self.cov = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0

        # strategy constants (standard tutorial defaults)
        mu = lam // 2
        raw = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        self.weights = raw / raw.sum()
        self.mu = mu
        self.mu_eff = 1.0 / np.sum(self.weights**2)
        self.c_sigma = (self.mu_eff + 2.0) / (n + self.mu_eff + 5.0)
        self.d_sigma = (
            1.0
            + 2.0 * max(0.0, math.sqrt((self.mu_eff - 1.0) / (n + 1.0)) - 1.0)
            + self.c_sigma
        )
        self.c_c = (4.0 + self.mu_eff / n) / (n + 4.0 + 2.0 * self.mu_eff / n)
        self.c_1 = 2.0 / ((n + 1.3) ** 2 + self.mu_eff)
        self.c_mu = min(
            1.0 - self.c_1,
            2.0 * (self.mu_eff - 2.0 + 1.0 / self.mu_eff)
            / ((n + 2.0) ** 2 + self.mu_eff),
        )
        self.chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

        self._raw: np.ndarray | None = None
        self._refresh_decomposition()

    def _refresh_decomposition(self):
        self.cov = (self.cov + self.cov.T) / 2.0
        evals, evecs = np.linalg.eigh(self.cov)
        top = float(evals[-1])
        floor = max(top / self.MAX_CONDITION, 1e-30)
        evals = np.maximum(evals, floor)
        self.cov = (evecs * evals) @ evecs.T
        self._B = evecs
        self._D = np.sqrt(evals)

    def ask(self, rng: np.random.Generator) -> np.ndarray:
        """Sample lambda candidates, clamped to [0, 1]; raw kept for tell."""
        lam = self.cfg.population
        z = rng.standard_normal((lam, self.cfg.dim))
        y = z @ (self._B * self._D).T
        raw = self.mean + self.sigma * y
        self._raw = raw
        return np.clip(raw, 0.0, 1.0)

    def tell(self, fitnesses) -> None:
        """Rank-mu CMA-ES update from the most recent ask() population."""
        if self._raw is None:
            raise CmaError("tell() called before ask()")
        fit = np.asarray(fitnesses, dtype=np.float64)
        if fit.shape != (self.cfg.population,):
            raise CmaError("fitness count does not match population")
        if not np.all(np.isfinite(fit)):
            raise CmaError("non-finite fitness")
        n = self.cfg.dim
        order = np.argsort(fit, kind="stable")
        selected = self._raw[order[: self.mu]]
        y_sel = (selected - self.mean) / self.sigma
        y_w = self.weights @ y_sel

        self.mean = self.mean + self.sigma * y_w

        # whitened step for the sigma path
        c_inv_half = self._B @ np.diag(1.0 / self._D) @ self._B.T
        self.p_sigma = (1.0 - self.c_sigma) * self.p_sigma + math.sqrt(
            self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff
        ) * (c_inv_half @ y_w)

        h_sigma = float(
            np.linalg.norm(self.p_sigma)
            / math.sqrt(1.0 - (1.0 - self.c_sigma) ** (2 * (self.generation + 1)))
            < (1.4 + 2.0 / (n + 1.0)) * self.chi_n
        )
        self.p_c = (1.0 - self.c_c) * self.p_c + h_sigma * math.sqrt(
            self.c_c * (2.0 - self.c_c) * self.mu_eff
        ) * y_w

        rank_mu = (y_sel * self.weights[:, np.newaxis]).T @ y_sel
        delta_h = (1.0 - h_sigma) * self.c_c * (2.0 - self.c_c)
        self.cov = (
            (1.0 - self.c_1 - self.c_mu) * self.cov
            + self.c_1 * (np.outer(self.p_c, self.p_c) + delta_h * self.cov)
            + self.c_mu * rank_mu
        )

        self.sigma *= math.exp(
            (self.c_sigma / self.d_sigma)
            * (np.linalg.norm(self.p_sigma) / self.chi_n - 1.0)
        )

        self.generation += 1
        self._raw = None
        self._refresh_decomposition()


def optimize(
    objective, cfg: CmaConfig, evaluate_population=None, initial_value=None
) -> OptResult:
    """Minimize `objective` over [0, 1]^dim.

    `evaluate_population`, when given, maps a (lambda, dim) candidate array to
    a fitness sequence in candidate order; used to parallelize evaluations.
    `initial_value` is the objective at the (clamped) start mean; when None it
    is evaluated here. Seeding the running best with it makes early stopping
    count non-improving generations from the first one, and guarantees the
    result is never worse than the start point.
    """
    state = CmaState(cfg)
    rng = make_rng(cfg.seed)
    best_params = np.clip(state.mean, 0.0, 1.0).copy()
    evaluations = 0
    if initial_value is None:
        initial_value = float(objective(best_params))
        evaluations += 1
    best_value = float(initial_value)
    history: list[tuple[int, float, float, float]] = []
    stall = 0
    stop_reason = "max_generations"

    for gen in range(1, cfg.max_generations + 1):
        candidates = state.ask(rng)
        if evaluate_population is not None:
            fitnesses = np.asarray(list(evaluate_population(candidates)), float)
        else:
            fitnesses = np.array([objective(c) for c in candidates])
        evaluations += len(candidates)

        gen_best = int(np.argmin(fitnesses))
        improvement = best_value - float(fitnesses[gen_best])
        if fitnesses[gen_best] < best_value:
            best_value = float(fitnesses[gen_best])
            best_params = candidates[gen_best].copy()
        history.append((gen, best_value, float(np.mean(fitnesses)), state.sigma))

        state.tell(fitnesses)

        if cfg.min_improvement > 0.0:
            stall = stall + 1 if improvement < cfg.min_improvement else 0
            if stall >= cfg.patience:
                stop_reason = "early_stop"
                break

    return OptResult(best_params, best_value, history, stop_reason, evaluations)
