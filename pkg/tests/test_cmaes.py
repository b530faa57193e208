import numpy as np
import pytest

from styletune.audio import make_rng
from styletune.cmaes import (
    CmaConfig,
    CmaError,
    CmaState,
    OptResult,
    history_tsv,
    optimize,
)


def sphere(x):
    return float(np.sum((x - 0.7) ** 2))


def test_config_validation():
    with pytest.raises(CmaError):
        CmaConfig(dim=0)
    with pytest.raises(CmaError):
        CmaConfig(dim=2, population=1)
    with pytest.raises(CmaError):
        CmaConfig(dim=2, sigma0=0.0)
    with pytest.raises(CmaError):
        CmaConfig(dim=2, patience=0)
    with pytest.raises(CmaError):
        CmaConfig(dim=2, min_improvement=-1.0)


def test_ask_deterministic():
    cfg = CmaConfig(dim=3, population=8, seed=0)
    a = CmaState(cfg).ask(make_rng(1))
    b = CmaState(cfg).ask(make_rng(1))
    assert np.array_equal(a, b)


def test_ask_within_bounds():
    cfg = CmaConfig(dim=4, population=16)
    candidates = CmaState(cfg).ask(make_rng(2))
    assert np.all(candidates >= 0.0) and np.all(candidates <= 1.0)


def test_ask_degenerate_sigma():
    cfg = CmaConfig(dim=3, population=8, sigma0=1e-14)
    state = CmaState(cfg)
    candidates = state.ask(make_rng(3))
    assert np.max(np.abs(candidates - 0.5)) < 1e-9


def test_ask_sample_std():
    cfg = CmaConfig(dim=2, population=10000, sigma0=0.3)
    state = CmaState(cfg)
    state.ask(make_rng(4))
    raw = state._raw
    stds = raw.std(axis=0)
    assert np.all(np.abs(stds - 0.3) < 0.01)


def test_tell_before_ask():
    state = CmaState(CmaConfig(dim=2, population=4))
    with pytest.raises(CmaError):
        state.tell([0.0, 0.0, 0.0, 0.0])


def test_tell_rejects_bad_fitnesses():
    state = CmaState(CmaConfig(dim=2, population=4))
    state.ask(make_rng(5))
    with pytest.raises(CmaError):
        state.tell([0.0, 0.0])
    state.ask(make_rng(5))
    with pytest.raises(CmaError):
        state.tell([0.0, np.nan, 0.0, 0.0])


def test_tell_equal_fitnesses_well_defined():
    state = CmaState(CmaConfig(dim=3, population=8))
    rng = make_rng(6)
    for _ in range(5):
        state.ask(rng)
        state.tell(np.zeros(8))
    assert np.isfinite(state.sigma) and state.sigma > 0.0
    assert np.all(np.isfinite(state.mean))


def test_covariance_stays_symmetric():
    state = CmaState(CmaConfig(dim=4, population=12))
    rng = make_rng(7)
    for _ in range(100):
        state.ask(rng)
        state.tell(rng.random(12))
    assert np.max(np.abs(state.cov - state.cov.T)) < 1e-12


def test_mean_converges_toward_optimum():
    # distance to the optimum shrinks over 10-generation windows
    good = 0
    for seed in range(20):
        cfg = CmaConfig(dim=5, population=16, seed=seed, max_generations=25)
        state = CmaState(cfg)
        rng = make_rng(seed)
        dist = [np.linalg.norm(state.mean - 0.7)]
        for _ in range(20):
            candidates = state.ask(rng)
            state.tell([sphere(c) for c in candidates])
            dist.append(np.linalg.norm(state.mean - 0.7))
        if dist[10] < dist[0] and dist[20] < dist[10]:
            good += 1
    assert good >= 19


def test_optimize_sphere():
    cfg = CmaConfig(dim=10, population=64, max_generations=200,
                    min_improvement=0.0, seed=0)
    result = optimize(sphere, cfg)
    assert result.best_value < 1e-6
    assert result.stop_reason == "max_generations"


def test_optimize_rosenbrock():
    def rosenbrock(x):
        # shifted so the optimum (all ones) sits at 0.75 inside [0, 1]
        z = 4.0 * (x - 0.5)
        return float(
            np.sum(100.0 * (z[1:] - z[:-1] ** 2) ** 2 + (1.0 - z[:-1]) ** 2)
        )

    cfg = CmaConfig(dim=5, population=32, max_generations=500,
                    min_improvement=0.0, seed=1)
    result = optimize(rosenbrock, cfg)
    assert result.best_value < 1e-3


def test_optimize_deterministic():
    cfg = CmaConfig(dim=4, population=16, max_generations=30, seed=3)
    a = optimize(sphere, cfg)
    b = optimize(sphere, cfg)
    assert a.best_value == b.best_value
    assert np.array_equal(a.best_params, b.best_params)
    assert a.history == b.history


def test_early_stop_constant_objective():
    cfg = CmaConfig(dim=3, population=8, seed=0)  # patience 10, default config
    result = optimize(lambda x: 1.0, cfg)
    assert result.stop_reason == "early_stop"
    assert result.history[-1][0] == 10


def test_early_stop_disabled_by_zero_threshold():
    cfg = CmaConfig(dim=3, population=8, min_improvement=0.0, max_generations=15)
    result = optimize(lambda x: 1.0, cfg)
    assert result.stop_reason == "max_generations"
    assert len(result.history) == 15


def test_history_best_non_increasing():
    cfg = CmaConfig(dim=5, population=16, max_generations=40,
                    min_improvement=0.0, seed=4)
    result = optimize(sphere, cfg)
    bests = [row[1] for row in result.history]
    assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))


def test_best_params_in_bounds():
    cfg = CmaConfig(dim=6, population=16, max_generations=30, seed=5)
    result = optimize(lambda x: -float(np.sum(x)), cfg)  # optimum at all ones
    assert np.all(result.best_params >= 0.0)
    assert np.all(result.best_params <= 1.0)


def test_evaluate_population_matches_sequential():
    cfg = CmaConfig(dim=4, population=16, max_generations=20, seed=6)
    a = optimize(sphere, cfg)
    b = optimize(sphere, cfg, evaluate_population=lambda cands: [sphere(c) for c in cands])
    assert a.best_value == b.best_value
    assert a.history == b.history


def test_sampler_covariance_whitening():
    # empirical covariance of raw samples matches sigma^2 C
    cfg = CmaConfig(dim=4, population=100000, sigma0=0.3)
    state = CmaState(cfg)
    state.ask(make_rng(8))
    raw = state._raw
    emp = np.cov(raw.T)
    target = state.sigma**2 * state.cov
    rel = np.linalg.norm(emp - target) / np.linalg.norm(target)
    assert rel < 0.05


def test_history_tsv_format():
    result = OptResult(np.zeros(2), 0.5, [(1, 0.5, 0.7, 0.3)], "max_generations", 8)
    text = history_tsv(result)
    lines = text.splitlines()
    assert lines[0] == "generation\tbest\tmean\tsigma"
    assert lines[1].startswith("1\t0.5\t0.7\t0.3")
