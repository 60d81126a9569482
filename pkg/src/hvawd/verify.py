"""Oracle-backed verification suites.

Each suite runs an independent recomputation of something the production
code does incrementally (dense inversion vs rank-one updates, dense
objective minimization vs the recursive forecaster, brute-force grid
enumeration vs the grid constructors, Monte-Carlo statistics vs the
closed-form kernel, measured regret vs the closed-form bound) and reports
per-check tolerances and observed values.
"""

import math

import numpy as np

from .bounds import dvaw_regret_bound
from .features import (
    GaussianRffKernel,
    RkhsFunction,
    kernel,
    lift_comparator,
    rkhs_norm,
    sample_feature_map,
)
from .forecaster import DvawForecaster, woodbury_step
from .hierarchy import build_discount_grid, build_feature_grid

SUITES = ("woodbury-oracle", "ftrl-oracle", "unbiasedness", "bound-dominance", "grid-exactness")


def _check(name: str, tolerance: float, observed: float) -> dict:
    return {
        "check": name,
        "tolerance": tolerance,
        "observed": observed,
        "passed": bool(observed <= tolerance),
    }


def _random_spd(rng, m: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    eigs = rng.uniform(0.3, 3.0, size=m)
    return (q * eigs) @ q.T


def woodbury_suite(n_probes: int = 200, max_dim: int = 8, seed: int = 2024001, tol: float = 1e-8) -> list[dict]:
    """Rank-one discounted update vs dense inversion of (gamma S + v v^T)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        m = int(rng.integers(1, max_dim + 1))
        inv = _random_spd(rng, m)
        v = rng.standard_normal(m)
        gamma = float(rng.uniform(0.05, 1.0))
        updated = woodbury_step(inv, v, gamma)
        reference = np.linalg.inv(gamma * np.linalg.inv(inv) + np.outer(v, v))
        worst = max(worst, float(np.max(np.abs(updated - reference))))
    return [_check("woodbury_max_abs_dev", tol, worst)]


def ftrl_suite(n_instances: int = 50, max_steps: int = 100, max_dim: int = 6,
               seed: int = 2024002, tol: float = 1e-8) -> list[dict]:
    """Recursive predictions vs the dense minimizer of the hinted current
    loss plus geometrically discounted past losses (ridge included)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        T = int(rng.integers(5, max_steps + 1))
        m = int(rng.integers(1, max_dim + 1))
        gamma = float(rng.uniform(0.2, 1.0))
        lam = float(rng.uniform(0.2, 3.0))
        feats = rng.standard_normal((T, m))
        labels = rng.uniform(-1.0, 1.0, size=T)
        hints = rng.uniform(-1.0, 1.0, size=T)
        hints[0] = 0.0
        forecaster = DvawForecaster(m, gamma, lam)
        for t in range(T):  # 0-based; the 1-based step index is t + 1
            pred, staged = forecaster.predict(feats[t], hints[t])
            # dense objective Hessian: current outer product, discounted
            # past outer products, and the ridge term discounted t+1 times
            H = gamma ** (t + 1) * lam * np.eye(m) + np.outer(feats[t], feats[t])
            rhs = hints[t] * feats[t]
            for s in range(t):
                H += gamma ** (t - s) * np.outer(feats[s], feats[s])
                rhs += gamma ** (t - s) * labels[s] * feats[s]
            dense_pred = float(np.linalg.solve(H, rhs) @ feats[t])
            worst = max(worst, abs(pred - dense_pred))
            forecaster.commit(staged, labels[t])
    return [_check("ftrl_max_abs_dev", tol, worst)]


def unbiasedness_suite(n_seeds: int = 200, seed: int = 2024003) -> list[dict]:
    """Monte-Carlo statistics of the comparator lift against the closed
    forms: mean estimate of f(x) within 4 standard errors, mean squared
    error at most a^2 |f|^2 / m plus 4 standard errors, and mean squared
    lift norm within 4 standard errors of |f|^2."""
    spec = GaussianRffKernel(dim=2, bandwidth=1.0)
    rng = np.random.default_rng(seed)
    anchors = rng.uniform(-1.0, 1.0, size=(4, 2))
    coeffs = rng.standard_normal(4)
    f = RkhsFunction(spec=spec, anchors=anchors, coeffs=coeffs)
    x = np.array([0.25, -0.4])
    fx = f.evaluate(x)
    norm_sq = rkhs_norm(f) ** 2
    checks = []
    for m in (8, 32, 128):
        estimates = np.empty(n_seeds)
        norms_sq = np.empty(n_seeds)
        for i in range(n_seeds):
            fmap = sample_feature_map(spec, m, seed=seed + 7919 * (i + 1) + m)
            w = lift_comparator(f, fmap)
            estimates[i] = w @ fmap.evaluate(x)
            norms_sq[i] = w @ w
        se_mean = float(np.std(estimates, ddof=1) / math.sqrt(n_seeds))
        checks.append(
            _check(f"lift_mean_bias_m{m}", 4.0 * se_mean, abs(float(np.mean(estimates)) - fx))
        )
        sq_err = (estimates - fx) ** 2
        se_sq = float(np.std(sq_err, ddof=1) / math.sqrt(n_seeds))
        bound = spec.a**2 * norm_sq / m
        checks.append(
            _check(f"lift_mse_within_bound_m{m}", bound + 4.0 * se_sq, float(np.mean(sq_err)))
        )
        se_norm = float(np.std(norms_sq, ddof=1) / math.sqrt(n_seeds))
        checks.append(
            _check(f"lift_norm_consistency_m{m}", 4.0 * se_norm, abs(float(np.mean(norms_sq)) - norm_sq))
        )
    # kernel unbiasedness: mean inner product of independent maps vs k(x, y)
    n_maps, m = 50, 64
    y = np.array([-0.6, 0.3])
    dots = np.empty(n_maps)
    for i in range(n_maps):
        fmap = sample_feature_map(spec, m, seed=seed + 104729 * (i + 1))
        dots[i] = fmap.evaluate(x) @ fmap.evaluate(y)
    k_true = kernel(spec, x, y)
    se_dots = float(np.std(dots, ddof=1) / math.sqrt(n_maps))
    checks.append(_check("kernel_unbiasedness", 4.0 * se_dots, abs(float(np.mean(dots)) - k_true)))
    return checks


def bound_dominance_suite(n_trials: int = 200, seed: int = 2024004, slack: float = 1e-8) -> list[dict]:
    """Measured regret of the discounted forecaster never exceeds the
    closed-form bound, over randomized data / comparator / parameter draws."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n_trials):
        T = int(rng.integers(5, 201))
        m = int(rng.integers(1, 7))
        gamma = float(rng.uniform(0.05, 1.0))
        lam = float(rng.uniform(0.1, 5.0))
        feats = rng.uniform(-1.0, 1.0, size=(T, m))
        labels = rng.uniform(-1.0, 1.0, size=T)
        hints = np.clip(rng.normal(labels, 0.5), -1.5, 1.5)
        hints[0] = 0.0
        # comparators: a bounded random walk
        u_seq = np.cumsum(rng.normal(0.0, 0.2, size=(T, m)), axis=0) + rng.standard_normal(m)
        forecaster = DvawForecaster(m, gamma, lam)
        alg_loss = 0.0
        for t in range(T):
            pred, staged = forecaster.predict(feats[t], hints[t])
            alg_loss += 0.5 * (pred - labels[t]) ** 2
            forecaster.commit(staged, labels[t])
        comp_loss = float(np.sum(0.5 * (np.sum(feats * u_seq, axis=1) - labels) ** 2))
        regret = alg_loss - comp_loss
        bound = dvaw_regret_bound(gamma, lam, u_seq, feats, labels, hints)
        worst = max(worst, regret - bound)
    return [_check("bound_dominance_max_violation", slack, worst)]


def _brute_force_etas(m: int, horizon: int, base: float) -> tuple[float, ...]:
    # independent enumeration of {min(2m b^i, mT)} with set-based dedup
    eta_min, eta_max = 2.0 * m, float(m) * float(horizon)
    values = set()
    i = 0
    while True:
        value = min(eta_min * base**i, eta_max)
        values.add(value)
        if value == eta_max:
            break
        i += 1
    return tuple(sorted(values))


def _brute_force_feature_entries(horizon: int) -> tuple[int, ...]:
    j_max = math.ceil(math.log2(horizon) / 2.0) if horizon > 1 else 0
    return (0,) + tuple(2**j for j in range(j_max + 1))


def grid_exactness_suite(seed: int = 0) -> list[dict]:
    """Grid constructors vs brute-force enumeration over a probe lattice."""
    mismatches = 0
    bases = (1.5, 2.0, math.e)
    ms = (1, 2, 3, 5, 8, 16, 33, 64)
    horizons = (1, 2, 3, 4, 7, 8, 16, 100, 1000, 2048, 4095, 4096)
    for base in bases:
        for m in ms:
            for horizon in horizons:
                grid = build_discount_grid(m, horizon, base)
                etas = _brute_force_etas(m, horizon, base)
                gammas = (0.0,) + tuple(e / (1.0 + e) for e in etas)
                if grid.etas != etas or grid.gammas != gammas:
                    mismatches += 1
    for horizon in range(1, 4097):
        if build_feature_grid(horizon).entries != _brute_force_feature_entries(horizon):
            mismatches += 1
    return [_check("grid_mismatches", 0.0, float(mismatches))]


def run_suites(names) -> dict:
    """Run the selected suites; raises ValueError for an unknown name."""
    selected = list(SUITES) if names in ("all", ["all"]) else list(names)
    for name in selected:
        if name not in SUITES:
            raise ValueError(f"unknown suite: {name!r} (known: {', '.join(SUITES)})")
    runners = {
        "woodbury-oracle": woodbury_suite,
        "ftrl-oracle": ftrl_suite,
        "unbiasedness": unbiasedness_suite,
        "bound-dominance": bound_dominance_suite,
        "grid-exactness": grid_exactness_suite,
    }
    suites = {}
    for name in selected:
        checks = runners[name]()
        suites[name] = {"checks": checks, "passed": all(c["passed"] for c in checks)}
    return {"suites": suites, "passed": all(s["passed"] for s in suites.values())}
