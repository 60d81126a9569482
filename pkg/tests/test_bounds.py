"""Ledger accounting, path lengths, and the closed-form bound evaluators."""

import math

import numpy as np
import pytest

from hvawd.bounds import (
    ComparatorTrace,
    RegretLedger,
    discount_adaptive_bound,
    discount_odds_tradeoff,
    drift_loss_rate,
    dvaw_regret_bound,
    dynamic_regret,
    hierarchy_regret_envelope,
    optimal_discount_odds,
    path_length,
    prediction_energy_bound,
    vaw_static_bound,
)
from hvawd.features import GaussianRffKernel, RkhsFunction
from hvawd.forecaster import DvawForecaster

SPEC = GaussianRffKernel(dim=2, bandwidth=1.0)


def expansion(anchors, coeffs):
    return RkhsFunction(spec=SPEC, anchors=np.asarray(anchors, float), coeffs=np.asarray(coeffs, float))


class TestRegretLedger:
    def test_aggregates_match_direct_recomputation(self):
        rng = np.random.default_rng(1)
        ledger = RegretLedger()
        for _ in range(50):
            ledger.record(
                y=float(rng.uniform(-1, 1)),
                hint=float(rng.uniform(-1, 1)),
                prediction=float(rng.uniform(-1, 1)),
                comparator_value=float(rng.uniform(-1, 1)),
                expert_predictions={"a": float(rng.uniform(-1, 1))},
                feat_sq_norm=float(rng.uniform(0, 2)),
            )
        assert ledger.algorithm_total == pytest.approx(sum(ledger.alg_losses), abs=1e-10)
        assert ledger.comparator_total == pytest.approx(
            sum(c for c in ledger.comparator_losses), abs=1e-10
        )
        assert ledger.delta_sq_sum == sum(ledger.deltas_sq)  # same order, exact
        assert ledger.max_delta_sq == max(ledger.deltas_sq)
        assert ledger.expert_totals()["a"] == pytest.approx(sum(ledger.expert_losses["a"]), abs=1e-10)

    def test_cumulative_quantities_nonnegative_and_monotone(self):
        ledger = RegretLedger()
        prev = 0.0
        rng = np.random.default_rng(2)
        for _ in range(30):
            ledger.record(y=float(rng.uniform(-1, 1)), hint=0.0, prediction=0.0)
            assert ledger.algorithm_total >= prev >= 0.0
            prev = ledger.algorithm_total


class TestDynamicRegret:
    def trace_of(self, functions):
        return ComparatorTrace(spec=SPEC, functions=functions)

    def test_perfect_tracking_gives_zero(self):
        f = expansion([[0.0, 0.0]], [0.5])
        ledger = RegretLedger()
        xs = [np.array([0.1, 0.2]), np.array([-0.4, 0.3])]
        for x in xs:
            ledger.record(y=1.0, hint=0.0, prediction=f.evaluate(x), comparator_value=f.evaluate(x))
        assert dynamic_regret(ledger, self.trace_of([f, f])) == 0.0

    def test_single_step_worked_example(self):
        f = expansion([[0.0, 0.0]], [2.0])  # f(0) = 2
        ledger = RegretLedger()
        ledger.record(y=2.0, hint=0.0, prediction=0.0, comparator_value=f.evaluate(np.zeros(2)))
        assert dynamic_regret(ledger, self.trace_of([f])) == pytest.approx(2.0, abs=1e-15)

    def test_matches_independent_accumulation(self):
        rng = np.random.default_rng(3)
        f = expansion([[0.0, 0.0]], [1.0])
        ledger = RegretLedger()
        expected = 0.0
        for _ in range(50):
            y = float(rng.uniform(-1, 1))
            pred = float(rng.uniform(-1, 1))
            x = rng.normal(size=2)
            fv = f.evaluate(x)
            ledger.record(y=y, hint=0.0, prediction=pred, comparator_value=fv)
            expected += 0.5 * (pred - y) ** 2 - 0.5 * (fv - y) ** 2
        trace = self.trace_of([f] * 50)
        assert dynamic_regret(ledger, trace) == pytest.approx(expected, abs=1e-10)

    def test_length_mismatch_rejected(self):
        ledger = RegretLedger()
        ledger.record(y=0.0, hint=0.0, prediction=0.0, comparator_value=0.0)
        with pytest.raises(ValueError):
            dynamic_regret(ledger, self.trace_of([expansion([[0, 0]], [1.0])] * 2))


class TestPathLength:
    def test_constant_sequence_is_zero(self):
        f = expansion([[0.3, 0.3]], [1.2])
        assert path_length(ComparatorTrace(spec=SPEC, functions=[f] * 5)) == 0.0

    def test_zero_to_unit_kernel_section(self):
        zero = expansion(np.zeros((0, 2)), [])
        bump = expansion([[0.7, -0.1]], [1.0])  # |k(., x0)| = sqrt(k(x0, x0)) = 1
        trace = ComparatorTrace(spec=SPEC, functions=[zero, bump])
        assert path_length(trace) == pytest.approx(1.0, rel=1e-12)

    def test_two_anchor_coefficient_swap(self):
        # anchors with k(x1, x2) = 1/2; moving coefficients (1,0) -> (0,1)
        # has increment norm sqrt(1 + 1 - 2 * 0.5) = 1
        d = math.sqrt(2.0 * math.log(2.0))
        anchors = [[0.0, 0.0], [d, 0.0]]
        trace = ComparatorTrace(
            spec=SPEC,
            functions=[expansion(anchors, [1.0, 0.0]), expansion(anchors, [0.0, 1.0])],
        )
        assert path_length(trace) == pytest.approx(1.0, rel=1e-12)

    def test_trace_caches_path_and_norm_cap(self):
        f = expansion([[0.0, 0.0]], [2.0])
        g = expansion([[0.0, 0.0]], [1.0])
        trace = ComparatorTrace(spec=SPEC, functions=[f, g])
        assert trace.path == pytest.approx(1.0, rel=1e-12)
        assert trace.norm_cap == pytest.approx(2.0, rel=1e-12)


class TestDvawRegretBound:
    def test_zero_comparators_and_hints_reduce_to_two_terms(self):
        rng = np.random.default_rng(4)
        T, m, gamma, lam = 12, 3, 0.7, 0.9
        feats = rng.normal(size=(T, m))
        labels = rng.uniform(-1, 1, size=T)
        hints = np.zeros(T)
        value = dvaw_regret_bound(gamma, lam, np.zeros((T, m)), feats, labels, hints)
        energy = sum(
            gamma ** (T - t) * float(feats[t - 1] @ feats[t - 1]) for t in range(1, T + 1)
        )
        expected = m / 2.0 * float(np.max(labels**2)) * math.log(1.0 + energy / (lam * m)) + (
            m / 2.0 * float(np.sum(labels**2)) * math.log(1.0 / gamma)
        )
        assert value == pytest.approx(expected, rel=1e-12)

    def test_gamma_one_constant_comparator_equals_static_bound(self):
        rng = np.random.default_rng(5)
        T, m, lam = 20, 4, 1.3
        feats = rng.normal(size=(T, m))
        labels = rng.uniform(-1, 1, size=T)
        hints = rng.uniform(-0.5, 0.5, size=T)
        u = rng.normal(size=m)
        dyn = dvaw_regret_bound(1.0, lam, np.tile(u, (T, 1)), feats, labels, hints)
        static = vaw_static_bound(lam, u, feats, labels, hints)
        assert dyn == pytest.approx(static, abs=1e-12)

    def test_dominates_measured_regret_on_random_instance(self):
        rng = np.random.default_rng(6)
        T, m, gamma, lam = 30, 3, 0.85, 0.8
        feats = rng.uniform(-1, 1, size=(T, m))
        labels = rng.uniform(-1, 1, size=T)
        hints = np.zeros(T)
        u_seq = np.cumsum(rng.normal(0, 0.1, size=(T, m)), axis=0)
        fc = DvawForecaster(m, gamma, lam)
        loss = 0.0
        for t in range(T):
            pred, staged = fc.predict(feats[t], hints[t])
            loss += 0.5 * (pred - labels[t]) ** 2
            fc.commit(staged, labels[t])
        comp = float(np.sum(0.5 * (np.sum(feats * u_seq, axis=1) - labels) ** 2))
        assert loss - comp <= dvaw_regret_bound(gamma, lam, u_seq, feats, labels, hints) + 1e-8

    def test_gamma_zero_rejected(self):
        with pytest.raises(ValueError):
            dvaw_regret_bound(0.0, 1.0, np.zeros((2, 1)), np.ones((2, 1)), np.ones(2), np.zeros(2))


class TestClosedFormConstants:
    def test_drift_loss_rate_degenerate(self):
        for m in (1, 3, 100):
            assert drift_loss_rate(1.0, 0.0, 1.0, m) == 1.0

    def test_drift_loss_rate_worked_example(self):
        value = drift_loss_rate(math.sqrt(2.0), 1.0, 1.0, 4)
        assert value == pytest.approx(3.0 + math.sqrt(2.0), rel=1e-15)
        assert value == pytest.approx(4.41421356, abs=1e-8)

    def test_drift_loss_rate_limit(self):
        assert drift_loss_rate(1.0, 1.0, 1.0, math.inf) == 2.0

    def test_optimal_discount_odds_worked_example(self):
        assert optimal_discount_odds(2, 8.0, 1.0, 1.0) == pytest.approx(math.sqrt(8.0), rel=1e-15)

    def test_optimal_discount_odds_zero_path_is_infinite(self):
        assert optimal_discount_odds(3, 5.0, 1.0, 0.0) == math.inf

    def test_tradeoff_is_minimized_at_the_optimum(self):
        m, d2, rate, path = 5, 3.7, 2.1, 0.6
        eta_star = optimal_discount_odds(m, d2, rate, path)
        best = discount_odds_tradeoff(eta_star, m, d2, rate, path)
        for eta in np.geomspace(eta_star / 50.0, eta_star * 50.0, 400):
            assert best <= discount_odds_tradeoff(float(eta), m, d2, rate, path) + 1e-12

    def test_bad_feature_count_rejected(self):
        with pytest.raises(ValueError):
            drift_loss_rate(1.0, 1.0, 1.0, 0)
        with pytest.raises(ValueError):
            optimal_discount_odds(0, 1.0, 1.0, 1.0)

    def test_rate_dominates_mc_loss_shift_between_lifted_comparators(self):
        # the expected one-step loss change between the lifts of two nearby
        # functions is at most the drift rate times their distance; checked
        # as a Monte-Carlo mean over feature-map seeds with 4-SE slack
        from hvawd.bounds import increment_norm
        from hvawd.features import lift_comparator, rkhs_norm, sample_feature_map

        rng = np.random.default_rng(61)
        anchors = rng.uniform(-1, 1, size=(3, 2))
        base = rng.standard_normal(3) * 0.4
        f = expansion(anchors, base)
        g = expansion(anchors, base + rng.standard_normal(3) * 0.15)
        x, y = np.array([0.3, -0.2]), 0.6
        m, n_seeds = 16, 300
        shifts = np.empty(n_seeds)
        for i in range(n_seeds):
            fmap = sample_feature_map(SPEC, m, seed=8800 + i)
            phi = fmap.evaluate(x)
            loss_f = 0.5 * (lift_comparator(f, fmap) @ phi - y) ** 2
            loss_g = 0.5 * (lift_comparator(g, fmap) @ phi - y) ** 2
            shifts[i] = loss_g - loss_f
        R = max(rkhs_norm(f), rkhs_norm(g))
        rate = drift_loss_rate(SPEC.a, R, abs(y), m)
        se = float(np.std(shifts, ddof=1) / math.sqrt(n_seeds))
        assert float(np.mean(shifts)) <= rate * increment_norm(f, g) + 4.0 * se


def brute_force_grid_size(m, horizon, base):
    eta_min, eta_max = 2.0 * m, float(m * horizon)
    values = set()
    i = 0
    while True:
        value = min(eta_min * base**i, eta_max)
        values.add(value)
        if value == eta_max:
            break
        i += 1
    return len(values)


class TestDiscountAdaptiveBound:
    def test_all_bounds_zero_collapses_to_half_lambda(self):
        value = discount_adaptive_bound(
            a=1.0, Y=0.0, hint_bound=0.0, R=0.0, m=4, base=2.0,
            lam=1.4, lam_base=0.25, horizon=64, path=3.0, hint_sq_sum=0.0,
        )
        assert value == pytest.approx(1.4 / 2.0, rel=1e-15)

    def test_matches_independent_spreadsheet_recomputation(self):
        # same formula assembled separately, term by term, with the grid
        # size enumerated brute-force
        a, Y, Yt, R = math.sqrt(2.0), 1.0, 1.0, 1.0
        m, base, lam, lam_base, T = 4, 2.0, 1.0, 0.25, 64
        path, d2 = 2.5, 30.0
        value = discount_adaptive_bound(
            a=a, Y=Y, hint_bound=Yt, R=R, m=m, base=base,
            lam=lam, lam_base=lam_base, horizon=T, path=path, hint_sq_sum=d2,
        )
        M = brute_force_grid_size(m, T, base)
        rho = a * (a * R + Y) + 2.0 * R * a * a / m
        z_sq = ((M - 1) * ((Y + Yt) ** 2 + 4 * Y * Y) + Yt * Yt) * T + 2 * (M - 1) * (
            Y + Yt
        ) ** 2 * m * math.log(1.0 + a * a * T / lam)
        terms = [
            (1.0 + base) * math.sqrt(m * rho * path * d2 / 2.0),
            0.5 * (Y + Yt) ** 2,
            lam_base * R * path,
            lam_base * R * R / 2.0,
            m / 2.0 * (Y + Yt) ** 2 * math.log(1.0 + a * a * T / (lam_base * m)),
            a * a * R * R * T / (2.0 * m),
            lam / 2.0,
            M * Y * Y / 2.0 * math.log(1.0 + z_sq / (lam * M)),
        ]
        assert value == pytest.approx(math.fsum(terms), rel=1e-9)

    def test_zero_path_zero_norm_keeps_only_static_terms(self):
        a, Y, Yt = 1.0, 1.0, 0.5
        m, base, lam, lam_base, T = 8, 2.0, 1.0, 0.125, 256
        value = discount_adaptive_bound(
            a=a, Y=Y, hint_bound=Yt, R=0.0, m=m, base=base,
            lam=lam, lam_base=lam_base, horizon=T, path=0.0, hint_sq_sum=12.0,
        )
        M = brute_force_grid_size(m, T, base)
        z_sq = prediction_energy_bound(m, T, base, lam, Y, Yt, a)
        expected = (
            0.5 * (Y + Yt) ** 2
            + m / 2.0 * (Y + Yt) ** 2 * math.log(1.0 + a * a * T / (lam_base * m))
            + lam / 2.0
            + M * Y * Y / 2.0 * math.log(1.0 + z_sq / (lam * M))
        )
        assert value == pytest.approx(expected, rel=1e-12)


class TestHierarchyEnvelope:
    def test_zero_path_drops_dynamic_term(self):
        T, a, Y, Yt, R, b = 256, 1.0, 1.0, 0.5, 2.0, 2.0
        value = hierarchy_regret_envelope(T, 0.0, 10.0, a, Y, Yt, R, b)
        expected = (Y + Yt) ** 2 * math.sqrt(T) * math.log(T) + a * a * R * R * math.sqrt(T)
        assert value == pytest.approx(expected, rel=1e-15)

    def test_large_m_rate_constant(self):
        assert drift_loss_rate(1.0, 1.0, 1.0, math.inf) == 2.0

    def test_doubling_path_scales_dynamic_term_by_cube_root_two(self):
        T, a, Y, Yt, R, b = 128, 1.0, 1.0, 0.0, 1.0, 2.0
        base_static = hierarchy_regret_envelope(T, 0.0, 5.0, a, Y, Yt, R, b)
        v1 = hierarchy_regret_envelope(T, 1.0, 5.0, a, Y, Yt, R, b) - base_static
        v2 = hierarchy_regret_envelope(T, 2.0, 5.0, a, Y, Yt, R, b) - base_static
        assert v2 == pytest.approx(2.0 ** (1.0 / 3.0) * v1, rel=1e-12)
