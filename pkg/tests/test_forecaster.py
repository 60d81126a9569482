"""Discounted forecaster, aggregator, rank-one inverse update and hints."""

import numpy as np
import pytest

from hvawd.bounds import vaw_static_bound
from hvawd.errors import ProtocolError
from hvawd.forecaster import (
    DvawBank,
    DvawForecaster,
    HintPolicy,
    VawForecaster,
    hint_emit,
    woodbury_step,
)


def random_spd(rng, m, lo=0.3, hi=3.0):
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    return (q * rng.uniform(lo, hi, size=m)) @ q.T


class TestWoodburyStep:
    def test_zero_vector_just_rescales(self):
        inv = random_spd(np.random.default_rng(1), 4)
        out = woodbury_step(inv, np.zeros(4), 0.25)
        np.testing.assert_allclose(out, inv / 0.25, rtol=1e-15)

    def test_identity_with_basis_vector(self):
        out = woodbury_step(np.eye(3), np.array([1.0, 0.0, 0.0]), 1.0)
        expected = np.eye(3)
        expected[0, 0] = 0.5  # direct inverse of I + e1 e1^T
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_matches_dense_inversion_on_random_probes(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(200):
            m = int(rng.integers(1, 9))
            inv = random_spd(rng, m)
            v = rng.standard_normal(m)
            gamma = float(rng.uniform(0.05, 1.0))
            ref = np.linalg.inv(gamma * np.linalg.inv(inv) + np.outer(v, v))
            worst = max(worst, float(np.max(np.abs(woodbury_step(inv, v, gamma) - ref))))
        assert worst <= 1e-8

    def test_output_stays_positive_definite(self):
        rng = np.random.default_rng(3)
        inv = random_spd(rng, 5)
        for _ in range(50):
            inv = woodbury_step(inv, rng.standard_normal(5), 0.7)
            inv = (inv + inv.T) / 2
            np.linalg.cholesky(inv)


class TestDvawForecaster:
    def test_first_prediction_with_zero_hint_is_zero(self):
        fc = DvawForecaster(m=3, gamma=0.9, lam=1.0)
        pred, _ = fc.predict(np.array([0.5, -1.0, 2.0]), hint=0.0)
        assert pred == 0.0

    def test_hand_solved_two_step_instance(self):
        # m=1, lam=1, gamma=0.5; feat 1 throughout. Step 2 minimizes
        # 0.5 (w - 1)^2 + 0.5 (0.5 * 0.5 w^2 + 0.5 (w - 1)^2), i.e.
        # 1.75 w = 1.5, so the prediction is 6/7.
        fc = DvawForecaster(m=1, gamma=0.5, lam=1.0)
        pred1, staged = fc.predict(np.array([1.0]), hint=0.0)
        assert pred1 == 0.0
        fc.commit(staged, 1.0)
        pred2, _ = fc.predict(np.array([1.0]), hint=1.0)
        np.testing.assert_allclose(pred2, 6.0 / 7.0, rtol=1e-15)

    def test_inverse_after_first_step_matches_direct_inversion(self):
        fc = DvawForecaster(m=1, gamma=0.5, lam=2.0)
        _, staged = fc.predict(np.array([1.0]), hint=0.0)
        # S_1 = v^2 + gamma * lam = 1 + 0.5 * 2 = 2
        np.testing.assert_allclose(staged.inv_after, [[0.5]], rtol=1e-15)

    def test_commit_scales_discounted_sum(self):
        fc = DvawForecaster(m=2, gamma=0.5, lam=1.0)
        _, staged = fc.predict(np.array([1.0, 2.0]), hint=0.0)
        fc.commit(staged, 3.0)
        np.testing.assert_allclose(fc.disc_sum, [3.0, 6.0])
        _, staged = fc.predict(np.zeros(2), hint=0.0)
        fc.commit(staged, 0.0)
        np.testing.assert_allclose(fc.disc_sum, [1.5, 3.0])  # halved only

    def test_single_unit_step_sets_disc_sum_to_label(self):
        fc = DvawForecaster(m=1, gamma=0.5, lam=1.0)
        _, staged = fc.predict(np.array([1.0]), hint=0.0)
        fc.commit(staged, 1.0)
        np.testing.assert_allclose(fc.disc_sum, [1.0])

    def test_disc_sum_matches_brute_force_recomputation(self):
        rng = np.random.default_rng(7)
        gamma = 0.83
        fc = DvawForecaster(m=3, gamma=gamma, lam=0.5)
        feats, labels = [], []
        for _ in range(50):
            v = rng.standard_normal(3)
            y = float(rng.uniform(-1, 1))
            _, staged = fc.predict(v, hint=0.0)
            fc.commit(staged, y)
            feats.append(v)
            labels.append(y)
        t = len(feats)
        direct = sum(gamma ** (t - s) * labels[s - 1] * feats[s - 1] for s in range(1, t + 1))
        np.testing.assert_allclose(fc.disc_sum, direct, atol=1e-10)

    def test_sigma_recursion_reconstruction(self):
        rng = np.random.default_rng(17)
        gamma, lam, m = 0.9, 0.7, 4
        fc = DvawForecaster(m=m, gamma=gamma, lam=lam)
        sigma = lam * np.eye(m)
        for _ in range(100):
            v = rng.standard_normal(m)
            sigma = np.outer(v, v) + gamma * sigma
            _, staged = fc.predict(v, hint=float(rng.uniform(-1, 1)))
            fc.commit(staged, float(rng.uniform(-1, 1)))
            np.testing.assert_allclose(fc.inv_sigma, np.linalg.inv(sigma), atol=1e-8)
            np.linalg.cholesky((fc.inv_sigma + fc.inv_sigma.T) / 2)

    def test_predictions_match_dense_objective_minimizer(self):
        # recursive predictions vs the argmin of the hinted current loss
        # plus discounted past losses, solved densely at every step
        rng = np.random.default_rng(13)
        for gamma in (0.4, 0.95, 1.0):
            m, lam, T = 3, 0.6, 40
            fc = DvawForecaster(m=m, gamma=gamma, lam=lam)
            feats = rng.standard_normal((T, m))
            labels = rng.uniform(-1, 1, size=T)
            hints = rng.uniform(-1, 1, size=T)
            hints[0] = 0.0
            for t in range(T):
                pred, staged = fc.predict(feats[t], hints[t])
                weights = gamma ** (t - np.arange(t))  # for past steps 0..t-1
                H = gamma ** (t + 1) * lam * np.eye(m) + np.outer(feats[t], feats[t])
                H += np.einsum("s,si,sj->ij", weights, feats[:t], feats[:t])
                rhs = hints[t] * feats[t] + (weights * labels[:t]) @ feats[:t]
                dense = float(np.linalg.solve(H, rhs) @ feats[t])
                assert abs(pred - dense) <= 1e-8
                fc.commit(staged, labels[t])

    def test_double_predict_raises(self):
        fc = DvawForecaster(m=1, gamma=1.0, lam=1.0)
        fc.predict(np.ones(1), hint=0.0)
        with pytest.raises(ProtocolError):
            fc.predict(np.ones(1), hint=0.0)

    def test_stale_commit_raises(self):
        fc = DvawForecaster(m=1, gamma=1.0, lam=1.0)
        _, staged = fc.predict(np.ones(1), hint=0.0)
        fc.commit(staged, 1.0)
        with pytest.raises(ProtocolError):
            fc.commit(staged, 1.0)

    def test_gamma_zero_not_representable(self):
        with pytest.raises(ValueError):
            DvawForecaster(m=1, gamma=0.0, lam=1.0)

    def test_dimension_mismatch(self):
        fc = DvawForecaster(m=2, gamma=1.0, lam=1.0)
        with pytest.raises(ValueError):
            fc.predict(np.ones(3), hint=0.0)


class TestVawForecaster:
    def test_first_prediction_is_zero(self):
        fc = VawForecaster(dim=2, lam=1.0)
        pred, _ = fc.predict(np.array([1.0, -1.0]))
        assert pred == 0.0

    def test_hand_solved_ridge_step(self):
        # dim=1, lam=1: after (z=3, y=3), step 2 with z=3 gives
        # S_2 = 1 + 9 + 9 = 19, weight 9/19, prediction 27/19
        fc = VawForecaster(dim=1, lam=1.0)
        _, staged = fc.predict(np.array([3.0]))
        fc.commit(staged, 3.0)
        pred, _ = fc.predict(np.array([3.0]))
        np.testing.assert_allclose(pred, 27.0 / 19.0, rtol=1e-15)

    def test_single_step_label_sum(self):
        fc = VawForecaster(dim=2, lam=1.0)
        _, staged = fc.predict(np.array([1.0, 2.0]))
        fc.commit(staged, 2.0)
        np.testing.assert_allclose(fc.label_sum, [2.0, 4.0])

    def test_zero_step_leaves_state_unchanged_except_counter(self):
        fc = VawForecaster(dim=2, lam=1.0)
        _, staged = fc.predict(np.zeros(2))
        fc.commit(staged, 0.0)
        assert fc.t == 1
        np.testing.assert_array_equal(fc.label_sum, np.zeros(2))
        np.testing.assert_allclose(fc.inv_sigma, np.eye(2), rtol=1e-15)

    def test_trace_matches_dense_ridge_solve(self):
        rng = np.random.default_rng(11)
        dim, lam = 3, 0.8
        fc = VawForecaster(dim=dim, lam=lam)
        zs, ys = [], []
        for _ in range(50):
            z = rng.standard_normal(dim)
            y = float(rng.uniform(-1, 1))
            pred, staged = fc.predict(z)
            # dense: S_t = lam I + sum_{s<=t} z_s z_s^T, b = sum_{s<t} y_s z_s
            sigma = lam * np.eye(dim) + sum(np.outer(u, u) for u in zs) + np.outer(z, z)
            b = sum(y_s * u for y_s, u in zip(ys, zs)) if zs else np.zeros(dim)
            dense = float(np.linalg.solve(sigma, b) @ z)
            assert abs(pred - dense) <= 1e-8
            fc.commit(staged, y)
            zs.append(z)
            ys.append(y)

    def test_identical_experts_reduce_to_scaled_scalar_forecaster(self):
        # M experts all emitting p_t: the aggregator equals a 1-dim
        # undiscounted forecaster fed sqrt(M) * p_t
        rng = np.random.default_rng(23)
        M = 5
        agg = VawForecaster(dim=M, lam=1.3)
        scalar = DvawForecaster(m=1, gamma=1.0, lam=1.3)
        for _ in range(40):
            p = float(rng.uniform(-1, 1))
            y = float(rng.uniform(-1, 1))
            pred_m, staged_m = agg.predict(np.full(M, p))
            pred_1, staged_1 = scalar.predict(np.array([np.sqrt(M) * p]), hint=0.0)
            assert abs(pred_m - pred_1) <= 1e-10
            agg.commit(staged_m, y)
            scalar.commit(staged_1, y)


class TestReductionToUndiscounted:
    def test_dvaw_gamma_one_zero_hints_equals_vaw(self):
        rng = np.random.default_rng(31)
        for trial in range(20):
            dim = int(rng.integers(1, 5))
            lam = float(rng.uniform(0.3, 2.0))
            dvaw = DvawForecaster(m=dim, gamma=1.0, lam=lam)
            vaw = VawForecaster(dim=dim, lam=lam)
            for _ in range(30):
                z = rng.standard_normal(dim)
                y = float(rng.uniform(-1, 1))
                p_d, s_d = dvaw.predict(z, hint=0.0)
                p_v, s_v = vaw.predict(z)
                assert abs(p_d - p_v) <= 1e-12
                dvaw.commit(s_d, y)
                vaw.commit(s_v, y)

    def test_static_regret_dominated_by_closed_form_bound(self):
        rng = np.random.default_rng(37)
        for _ in range(25):
            dim = int(rng.integers(1, 5))
            lam = float(rng.uniform(0.3, 2.0))
            T = int(rng.integers(10, 60))
            feats = rng.uniform(-1, 1, size=(T, dim))
            labels = rng.uniform(-1, 1, size=T)
            fc = VawForecaster(dim=dim, lam=lam)
            loss = 0.0
            for t in range(T):
                pred, staged = fc.predict(feats[t])
                loss += 0.5 * (pred - labels[t]) ** 2
                fc.commit(staged, labels[t])
            # best-in-hindsight ridge comparator
            u = np.linalg.solve(
                lam * np.eye(dim) + feats.T @ feats, feats.T @ labels
            )
            regret = loss - float(np.sum(0.5 * (feats @ u - labels) ** 2))
            assert regret <= vaw_static_bound(lam, u, feats, labels) + 1e-8


class TestHintEmit:
    def test_zero_policy(self):
        assert hint_emit(HintPolicy(kind="zero", clip=1.0), t=5, last_label=3.0) == 0.0

    def test_first_step_is_always_zero(self):
        policy = HintPolicy(kind="last-label", clip=10.0)
        assert hint_emit(policy, t=1, last_label=None) == 0.0
        assert hint_emit(HintPolicy(kind="external", clip=5.0), t=1, external=4.0) == 0.0

    def test_last_label_clamps(self):
        assert hint_emit(HintPolicy(kind="last-label", clip=1.0), t=2, last_label=3.7) == 1.0
        assert hint_emit(HintPolicy(kind="last-label", clip=10.0), t=3, last_label=-2.5) == -2.5

    def test_external_requires_value(self):
        policy = HintPolicy(kind="external", clip=1.0)
        with pytest.raises(ValueError):
            hint_emit(policy, t=2)
        assert hint_emit(policy, t=2, external=0.4) == 0.4

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            HintPolicy(kind="oracle", clip=1.0)


class TestDvawBank:
    def test_bank_matches_individual_forecasters(self):
        rng = np.random.default_rng(41)
        gammas = [0.5, 0.8, 1.0]
        lams = [1.0, 0.5, 2.0]
        dim = 4
        bank = DvawBank(dim, gammas, lams)
        singles = [DvawForecaster(dim, g, l) for g, l in zip(gammas, lams)]
        for _ in range(60):
            v = rng.standard_normal(dim)
            hint = float(rng.uniform(-1, 1))
            y = float(rng.uniform(-1, 1))
            feats = np.tile(v, (3, 1))
            preds, staged = bank.predict(feats, hint)
            for k, fc in enumerate(singles):
                p, s = fc.predict(v, hint)
                assert abs(p - preds[k]) <= 1e-12
                fc.commit(s, y)
            bank.commit(staged, y)

    def test_zero_padding_is_exact(self):
        # an expert padded with trailing zero feature coordinates predicts
        # exactly as its unpadded counterpart
        rng = np.random.default_rng(43)
        true_dim, pad_dim = 3, 8
        bank = DvawBank(pad_dim, [0.7], [0.9])
        single = DvawForecaster(true_dim, 0.7, 0.9)
        for _ in range(50):
            v = rng.standard_normal(true_dim)
            hint = float(rng.uniform(-1, 1))
            y = float(rng.uniform(-1, 1))
            padded = np.zeros((1, pad_dim))
            padded[0, :true_dim] = v
            preds, staged_b = bank.predict(padded, hint)
            p, staged_s = single.predict(v, hint)
            assert abs(preds[0] - p) <= 1e-12
            bank.commit(staged_b, y)
            single.commit(staged_s, y)
        # padding coordinates of the state never moved
        np.testing.assert_array_equal(bank.disc_sums[0, true_dim:], np.zeros(pad_dim - true_dim))

    def test_bank_protocol_errors(self):
        bank = DvawBank(2, [0.9], [1.0])
        _, staged = bank.predict(np.ones((1, 2)), 0.0)
        with pytest.raises(ProtocolError):
            bank.predict(np.ones((1, 2)), 0.0)
        bank.commit(staged, 1.0)
        with pytest.raises(ProtocolError):
            bank.commit(staged, 1.0)
