import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from deltaz import policy as P
from oracles import dual_grid_oracle, fraction_moments

CFG = P.RepsConfig()

# three hand-listed samples, weights (0.5, 0.3, 0.2); moments from exact
# rational arithmetic (oracles.fraction_moments), frozen here
HAND_X = [[0.1, -0.2, 0.3, 0.4], [0.5, 0.0, -0.1, 0.2], [-0.3, 0.6, 0.2, -0.4]]
HAND_W = [0.5, 0.3, 0.2]
HAND_MEAN = [7 / 50, 1 / 50, 4 / 25, 9 / 50]
HAND_COV = [
    [49 / 625, -61 / 1250, -43 / 1250, 61 / 1250],
    [-61 / 1250, 229 / 2500, -23 / 2500, -229 / 2500],
    [-43 / 1250, -23 / 2500, 19 / 625, 23 / 2500],
    [61 / 1250, -229 / 2500, 23 / 2500, 229 / 2500],
]
# {0, 100} at eps = 0.5: dual minimiser from the full 1e6-point grid + golden refinement
ETA_0_100_HALF = 33.520587120955696

rewards_st = st.lists(st.floats(-200.0, 200.0, allow_nan=False), min_size=2, max_size=30)


def record(x, reward, success=False):
    x = np.asarray(x, dtype=float)
    return P.EpisodeRecord(x, np.clip(x, -1, 1), reward, 0.0, success)


class TestConfig:
    def test_batch_and_init_defaults(self):
        assert (CFG.init_batch, CFG.batch, CFG.replay_window) == (20, 10, 20)
        assert CFG.init_mean == 0.4 and CFG.init_var == 0.15

    @pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(batch=30), dict(replay_window=5), dict(max_updates=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            P.RepsConfig(**kw)


class TestInitAndSample:
    def test_init(self):
        p = P.init_policy(CFG)
        assert np.array_equal(p.mean, np.full(4, 0.4))
        assert np.array_equal(p.cov, np.diag(np.full(4, 0.15)))

    def test_init_deterministic(self):
        a, b = P.init_policy(CFG), P.init_policy(CFG)
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov)

    def test_policy_is_immutable(self):
        p = P.init_policy(CFG)
        with pytest.raises(ValueError):
            p.mean[0] = 1.0

    def test_degenerate_covariance(self):
        p = P.GaussianPolicy(np.full(4, 0.3), np.eye(4) * 1e-18)
        draws, _ = P.sample(p, np.random.default_rng(0), 50)
        assert np.max(np.abs(draws - 0.3)) < 1e-8

    def test_same_seed_same_samples(self):
        p = P.init_policy(CFG)
        a = P.sample(p, np.random.default_rng(3), 10)
        b = P.sample(p, np.random.default_rng(3), 10)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_large_sample_moments(self):
        draws, clipped = P.sample(P.init_policy(CFG), np.random.default_rng(11), 100_000)
        assert np.all(np.abs(draws.mean(axis=0) - 0.4) < 0.01)
        assert np.all(np.abs(draws.var(axis=0) / 0.15 - 1.0) < 0.05)
        assert clipped.min() >= -1.0 and clipped.max() <= 1.0

    def test_non_spd_raises(self):
        bad = P.GaussianPolicy(np.zeros(4), -np.eye(4))
        with pytest.raises(P.CholeskyFailure):
            P.sample(bad, np.random.default_rng(0), 1)

    def test_n_positive(self):
        with pytest.raises(ValueError):
            P.sample(P.init_policy(CFG), np.random.default_rng(0), 0)


class TestDual:
    def test_constant_rewards(self):
        r = [42.0] * 10
        assert P.solve_dual(r, 1.0) == P.dual_bracket(r)[1]
        assert np.allclose(P.weights_from(r, P.solve_dual(r, 1.0)), 0.1)

    def test_two_point_frozen(self):
        assert P.solve_dual([0.0, 100.0], 0.5) == pytest.approx(ETA_0_100_HALF, rel=1e-6)

    def test_two_point_live_oracle(self):
        for eps in (0.5, 1.0, 2.0):
            ref = dual_grid_oracle([0.0, 100.0], eps, brute=True)
            assert P.solve_dual([0.0, 100.0], eps) == pytest.approx(ref, rel=1e-6)

    def test_ternary_grid_search_equals_brute(self):
        rng = np.random.default_rng(5)
        for _ in range(3):
            r = rng.normal(0, 30, 20)
            assert dual_grid_oracle(r, 1.0) == dual_grid_oracle(r, 1.0, brute=True)

    def test_huge_epsilon_concentrates_on_argmax(self):
        w = P.weights_from([0.0, 100.0], P.solve_dual([0.0, 100.0], 1e6))
        assert w[1] > 1 - 1e-3

    def test_kl_bound_two_point(self):
        w = P.weights_from([0.0, 100.0], P.solve_dual([0.0, 100.0], 1.0))
        assert P.sample_kl(w) <= 1.0 + 1e-6

    def test_dual_value_formula(self):
        r = np.array([1.0, 2.0, 4.0])
        eta = 1.7
        direct = eta * 0.3 + eta * math.log(np.mean(np.exp(r / eta)))
        assert P.dual(eta, r, 0.3) == pytest.approx(direct, rel=1e-14)

    def test_epsilon_positive(self):
        with pytest.raises(ValueError):
            P.solve_dual([0.0, 1.0], 0.0)

    @settings(max_examples=150)
    @given(rewards_st, st.sampled_from([0.1, 0.5, 1.0, 2.0]))
    def test_kl_never_exceeds_bound(self, r, eps):
        assume(not P.is_degenerate(r))
        w = P.weights_from(r, P.solve_dual(r, eps))
        assert P.sample_kl(w) <= eps + 1e-6

    @settings(max_examples=100)
    @given(rewards_st, st.integers(-10**6, 10**6))
    def test_integer_shift_is_exact(self, r, c):
        # integer offsets of integer-valued rewards keep every difference exact
        r = [float(round(v)) for v in r]
        assume(not P.is_degenerate(r))
        shifted = [v + c for v in r]
        eta = P.solve_dual(r, 1.0)
        assert P.solve_dual(shifted, 1.0) == eta
        assert np.array_equal(P.weights_from(shifted, eta), P.weights_from(r, eta))

    @settings(max_examples=100)
    @given(rewards_st, st.floats(-1e3, 1e3))
    def test_real_shift_within_rounding(self, r, c):
        assume(max(r) - min(r) > 1e-3)
        shifted = [v + c for v in r]
        assert P.solve_dual(shifted, 1.0) == pytest.approx(P.solve_dual(r, 1.0), rel=1e-6)


class TestWeights:
    def test_equal_rewards_uniform(self):
        assert np.array_equal(P.weights_from([3.0] * 4, 1.0), np.full(4, 0.25))

    def test_huge_eta_uniform(self):
        assert np.allclose(P.weights_from([0.0, 50.0, 100.0], 1e12), 1 / 3, atol=1e-9)

    def test_eta_positive(self):
        with pytest.raises(ValueError):
            P.weights_from([0.0, 1.0], 0.0)

    @given(rewards_st, st.floats(1e-3, 1e3))
    def test_normalized_and_monotone(self, r, eta):
        w = P.weights_from(r, eta)
        assert abs(w.sum() - 1.0) < 1e-12
        assert np.all(w >= 0)
        assert np.all(w <= 1.0)
        order = np.argsort(r, kind="stable")
        assert np.all(np.diff(w[order]) >= -1e-15)


class TestWeightedUpdate:
    # three samples span a plane, so compare against the raw moments with the
    # eigenvalue floor switched off
    NO_FLOOR = P.RepsConfig(cov_floor=0.0)

    def test_hand_values(self):
        pol = P.weighted_ml_update(HAND_X, HAND_W, self.NO_FLOOR)
        assert np.max(np.abs(pol.mean - HAND_MEAN)) < 1e-12
        assert np.max(np.abs(pol.cov - HAND_COV)) < 1e-12

    def test_hand_values_live_fraction_oracle(self):
        mean, cov = fraction_moments(HAND_X, HAND_W)
        pol = P.weighted_ml_update(HAND_X, HAND_W, self.NO_FLOOR)
        assert np.max(np.abs(pol.mean - np.array(mean, dtype=float))) < 1e-12
        assert np.max(np.abs(pol.cov - np.array(cov, dtype=float))) < 1e-12

    def test_hand_values_floored(self):
        vals, vecs = np.linalg.eigh(np.array(HAND_COV))
        floored = (vecs * np.maximum(vals, CFG.cov_floor)) @ vecs.T
        pol = P.weighted_ml_update(HAND_X, HAND_W, CFG)
        assert np.max(np.abs(pol.cov - floored)) < 1e-12
        assert np.linalg.eigvalsh(pol.cov).min() >= CFG.cov_floor - 1e-15

    def test_uniform_weights_are_sample_mle(self):
        x = np.random.default_rng(2).normal(size=(12, 4))
        pol = P.weighted_ml_update(x, np.full(12, 1 / 12), CFG)
        assert np.allclose(pol.mean, x.mean(axis=0), atol=1e-14)
        assert np.allclose(pol.cov, np.cov(x.T, bias=True), atol=1e-14)

    def test_one_hot_weight_floors(self):
        x = np.random.default_rng(4).normal(size=(5, 4))
        pol = P.weighted_ml_update(x, [0, 0, 1, 0, 0], CFG)
        assert np.array_equal(pol.mean, x[2])
        assert np.allclose(pol.cov, CFG.cov_floor * np.eye(4), atol=1e-18)

    def test_too_few(self):
        with pytest.raises(P.TooFewSamples):
            P.weighted_ml_update([[0, 0, 0, 0]], [1.0], CFG)

    @settings(max_examples=60)
    @given(st.integers(2, 25), st.integers(0, 10**6))
    def test_spd_and_floor(self, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, 4)) * rng.uniform(0, 1, 4)
        w = rng.dirichlet(np.ones(n))
        pol = P.weighted_ml_update(x, w, CFG)
        pol.cholesky()
        assert np.array_equal(pol.cov, pol.cov.T)
        assert np.linalg.eigvalsh(pol.cov).min() >= CFG.cov_floor - 1e-12


class TestRepsUpdate:
    def test_identical_records_keep_policy(self):
        # constant rewards carry no preference: the policy is returned unchanged
        old = P.init_policy(CFG)
        replay = [record([0.2, 0.1, -0.3, 0.5], 5.0) for _ in range(20)]
        new, info = P.reps_update(old, replay, CFG)
        assert info.degenerate and new is old

    def test_identical_draws_collapse_under_uniform_weights(self):
        x = np.tile([0.2, 0.1, -0.3, 0.5], (20, 1))
        pol = P.weighted_ml_update(x, np.full(20, 0.05), CFG)
        assert np.allclose(pol.mean, [0.2, 0.1, -0.3, 0.5], atol=1e-15)
        assert np.allclose(pol.cov, CFG.cov_floor * np.eye(4), atol=1e-15)

    def test_window_is_last_twenty(self):
        rng = np.random.default_rng(9)
        old_batch = [record(rng.normal(size=4), 1000.0) for _ in range(10)]
        a = [record(rng.normal(size=4), r) for r in rng.normal(0, 10, 10)]
        b = [record(rng.normal(size=4), r) for r in rng.normal(0, 10, 10)]
        pol = P.init_policy(CFG)
        new, info = P.reps_update(pol, old_batch + a + b, CFG)
        # the high-reward oldest batch is outside the window and must not matter
        ref, _ = P.reps_update(pol, a + b, CFG)
        assert np.array_equal(new.mean, ref.mean) and np.array_equal(new.cov, ref.cov)
        assert info.weights.shape == (20,) and np.all(info.weights > 0)

    def test_kl_respected_and_old_untouched(self):
        rng = np.random.default_rng(1)
        pol = P.init_policy(CFG)
        mean_before = pol.mean.copy()
        draws, _ = P.sample(pol, rng, 20)
        replay = [record(d, -np.sum((d - 0.1) ** 2)) for d in draws]
        new, info = P.reps_update(pol, replay, CFG)
        assert P.sample_kl(info.weights) <= CFG.epsilon + 1e-6
        assert math.isfinite(P.gaussian_kl(new, pol))
        assert np.array_equal(pol.mean, mean_before)

    def test_needs_a_batch(self):
        with pytest.raises(P.TooFewSamples):
            P.reps_update(P.init_policy(CFG), [record(np.zeros(4), 0.0)] * 3, CFG)

    def test_improves_a_quadratic(self):
        rng = np.random.default_rng(0)
        pol = P.init_policy(CFG)
        target = np.array([-0.2, 0.5, 0.1, -0.6])
        replay = []
        for _ in range(30):
            draws, _ = P.sample(pol, rng, 10)
            replay = (replay + [record(d, -np.sum((d - target) ** 2)) for d in draws])[-20:]
            pol, _ = P.reps_update(pol, replay, CFG)
        # ~1.21 at the start; eps = 1 with 20 samples shrinks fast, so expect
        # a large gain rather than the exact optimum
        assert np.linalg.norm(pol.mean - target) < 0.6


class TestTermination:
    def test_all_success(self):
        assert P.should_terminate([record(np.zeros(4), 100, True)] * 10, CFG)

    def test_nine_of_ten(self):
        batch = [record(np.zeros(4), 100, True)] * 9 + [record(np.zeros(4), 0, False)]
        assert not P.should_terminate(batch, CFG)

    def test_empty(self):
        assert not P.should_terminate([], CFG)


class TestGaussianKL:
    def test_self(self):
        p = P.init_policy(CFG)
        assert P.gaussian_kl(p, p) == pytest.approx(0.0, abs=1e-14)

    def test_unit_shift(self):
        p = P.GaussianPolicy(np.zeros(4), np.eye(4))
        q = P.GaussianPolicy(np.array([1.0, 0, 0, 0]), np.eye(4))
        assert P.gaussian_kl(p, q) == pytest.approx(0.5, abs=1e-14)

    def test_scaled_covariance(self):
        p = P.GaussianPolicy(np.zeros(4), np.eye(4))
        q = P.GaussianPolicy(np.zeros(4), 2 * np.eye(4))
        assert P.gaussian_kl(p, q) == pytest.approx(0.386294361119890, abs=1e-12)
