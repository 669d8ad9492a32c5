import math

import numpy as np
import pytest

from cpex import envs
from cpex.envs import PriorSpec, Task


RNG = lambda seed=0: np.random.default_rng(seed)


class TestSampleTask:
    def test_binary_search_ranges(self):
        task = envs.sample_task(envs.BINARY_SEARCH, 2, PriorSpec(), 0.2, RNG(1))
        assert task.x_star.shape == (2,)
        assert np.all(np.abs(task.x_star) <= 1.0)
        assert task.noise_sigma == 0.0
        assert task.noise_p == 0.0

    def test_eps_best_arm_on_unit_sphere(self):
        for seed in range(20):
            task = envs.sample_task(envs.EPS_BEST_ARM, 6, PriorSpec(), 0.2, RNG(seed))
            assert abs(np.linalg.norm(task.x_star) - 1.0) < 1e-9
            assert task.noise_sigma == pytest.approx(0.05)

    def test_eps_best_arm_beta_prior_normalized(self):
        task = envs.sample_task(envs.EPS_BEST_ARM, 4, PriorSpec("beta", 3, 3), 0.2, RNG(0))
        assert abs(np.linalg.norm(task.x_star) - 1.0) < 1e-9

    def test_ackley_param_ranges(self):
        for seed in range(20):
            task = envs.sample_task(envs.ACKLEY, 3, PriorSpec(), 0.1, RNG(seed))
            a, b, c = task.ackley_params
            assert a == 10.0
            assert 0.1 <= b <= 0.5
            assert math.pi <= c <= 4 * math.pi
            assert task.noise_sigma == pytest.approx(0.05)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            envs.sample_task(envs.BINARY_SEARCH, 0, PriorSpec(), 0.2, RNG(0))
        with pytest.raises(ValueError):
            envs.sample_task(envs.BINARY_SEARCH, 2, PriorSpec(), -0.1, RNG(0))
        with pytest.raises(ValueError):
            envs.sample_task("maze", 2, PriorSpec(), 0.2, RNG(0))

    def test_beta_prior_respects_shape(self):
        # Beta(9, 1) mass sits near +1 after the affine map.
        draws = [
            envs.sample_task(envs.BINARY_SEARCH, 1, PriorSpec("beta", 9.0, 1.0), 0.2, RNG(s)).x_star[0]
            for s in range(200)
        ]
        assert np.mean(draws) > 0.5


class TestInitialObservation:
    def test_widths(self):
        t_bin = envs.sample_task(envs.BINARY_SEARCH, 3, PriorSpec(), 0.2, RNG(0))
        t_arm = envs.sample_task(envs.EPS_BEST_ARM, 5, PriorSpec(), 0.2, RNG(0))
        t_ack = envs.sample_task(envs.ACKLEY, 4, PriorSpec(), 0.2, RNG(0))
        assert np.array_equal(envs.initial_observation(t_bin), np.zeros(3))
        assert np.array_equal(envs.initial_observation(t_arm), np.zeros(1))
        assert np.array_equal(envs.initial_observation(t_ack), np.zeros(1))


class TestStep:
    def test_binary_search_signs(self):
        task = Task(envs.BINARY_SEARCH, 2, np.array([0.5, -0.5]), eps=0.2)
        obs = envs.step(task, np.array([0.0, 0.0]), RNG(0))
        assert np.array_equal(obs, np.array([1.0, -1.0]))

    def test_binary_search_boundary_counts_as_below(self):
        task = Task(envs.BINARY_SEARCH, 1, np.array([0.25]), eps=0.2)
        assert envs.step(task, np.array([0.25]), RNG(0))[0] == 1.0

    def test_binary_search_observations_are_signs(self):
        task = envs.sample_task(envs.BINARY_SEARCH, 4, PriorSpec(), 0.2, RNG(3), noise_p=0.3)
        rng = RNG(4)
        for _ in range(50):
            obs = envs.step(task, rng.uniform(-1, 1, 4), rng)
            assert set(np.unique(obs)).issubset({-1.0, 1.0})

    def test_noiseless_signs_reconstruct_ordering(self):
        rng = RNG(7)
        for _ in range(50):
            task = envs.sample_task(envs.BINARY_SEARCH, 3, PriorSpec(), 0.2, rng)
            a = rng.uniform(-1, 1, 3)
            y = envs.step(task, a, rng)
            assert np.array_equal(y == 1.0, a <= task.x_star)

    def test_binary_search_noise_rate(self):
        task = Task(envs.BINARY_SEARCH, 1, np.array([0.9]), eps=0.2, noise_p=0.25)
        rng = RNG(5)
        obs = np.array([envs.step(task, np.array([-0.9]), rng)[0] for _ in range(4000)])
        # true sign is +1; flips occur at rate noise_p
        assert abs(np.mean(obs == -1.0) - 0.25) < 0.03

    def test_eps_best_arm_distance(self):
        x = np.array([1.0, 0.0])
        task = Task(envs.EPS_BEST_ARM, 2, x, eps=0.2, noise_sigma=0.0)
        assert envs.step(task, x, RNG(0))[0] == pytest.approx(0.0)
        obs = envs.step(task, np.array([0.0, 1.0]), RNG(0))[0]
        assert obs == pytest.approx(math.sqrt(2.0))

    def test_sphere_distance_identity(self):
        # On the unit sphere, squared distance equals 2 - 2 <a, x*>.
        rng = RNG(6)
        for _ in range(20):
            x = rng.standard_normal(4)
            x /= np.linalg.norm(x)
            a = rng.standard_normal(4)
            a /= np.linalg.norm(a)
            lhs = np.linalg.norm(x - a) ** 2
            rhs = 2.0 - 2.0 * float(a @ x)
            assert abs(lhs - rhs) < 1e-9

    def test_ackley_optimum_observation(self):
        task = Task(
            envs.ACKLEY, 2, np.array([0.3, -0.3]), eps=0.1,
            noise_sigma=0.0, ackley_params=(10.0, 0.2, 2 * math.pi),
        )
        assert envs.step(task, task.x_star.copy(), RNG(0))[0] == pytest.approx(0.0)

    def test_step_rejects_out_of_box(self):
        task = Task(envs.BINARY_SEARCH, 2, np.array([0.0, 0.0]), eps=0.2)
        with pytest.raises(ValueError):
            envs.step(task, np.array([1.5, 0.0]), RNG(0))

    def test_step_deterministic_given_seed(self):
        task = envs.sample_task(envs.ACKLEY, 3, PriorSpec(), 0.2, RNG(0))
        a = np.array([0.1, -0.2, 0.3])
        o1 = envs.step(task, a, RNG(42))
        o2 = envs.step(task, a, RNG(42))
        assert np.array_equal(o1, o2)


class TestAckleyRaw:
    def test_zero_at_origin(self):
        assert envs.ackley_raw(np.zeros(3), 10.0, 0.2, 2 * math.pi) == pytest.approx(0.0)

    def test_positive_away_from_origin(self):
        assert envs.ackley_raw(np.array([1.0, 1.0]), 10.0, 0.2, 2 * math.pi) > 0.0

    def test_regression_fixture(self):
        # Independent scalar evaluation:
        # -10 exp(-0.3 * 0.5) - exp(cos(pi/2)) + 10 + e = 3.1112020642...
        val = envs.ackley_raw(np.array([0.5]), 10.0, 0.3, math.pi)
        assert val == pytest.approx(3.1112020642084652, abs=1e-9)

    def test_nonnegative_random_sweep(self):
        rng = RNG(9)
        for _ in range(300):
            d = int(rng.integers(1, 6))
            z = rng.uniform(-2, 2, d)
            b = rng.uniform(0.1, 0.5)
            c = rng.uniform(math.pi, 4 * math.pi)
            assert envs.ackley_raw(z, 10.0, b, c) >= -1e-12


class TestNormalization:
    @pytest.mark.parametrize(
        "dim,b,c,expect",
        [
            (3, 0.3, 2 * math.pi, 5.666920065876976),
            (3, 0.1, math.pi, 3.605256359733385),
            (5, 0.5, 4 * math.pi, 7.434247478164160),
        ],
    )
    def test_direct_substitution(self, dim, b, c, expect):
        assert envs.normalization(dim, b, c) == pytest.approx(expect, abs=1e-12)


class TestLossAndSuccess:
    def test_zero_at_target(self):
        task = Task(envs.BINARY_SEARCH, 2, np.array([0.5, -0.5]), eps=0.1)
        assert envs.loss(task, task.x_star.copy()) == 0.0

    def test_euclidean(self):
        task = Task(envs.BINARY_SEARCH, 2, np.array([1.0, 0.0]), eps=0.1)
        assert envs.loss(task, np.zeros(2)) == pytest.approx(1.0)
        task2 = Task(envs.BINARY_SEARCH, 2, np.array([0.5, -0.5]), eps=0.1)
        assert envs.loss(task2, np.array([0.5, -0.4])) == pytest.approx(0.1)

    def test_success_boundary_inclusive(self):
        task = Task(envs.BINARY_SEARCH, 2, np.array([0.5, -0.5]), eps=0.1)
        assert envs.is_success(task, task.x_star.copy())
        assert envs.is_success(task, np.array([0.5, -0.4]))
        assert not envs.is_success(task, np.array([0.5, -0.3]))

    def test_triangle_inequality(self):
        rng = RNG(11)
        task = envs.sample_task(envs.BINARY_SEARCH, 3, PriorSpec(), 0.2, rng)
        for _ in range(100):
            x = rng.uniform(-1, 1, 3)
            y = rng.uniform(-1, 1, 3)
            d_xy = np.linalg.norm(x - y)
            assert envs.loss(task, x) <= envs.loss(task, y) + d_xy + 1e-12


class TestSerialization:
    def test_round_trip(self):
        for kind in envs.KINDS:
            task = envs.sample_task(kind, 3, PriorSpec(), 0.2, RNG(1))
            back = Task.from_json(task.to_json())
            assert back.kind == task.kind
            assert np.allclose(back.x_star, task.x_star)
            assert back.eps == task.eps
            assert back.ackley_params == task.ackley_params
