# ----------------------------------------------------------------------------------------------------
# 작성목적 : env_core 단위 테스트 (적분 규칙, 잡음 모델, 학습 시퀀스 생성, D / R 계산)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 환경/적분 테스트 작성 | 시스템
# 2026-05-11 | 테스트 추가 | sample_instance 재현성/대수의 법칙, 조건부 잡음 평균, 상수 차이 거리, 위험 항등식 잔차 테스트 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

import os
import math
import unittest

import numpy as np

from src.env_core import (PointMass, SyntheticEnvironment, ResponseFunction, TrainingSequence, UniformBox,
                          build_environment, check_density_normalization, composite_gauss_legendre,
                          distance_to_response, draw_outcome, expected_risk, gaussian_noise,
                          generate_training_sequence, load_environment, loss_moment, make_affine_environment,
                          no_noise, noise_term, rademacher_noise, sample_instance, uniform_noise)
from src.exceptions import DimensionMismatchError, DomainError
from src.schemas import EnvironmentSpec, IntegratorConfig

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def benchmark_environment(noise=None, outcome_range=None):
    return make_affine_environment([2.0], 1.0, [0.0], [1.0], noise or uniform_noise(0.5),
                                   outcome_range=outcome_range)


class TestQuadrature(unittest.TestCase):

    def test_weights_sum_to_interval_length(self):
        nodes, weights = composite_gauss_legendre(-1.0, 3.0, 100, 16)
        self.assertAlmostEqual(weights.sum(), 4.0, places=12)
        self.assertTrue(np.all((nodes > -1.0) & (nodes < 3.0)))

    def test_polynomial_integrated_exactly(self):
        nodes, weights = composite_gauss_legendre(0.0, 1.0, 64, 16)
        self.assertAlmostEqual(float(weights @ nodes ** 5), 1.0 / 6.0, places=13)

    def test_density_normalization(self):
        env = benchmark_environment()
        self.assertAlmostEqual(check_density_normalization(env), 1.0, places=12)


class TestNoiseModels(unittest.TestCase):

    def test_uniform_moments(self):
        noise = uniform_noise(0.5)
        self.assertAlmostEqual(noise.variance, 0.25 / 3.0)
        self.assertEqual(noise.sup_bound, 0.5)
        self.assertAlmostEqual(noise.abs_moment(4), 0.5 ** 4 / 5.0)
        nodes, weights = noise.quadrature(32)
        self.assertAlmostEqual(float(weights @ nodes ** 2), 0.25 / 3.0, places=14)

    def test_gaussian_quadrature_variance(self):
        noise = gaussian_noise(0.3)
        nodes, weights = noise.quadrature(32)
        self.assertAlmostEqual(float(weights.sum()), 1.0, places=12)
        self.assertAlmostEqual(float(weights @ nodes ** 2), 0.09, places=12)
        self.assertTrue(math.isinf(noise.sup_bound))
        self.assertAlmostEqual(noise.abs_moment(2), 0.09, places=12)

    def test_rademacher_is_zero_mean(self):
        noise = rademacher_noise(0.2)
        draws = noise.sample(np.random.default_rng(0), 1000)
        self.assertEqual(set(np.round(np.abs(draws), 12)), {0.2})
        self.assertAlmostEqual(noise.variance, 0.04)
        self.assertAlmostEqual(noise.abs_moment(3), 0.008)

    def test_invalid_noise_rejected(self):
        with self.assertRaises(DomainError):
            uniform_noise(0.0)
        with self.assertRaises(DomainError):
            rademacher_noise(-1.0)


class TestInstanceAndOutcome(unittest.TestCase):

    def test_point_mass_always_returns_v0(self):
        env = SyntheticEnvironment(name="point", kind="affine", instance_dim=1,
                                   instance_sampler=PointMass([0.25]),
                                   response=ResponseFunction(lambda points: 2.0 * points[:, 0] + 1.0),
                                   noise=no_noise())
        rng = np.random.default_rng(3)
        for _ in range(5):
            np.testing.assert_array_equal(sample_instance(env, rng), [0.25])

    def test_fixed_seed_reproduces_instances(self):
        env = benchmark_environment()
        first_rng, second_rng = np.random.default_rng(21), np.random.default_rng(21)
        first = [sample_instance(env, first_rng) for _ in range(2)]
        second = [sample_instance(env, second_rng) for _ in range(2)]
        np.testing.assert_array_equal(first, second)
        self.assertTrue(all(0.0 <= v[0] <= 1.0 for v in first))

    def test_instance_mean_converges(self):
        env = benchmark_environment()
        rng = np.random.default_rng(5)
        draws = np.array([sample_instance(env, rng)[0] for _ in range(100000)])
        self.assertLess(abs(draws.mean() - 0.5), 0.01)

    def test_conditional_noise_mean_within_band(self):
        k = 100000
        for noise in (gaussian_noise(1.0), uniform_noise(0.5), rademacher_noise(0.2)):
            env = make_affine_environment([0.0], 0.0, [0.0], [1.0], noise)
            rng = np.random.default_rng(17)
            outcomes = np.array([draw_outcome(env, [0.4], rng) for _ in range(k)])
            band = 3.0 * math.sqrt(noise.variance) / math.sqrt(k)
            self.assertLess(abs(outcomes.mean()), band, noise.kind)

    def test_gaussian_outcome_mean(self):
        env = make_affine_environment([0.0], 0.0, [0.0], [1.0], gaussian_noise(1.0))
        rng = np.random.default_rng(2)
        outcomes = np.array([draw_outcome(env, [0.7], rng) for _ in range(100000)])
        self.assertLess(abs(outcomes.mean()), 0.02)


class TestTrainingSequence(unittest.TestCase):

    def test_zero_length_sequence(self):
        seq = generate_training_sequence(benchmark_environment(), 0, np.random.default_rng(1))
        self.assertEqual(len(seq), 0)
        self.assertEqual(seq.instance_dim, 1)

    def test_negative_length_rejected(self):
        with self.assertRaises(DomainError):
            generate_training_sequence(benchmark_environment(), -1, np.random.default_rng(1))

    def test_same_seed_is_bitwise_identical(self):
        env = benchmark_environment()
        first = generate_training_sequence(env, 50, np.random.default_rng(123))
        second = generate_training_sequence(env, 50, np.random.default_rng(123))
        np.testing.assert_array_equal(first.instances, second.instances)
        np.testing.assert_array_equal(first.outcomes, second.outcomes)

    def test_instances_drawn_before_noise(self):
        env = benchmark_environment()
        seq = generate_training_sequence(env, 20, np.random.default_rng(7))
        rng = np.random.default_rng(7)
        instances = rng.uniform([0.0], [1.0], size=(20, 1))
        noise = rng.uniform(-0.5, 0.5, 20)
        np.testing.assert_array_equal(seq.instances, instances)
        np.testing.assert_allclose(seq.outcomes, 2.0 * instances[:, 0] + 1.0 + noise, rtol=0, atol=1e-14)

    def test_sequence_is_read_only(self):
        seq = generate_training_sequence(benchmark_environment(), 5, np.random.default_rng(0))
        with self.assertRaises(ValueError):
            seq.outcomes[0] = 0.0

    def test_samples_round_trip(self):
        seq = generate_training_sequence(benchmark_environment(), 4, np.random.default_rng(0))
        rebuilt = TrainingSequence.from_samples(seq.samples, 1)
        np.testing.assert_array_equal(rebuilt.outcomes, seq.outcomes)
        self.assertEqual(list(seq.to_frame().columns), ["v0", "w"])

    def test_outcome_range_violation(self):
        env = benchmark_environment(outcome_range=(0.0, 1.5))
        with self.assertRaises(DomainError):
            generate_training_sequence(env, 200, np.random.default_rng(0))

    def test_draw_outcome_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            draw_outcome(benchmark_environment(), [0.1, 0.2], np.random.default_rng(0))

    def test_draw_outcome_without_noise(self):
        env = benchmark_environment(noise=no_noise())
        self.assertAlmostEqual(draw_outcome(env, [0.25], np.random.default_rng(0)), 1.5)


class TestDistanceAndRisk(unittest.TestCase):

    def setUp(self):
        self.env = benchmark_environment()

    def test_distance_zero_for_response(self):
        result = distance_to_response(self.env, lambda points: 2.0 * points[:, 0] + 1.0)
        self.assertAlmostEqual(result.value, 0.0, places=12)
        self.assertEqual(result.method, "gauss_legendre")

    def test_distance_for_zero_rule(self):
        # ∫₀¹ (2v + 1)² dv = 13/3
        result = distance_to_response(self.env, lambda points: np.zeros(points.shape[0]))
        self.assertAlmostEqual(result.squared, 13.0 / 3.0, places=12)
        self.assertAlmostEqual(result.value, math.sqrt(13.0 / 3.0), places=12)
        self.assertLess(result.error_estimate, 1e-10)

    def test_constant_offset_distance(self):
        result = distance_to_response(self.env, lambda points: 2.0 * points[:, 0] + 1.0 + 0.3)
        self.assertAlmostEqual(result.value, 0.3, places=12)

    def test_zero_rule_against_identity_response(self):
        env = make_affine_environment([1.0], 0.0, [0.0], [1.0], uniform_noise(1.0))
        zero = lambda points: np.zeros(points.shape[0])
        self.assertAlmostEqual(distance_to_response(env, zero).value, math.sqrt(1.0 / 3.0), places=12)
        self.assertAlmostEqual(expected_risk(env, zero).value, 2.0 / 3.0, places=12)

    def test_risk_identity_residual_shrinks_with_resolution(self):
        # 2차원 몬테카를로: 표본 16배 → 잔차 평균 약 1/4
        env = make_affine_environment([1.0, -1.0], 0.5, [0.0, 0.0], [1.0, 1.0], uniform_noise(0.5))
        rule = lambda points: np.sin(3.0 * points[:, 0]) + points[:, 1] ** 2

        def mean_residual(samples):
            residuals = []
            for seed in range(20):
                config = IntegratorConfig(mc_samples=samples, mc_seed=seed)
                joint = config.model_copy(update={"risk_method": "joint"})
                residuals.append(abs(expected_risk(env, rule, joint).value - noise_term(env)
                                     - distance_to_response(env, rule, config).squared))
            return float(np.mean(residuals))

        self.assertLess(mean_residual(32000), mean_residual(2000))

    def test_one_dimensional_identity_holds_at_any_node_count(self):
        rule = lambda points: np.sin(3.0 * points[:, 0])
        for n_nodes in (64, 128, 256):
            config = IntegratorConfig(n_nodes=n_nodes)
            joint = config.model_copy(update={"risk_method": "joint"})
            residual = abs(expected_risk(self.env, rule, joint).value - noise_term(self.env)
                           - distance_to_response(self.env, rule, config).squared)
            self.assertLess(residual, 1e-12)

    def test_risk_identity_matches_joint_integral(self):
        rule = lambda points: 0.5 * points[:, 0] - 1.0
        identity = expected_risk(self.env, rule).value
        joint = expected_risk(self.env, rule, IntegratorConfig(risk_method="joint")).value
        self.assertAlmostEqual(identity, joint, places=10)
        self.assertAlmostEqual(identity - noise_term(self.env),
                               distance_to_response(self.env, rule).squared, places=12)

    def test_distance_never_exceeds_risk(self):
        rng = np.random.default_rng(11)
        for slope, intercept in rng.uniform(-5.0, 5.0, size=(10, 2)):
            rule = lambda points, a=slope, b=intercept: a * points[:, 0] + b
            self.assertLessEqual(distance_to_response(self.env, rule).squared, expected_risk(self.env, rule).value)

    def test_risk_of_response_is_noise_variance(self):
        risk = expected_risk(self.env, lambda points: 2.0 * points[:, 0] + 1.0)
        self.assertAlmostEqual(risk.value, 0.25 / 3.0, places=12)

    def test_fourth_moment_of_response(self):
        # E[ε⁴] = a⁴/5
        moment = loss_moment(self.env, lambda points: 2.0 * points[:, 0] + 1.0, 2.0)
        self.assertAlmostEqual(moment.value, 0.5 ** 4 / 5.0, places=12)

    def test_point_mass_distance(self):
        env = SyntheticEnvironment(name="point", kind="affine", instance_dim=1,
                                   instance_sampler=PointMass([0.5]),
                                   response=ResponseFunction(lambda points: 2.0 * points[:, 0] + 1.0),
                                   noise=no_noise())
        result = distance_to_response(env, lambda points: np.full(points.shape[0], 1.0))
        self.assertAlmostEqual(result.value, 1.0)
        self.assertEqual(result.method, "point_mass")

    def test_multidimensional_uses_monte_carlo(self):
        env = make_affine_environment([1.0, -1.0], 0.0, [0.0, 0.0], [1.0, 1.0], no_noise())
        result = distance_to_response(env, lambda points: points[:, 0] - points[:, 1] + 0.1)
        self.assertEqual(result.method, "monte_carlo")
        self.assertAlmostEqual(result.value, 0.1, places=10)


class TestEnvironmentDescriptors(unittest.TestCase):

    def test_build_affine_from_spec(self):
        spec = EnvironmentSpec(kind="affine", instance_dim=1, response={"slope": 2.0, "intercept": 1.0},
                               noise={"kind": "uniform_symmetric", "half_width": 0.5})
        env = build_environment(spec)
        self.assertEqual(env.kind, "affine")
        self.assertAlmostEqual(float(env.response(np.array([[0.5]]))[0]), 2.0)

    def test_unknown_key_rejected(self):
        with self.assertRaises(ValueError):
            EnvironmentSpec(kind="affine", unknown=1)

    def test_load_shipped_environments(self):
        env, spec = load_environment(os.path.join(CONFIG_DIR, "environments", "polynomial_gaussian.yaml"))
        self.assertEqual(spec.kind, "polynomial")
        self.assertAlmostEqual(float(env.response(np.array([[2.0]]))[0]), 0.5 - 2.0 + 2.0)

        sludge, _ = load_environment(os.path.join(CONFIG_DIR, "environments", "activated_sludge.yaml"))
        self.assertEqual(sludge.instance_dim, 2)
        self.assertEqual(sludge.operating_mode, "aerobic")
        seq = generate_training_sequence(sludge, 10, np.random.default_rng(0))
        self.assertEqual(seq.instances.shape, (10, 2))

    def test_uniform_box_requires_ordered_bounds(self):
        with self.assertRaises(DomainError):
            UniformBox([1.0], [0.0])


if __name__ == "__main__":
    unittest.main()
