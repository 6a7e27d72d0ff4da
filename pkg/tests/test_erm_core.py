# ----------------------------------------------------------------------------------------------------
# 작성목적 : erm_core 단위 테스트 (규칙 공간, 경험적 위험, 선형/비선형 ERM)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | ERM 테스트 작성 | 시스템
# 2026-03-16 | 테스트 추가 | 상자 제약, 과소결정, ridge 대체 사례 추가 | 시스템
# 2026-05-11 | 테스트 추가 | 무작위 파라미터 대비 최소성, 최소점 기울기, 반복 예산 소진 플래그 테스트 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

import unittest

import numpy as np

from src.env_core import Sample, TrainingSequence, generate_training_sequence, make_affine_environment, \
    uniform_noise
from src.erm_core import (affine_space, build_rule_space, empirical_risk, linear_span_space, loss,
                          loss_on_sample, minimize_empirical_risk, objective_j, perceptron_space,
                          polynomial_space, predict, sine_space)
from src.exceptions import DimensionMismatchError, DomainError, EmptySequenceError
from src.schemas import OptimizerConfig, RuleSpaceSpec


def noisy_affine_sequence(n_samples=200, seed=0):
    env = make_affine_environment([2.0], 1.0, [0.0], [1.0], uniform_noise(0.5))
    return generate_training_sequence(env, n_samples, np.random.default_rng(seed))


class TestLossAndRisk(unittest.TestCase):

    def test_squared_loss(self):
        self.assertEqual(loss(3.0, 1.0), 4.0)
        np.testing.assert_array_equal(loss(np.array([1.0, 2.0]), np.array([0.0, 0.0])), [1.0, 4.0])

    def test_loss_on_sample(self):
        rule = affine_space(1).rule([2.0, 1.0])
        self.assertAlmostEqual(loss_on_sample(rule, Sample(np.array([0.5]), 1.0)), 1.0)

    def test_empirical_risk_of_empty_sequence(self):
        seq = TrainingSequence(np.empty((0, 1)), np.empty(0))
        with self.assertRaises(EmptySequenceError):
            empirical_risk(affine_space(1).rule([0.0, 0.0]), seq)

    def test_empirical_risk_dimension_mismatch(self):
        seq = noisy_affine_sequence(10)
        with self.assertRaises(DimensionMismatchError):
            empirical_risk(affine_space(2).rule([0.0, 0.0, 0.0]), seq)

    def test_objective_is_n_times_risk(self):
        space = affine_space(1)
        seq = noisy_affine_sequence(37)
        p = [1.0, 0.5]
        self.assertAlmostEqual(objective_j(space, p, seq), 37 * empirical_risk(space.rule(p), seq), places=10)

    def test_predict(self):
        self.assertAlmostEqual(predict(polynomial_space(2), [1.0, 0.0, 3.0], [2.0]), 13.0)


class TestRuleSpaces(unittest.TestCase):

    def test_linear_span_matches_polynomial(self):
        span = linear_span_space(["1", "v", "v^2"])
        poly = polynomial_space(2)
        points = np.linspace(-1.0, 1.0, 7)[:, None]
        p = np.array([0.3, -1.2, 2.5])
        np.testing.assert_allclose(span.evaluate(p, points), poly.evaluate(p, points), atol=1e-14)

    def test_unknown_basis_rejected(self):
        with self.assertRaises(DomainError):
            linear_span_space(["log(v)"])

    def test_basis_coordinate_out_of_range(self):
        with self.assertRaises(DimensionMismatchError):
            linear_span_space(["v3"], dim=2)

    def test_perceptron_outputs_are_binary(self):
        space = perceptron_space(2)
        values = space.evaluate([1.0, 1.0, 0.5], np.array([[0.0, 0.0], [1.0, 0.0], [0.2, 0.2]]))
        np.testing.assert_array_equal(values, [0.0, 1.0, 0.0])

    def test_box_dimension_checked(self):
        with self.assertRaises(DimensionMismatchError):
            affine_space(1, lower=[0.0], upper=[1.0])

    def test_build_from_spec(self):
        space = build_rule_space(RuleSpaceSpec(kind="polynomial", degree=3))
        self.assertEqual(space.param_dim, 4)
        self.assertTrue(space.linear_in_parameters)


class TestLinearERM(unittest.TestCase):

    def test_noise_free_recovery(self):
        points = np.linspace(0.0, 1.0, 11)[:, None]
        seq = TrainingSequence(points, 2.0 * points[:, 0] + 1.0)
        result = minimize_empirical_risk(affine_space(1), seq)
        np.testing.assert_allclose(result.p_emp, [2.0, 1.0], atol=1e-10)
        self.assertLess(result.empirical_risk_at_min, 1e-20)
        self.assertEqual(result.method, "normal_equations")
        self.assertEqual(result.flags, ())

    def test_matches_closed_form_least_squares(self):
        rng = np.random.default_rng(2026)
        space = affine_space(1)
        for n_samples in rng.integers(10, 1001, size=100):
            seq = noisy_affine_sequence(int(n_samples), seed=int(rng.integers(0, 2 ** 31)))
            design = np.column_stack([seq.instances[:, 0], np.ones(len(seq))])
            expected = np.linalg.lstsq(design, seq.outcomes, rcond=None)[0]
            result = minimize_empirical_risk(space, seq)
            np.testing.assert_allclose(result.p_emp, expected, rtol=0, atol=1e-6)
            expected_risk = float(np.mean((design @ expected - seq.outcomes) ** 2))
            self.assertLessEqual(abs(result.empirical_risk_at_min - expected_risk), 1e-10 * expected_risk)

    def test_minimizer_beats_random_parameters(self):
        space = affine_space(1)
        seq = noisy_affine_sequence(300, seed=4)
        result = minimize_empirical_risk(space, seq)
        rng = np.random.default_rng(5)
        for p in rng.uniform(-10.0, 10.0, size=(100, 2)):
            self.assertLessEqual(result.empirical_risk_at_min, empirical_risk(space.rule(p), seq))

    def test_gradient_vanishes_at_minimizer(self):
        seq = noisy_affine_sequence(250, seed=9)
        for space in (affine_space(1), polynomial_space(3), linear_span_space(["1", "v^2"])):
            result = minimize_empirical_risk(space, seq)
            step = 1e-6
            for i in range(space.param_dim):
                shift = np.zeros(space.param_dim)
                shift[i] = step
                upper = empirical_risk(space.rule(result.p_emp + shift), seq)
                lower = empirical_risk(space.rule(result.p_emp - shift), seq)
                self.assertLess(abs(upper - lower) / (2.0 * step), 1e-8, f"{space.name}[{i}]")

    def test_box_constraint_active(self):
        space = affine_space(1, lower=[-1.0, -1.0], upper=[1.0, 1.0])
        result = minimize_empirical_risk(space, noisy_affine_sequence(100))
        self.assertIn("box_active", result.flags)
        self.assertEqual(result.method, "bounded_lsq")
        self.assertTrue(space.in_box(result.p_emp, tol=1e-9))

    def test_underdetermined(self):
        seq = TrainingSequence(np.array([[0.5]]), np.array([2.0]))
        result = minimize_empirical_risk(affine_space(1), seq)
        self.assertIn("underdetermined", result.flags)
        self.assertAlmostEqual(result.empirical_risk_at_min, 0.0, places=20)

    def test_singular_design_falls_back_to_ridge(self):
        seq = TrainingSequence(np.full((20, 1), 0.5), np.full(20, 2.0))
        result = minimize_empirical_risk(affine_space(1), seq)
        self.assertIn("ridge_fallback", result.flags)
        self.assertLess(result.empirical_risk_at_min, 1e-12)

    def test_empty_sequence_rejected(self):
        with self.assertRaises(EmptySequenceError):
            minimize_empirical_risk(affine_space(1), TrainingSequence(np.empty((0, 1)), np.empty(0)))


class TestNonlinearERM(unittest.TestCase):

    def setUp(self):
        points = np.linspace(0.0, 3.0, 60)[:, None]
        self.seq = TrainingSequence(points, 1.0 * np.sin(2.0 * points[:, 0]))
        self.space = sine_space(lower=[0.5, 0.5], upper=[2.0, 3.0])

    def test_multistart_recovers_sine(self):
        result = minimize_empirical_risk(self.space, self.seq, OptimizerConfig(restarts=8, seed=3))
        self.assertEqual(result.method, "nelder_mead_multistart")
        self.assertLess(result.empirical_risk_at_min, 1e-6)
        np.testing.assert_allclose(result.p_emp, [1.0, 2.0], atol=1e-3)

    def test_fixed_seed_is_deterministic(self):
        config = OptimizerConfig(restarts=6, seed=11, workers=3)
        first = minimize_empirical_risk(self.space, self.seq, config)
        second = minimize_empirical_risk(self.space, self.seq, config)
        np.testing.assert_array_equal(first.p_emp, second.p_emp)
        self.assertEqual(first.candidate_risks, second.candidate_risks)

    def test_small_budget_is_flagged(self):
        seq = noisy_affine_sequence(80, seed=6)
        result = minimize_empirical_risk(self.space, seq, OptimizerConfig(restarts=4, max_iter=5, seed=2))
        self.assertIn("budget_exhausted", result.flags)
        self.assertFalse(result.converged)
        self.assertEqual(len(result.candidate_risks), 4)
        for candidate in result.candidate_risks:
            self.assertLessEqual(result.empirical_risk_at_min, candidate * (1.0 + 1e-12))

    def test_reported_risk_recomputed_at_minimizer(self):
        result = minimize_empirical_risk(self.space, self.seq, OptimizerConfig(restarts=4, seed=1))
        self.assertEqual(result.empirical_risk_at_min, empirical_risk(result.rule, self.seq))


if __name__ == "__main__":
    unittest.main()
