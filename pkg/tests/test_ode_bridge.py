# ----------------------------------------------------------------------------------------------------
# 작성목적 : ode_bridge 단위 테스트 (오일러 단계, 시계열 변환, 식별, 시뮬레이션, 파일 입출력)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 오일러/변환 테스트 작성 | 시스템
# 2026-04-11 | 테스트 추가 | 시계열 파일 형식 오류 위치 보고 테스트 추가 | 시스템
# 2026-05-11 | 테스트 추가 | 오일러 1차 수렴, 래핑 공간의 J = N·R_emp, 활성슬러지 환경 테스트 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

import os
import tempfile
import unittest

import numpy as np

from src.erm_core import empirical_risk, objective_j
from src.env_core import generate_training_sequence, no_noise
from src.exceptions import (DimensionMismatchError, DivergenceError, DomainError, MalformedSeriesError,
                            NonUniformSpacingError, SeriesTooShortError)
from src.ode_bridge import (AutonomousODEModel, TimeSeries, biomass_dynamics, build_instance_vector,
                            euler_step, identify, load_time_series, make_activated_sludge_environment,
                            make_model, save_time_series, series_to_training_sequence, simulate,
                            wrap_as_rule_space)
from src.schemas import OptimizerConfig


class TestEulerStep(unittest.TestCase):

    def setUp(self):
        self.model = make_model("linear_decay", 0.1)

    def test_single_step(self):
        self.assertAlmostEqual(euler_step(self.model, [2.0], [0.5]), 1.9)

    def test_zero_step_returns_target(self):
        self.assertEqual(euler_step(self.model, [2.0], [0.5], dt=0.0), 2.0)

    def test_negative_step_rejected(self):
        with self.assertRaises(DomainError):
            euler_step(self.model, [2.0], [0.5], dt=-0.1)

    def test_model_requires_positive_dt(self):
        with self.assertRaises(DomainError):
            make_model("linear_decay", 0.0)

    def test_parameter_dimension_checked(self):
        with self.assertRaises(DimensionMismatchError):
            euler_step(make_model("monod"), [5.0, 1.0], [0.5])

    def test_monod_step(self):
        model = make_model("monod", 0.1)
        # 10 + 0.1 · (-0.5 · 10 / 12 · 2)
        self.assertAlmostEqual(euler_step(model, [10.0, 2.0], [0.5, 2.0]), 10.0 - 0.1 * 0.5 * 10.0 / 12.0 * 2.0)


class TestSeriesConversion(unittest.TestCase):

    def setUp(self):
        self.series = TimeSeries([0.0, 0.1, 0.2], [[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]], ("S", "X"))

    def test_instance_vector_puts_target_first(self):
        np.testing.assert_array_equal(build_instance_vector(self.series, 1, 1), [10.0, 1.0])
        np.testing.assert_array_equal(build_instance_vector(self.series, 2, 0), [2.0, 20.0])

    def test_instance_index_range(self):
        with self.assertRaises(DomainError):
            build_instance_vector(self.series, 0, 0)
        with self.assertRaises(DomainError):
            build_instance_vector(self.series, 3, 0)

    def test_training_sequence_shapes(self):
        seq = series_to_training_sequence(self.series, 0)
        self.assertEqual(len(seq), 2)
        self.assertEqual(seq.provenance, "time_series")
        np.testing.assert_array_equal(seq.outcomes, [2.0, 3.0])

    def test_two_points_give_one_sample(self):
        seq = series_to_training_sequence(TimeSeries([0.0, 1.0], [[1.0], [0.5]]), 0)
        self.assertEqual(len(seq), 1)

    def test_short_series_rejected(self):
        with self.assertRaises(SeriesTooShortError) as context:
            series_to_training_sequence(TimeSeries([0.0], [[1.0]]), 0)
        self.assertIn("series too short", str(context.exception))

    def test_non_uniform_spacing_rejected(self):
        with self.assertRaises(NonUniformSpacingError):
            TimeSeries([0.0, 0.1, 0.3], [[1.0], [0.9], [0.8]])


class TestSimulateAndIdentify(unittest.TestCase):

    def test_linear_decay_closed_form(self):
        model = make_model("linear_decay", 0.1)
        series = simulate(model, [0.7], [1.0], 20)
        expected = (1.0 - 0.07) ** np.arange(21)
        np.testing.assert_allclose(series.states[:, 0], expected, rtol=1e-12)
        np.testing.assert_allclose(series.times, 0.1 * np.arange(21))

    def test_divergence_reports_step(self):
        model = make_model("linear_decay", 0.1)
        with self.assertRaises(DivergenceError) as context:
            simulate(model, [-1e300], [1e10], 5)
        self.assertEqual(context.exception.step, 1)
        self.assertIn("at step 1", str(context.exception))

    def test_linear_round_trip_is_exact(self):
        model = make_model("linear_decay", 0.1)
        result = identify(model, simulate(model, [0.7], [1.0], 30))
        self.assertAlmostEqual(result.p_emp[0], 0.7, places=10)
        self.assertLess(result.empirical_risk_at_min, 1e-25)

    def test_fine_step_decay_round_trip(self):
        model = make_model("linear_decay", 0.01)
        result = identify(model, simulate(model, [2.0], [1.0], 500))
        self.assertAlmostEqual(result.p_emp[0], 2.0, delta=1e-6)
        self.assertLessEqual(result.empirical_risk_at_min, 1e-12)
        self.assertEqual(result.n_samples, 500)

    def test_monod_round_trip(self):
        model = make_model("monod", 0.1)
        truth = np.array([0.5, 2.0])
        series = simulate(model, truth, [4.0, 2.0], 60, biomass_dynamics(model, truth))
        result = identify(model, series, OptimizerConfig(seed=7, restarts=16),
                          lower=[0.01, 0.01], upper=[5.0, 20.0])
        np.testing.assert_allclose(result.p_emp, truth, rtol=1e-3)

    def test_biomass_follows_yield(self):
        model = make_model("linear_substrate", 0.1)
        series = simulate(model, [0.1], [5.0, 1.0], 1, biomass_dynamics(model, [0.1], 0.6, 0.05))
        # X₁ = X₀ + Δt (Y p S X - k_d X)
        self.assertAlmostEqual(series.states[1, 1], 1.0 + 0.1 * (0.6 * 0.1 * 5.0 - 0.05))

    def test_biomass_needs_two_states(self):
        with self.assertRaises(DomainError):
            biomass_dynamics(make_model("linear_decay"), [0.1])

    def test_identify_checks_spacing_against_model(self):
        series = simulate(make_model("linear_decay", 0.1), [0.7], [1.0], 10)
        with self.assertRaises(NonUniformSpacingError):
            identify(make_model("linear_decay", 0.2), series)

    def test_identify_checks_state_dimension(self):
        series = simulate(make_model("linear_decay", 0.1), [0.7], [1.0], 10)
        with self.assertRaises(DimensionMismatchError):
            identify(make_model("monod", 0.1), series)

    def test_wrapped_design_matches_evaluator(self):
        model = make_model("linear_substrate", 0.1)
        space = wrap_as_rule_space(model)
        points = np.array([[5.0, 1.0], [2.0, 3.0]])
        offset, phi = space.design(points)
        np.testing.assert_allclose(offset + phi @ [0.2], space.evaluate([0.2], points))

    def test_euler_error_is_first_order(self):
        # dx/dt = -2x, x(0) = 1, T = 1: 오차는 Δt에 비례
        errors = []
        for dt in (0.1, 0.05, 0.025):
            series = simulate(make_model("linear_decay", dt), [2.0], [1.0], int(round(1.0 / dt)))
            errors.append(abs(series.states[-1, 0] - np.exp(-2.0)))
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreater(coarse / fine, 1.8)
            self.assertLess(coarse / fine, 2.2)

    def test_wrapped_objective_is_n_times_risk(self):
        model = make_model("linear_substrate", 0.1)
        series = simulate(model, [0.2], [5.0, 1.0], 30, biomass_dynamics(model, [0.2]))
        seq = series_to_training_sequence(series, model.target_index)
        space = wrap_as_rule_space(model)
        for p in ([0.0], [0.15], [0.35]):
            self.assertAlmostEqual(objective_j(space, p, seq), len(seq) * empirical_risk(space.rule(p), seq),
                                   places=10)
        self.assertAlmostEqual(objective_j(space, [0.2], seq), 0.0, places=20)

    def test_sludge_environment_is_one_step_euler_over_box(self):
        env = make_activated_sludge_environment(mu_max=0.5, half_saturation=2.0, dt=0.1, noise=no_noise())
        seq = generate_training_sequence(env, 2000, np.random.default_rng(8))
        substrate, biomass = seq.instances[:, 0], seq.instances[:, 1]
        self.assertTrue(np.all((substrate >= 1.0) & (substrate <= 10.0)))
        self.assertTrue(np.all((biomass >= 1.0) & (biomass <= 3.0)))
        # 궤적이 아니므로 연속 인스턴스 사이에 상관이 없음
        self.assertLess(abs(np.corrcoef(substrate[:-1], substrate[1:])[0, 1]), 0.1)
        expected = substrate - 0.1 * 0.5 * substrate / (2.0 + substrate) * biomass
        np.testing.assert_allclose(seq.outcomes, expected, rtol=0, atol=1e-12)

    def test_custom_model_validation(self):
        with self.assertRaises(DomainError):
            AutonomousODEModel(name="bad", state_dim=1, target_index=1, rhs=lambda x, p: x[:, 0],
                               param_dim=1, dt=0.1)


class TestSeriesFiles(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.directory.cleanup()

    def _write(self, name, text):
        path = os.path.join(self.directory.name, name)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        return path

    def test_save_and_load_preserves_values(self):
        series = simulate(make_model("monod", 0.1), [0.5, 2.0], [10.0, 1.5], 5)
        path = save_time_series(series, os.path.join(self.directory.name, "monod.csv"))
        loaded = load_time_series(path)
        np.testing.assert_array_equal(loaded.states, series.states)
        self.assertEqual(loaded.state_names, ("S", "X"))

    def test_tab_separated(self):
        loaded = load_time_series(self._write("series.tsv", "time\tx\n0\t1.0\n0.5\t0.8\n"))
        self.assertEqual(len(loaded), 2)
        self.assertAlmostEqual(loaded.dt, 0.5)

    def test_bad_value_reports_line_and_column(self):
        path = self._write("bad.csv", "time,x\n0,1.0\n0.1,0.9\n0.2,abc\n")
        with self.assertRaises(MalformedSeriesError) as context:
            load_time_series(path)
        self.assertEqual(context.exception.line, 4)
        self.assertEqual(context.exception.column, "x")

    def test_first_column_must_be_time(self):
        with self.assertRaises(MalformedSeriesError) as context:
            load_time_series(self._write("bad.csv", "t,x\n0,1\n1,2\n"))
        self.assertEqual(context.exception.line, 1)

    def test_missing_file(self):
        with self.assertRaises(DomainError):
            load_time_series(os.path.join(self.directory.name, "missing.csv"))


if __name__ == "__main__":
    unittest.main()
