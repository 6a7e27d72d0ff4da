# ----------------------------------------------------------------------------------------------------
# 작성목적 : mc_harness 단위 테스트 (WPI 정답값, h₀ 오라클, 커버리지 실험, 수렴/격차 연구)
# 작성일 : 2026-03-02

# 변경사항 내역 (날짜 | 변경목적 | 변경내용 | 작성자 순으로 기입)
# 2026-03-02 | 최초 구현 | 커버리지 하네스 테스트 작성 | 시스템
# 2026-05-11 | 테스트 추가 | 해석적 τ 와 격자 τ 비교, 점별 수렴 단조성 테스트 추가 | 시스템
# ----------------------------------------------------------------------------------------------------

import os
import glob
import math
import tempfile
import unittest

import numpy as np
import pandas as pd

from src.env_core import gaussian_noise, loss_moment, make_affine_environment
from src.erm_core import perceptron_space
from src.exceptions import ConfigError, DomainError, OracleUnavailableError
from src.mc_harness import (affine_benchmark, compute_wpi1, compute_wpi2, load_experiment_config, optimal_rule,
                            prepare_experiment, replay_replication, run_coverage_experiment,
                            run_erm_gap_study, run_pointwise_convergence, run_risk_identity_check,
                            run_uniform_deviation_study, write_coverage_outputs)
from src.schemas import ExperimentConfig

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


def small_config(**overrides):
    config = {
        "name": "affine_small",
        "environment": {
            "kind": "affine",
            "response": {"slope": [2.0], "intercept": 1.0},
            "noise": {"kind": "uniform_symmetric", "half_width": 0.5},
            "support": {"low": [0.0], "high": [1.0]},
        },
        "rule_space": {"kind": "affine", "lower": [-5.0, -5.0], "upper": [5.0, 5.0]},
        "n_samples": 200,
        "replications": 12,
        "eta": 0.1,
        "models": ["UM1"],
        "master_seed": 7,
    }
    config.update(overrides)
    return ExperimentConfig(**config)


class TestWeakPriorInformation(unittest.TestCase):

    def test_benchmark_m_from_vertices(self):
        env, space = affine_benchmark()
        wpi = compute_wpi1(env, space)
        # (|−5 − 5 − 3| + 0.5)² = 13.5²
        self.assertAlmostEqual(wpi.m, 182.25, places=10)
        self.assertEqual(wpi.provenance, "analytic_vertices")

    def test_unbounded_noise_has_no_m(self):
        env = make_affine_environment([2.0], 1.0, [0.0], [1.0], gaussian_noise(0.3))
        _, space = affine_benchmark()
        with self.assertRaises(DomainError):
            compute_wpi1(env, space)

    def test_tau_at_least_one(self):
        env, space = affine_benchmark()
        wpi = compute_wpi2(env, space, s=4.0)
        self.assertGreaterEqual(wpi.tau, 1.0)
        self.assertEqual(wpi.provenance, "analytic_moments")

    def test_analytic_tau_dominates_grid(self):
        env, space = affine_benchmark()
        analytic = compute_wpi2(env, space, s=4.0)
        grid = compute_wpi2(env, space, s=4.0, per_dim=9, method="grid", margin=1.0)
        self.assertEqual(grid.provenance, "quadrature_grid")
        self.assertGreaterEqual(analytic.tau, grid.tau - 1e-9)
        self.assertLess(analytic.tau, 2.0 * grid.tau)

    def test_analytic_tau_bounds_sampled_rules(self):
        env, space = affine_benchmark()
        tau = compute_wpi2(env, space, s=4.0).tau
        rng = np.random.default_rng(8)
        params = np.vstack([rng.uniform(-5.0, 5.0, (40, 2)), [[2.0, 1.0], [2.0 + 1e-3, 1.0 - 1e-3]]])
        for p in params:
            rule = space.rule(p)
            ratio = loss_moment(env, rule, 4.0).value ** 0.25 / loss_moment(env, rule, 1.0).value
            self.assertLessEqual(ratio, tau * (1.0 + 1e-9))

    def test_zero_noise_tau_near_response(self):
        # 잡음이 없으면 비율은 방향에만 의존: sup = max_c (E(c+u)⁸)^{1/4} / E(c+u)² ≈ 2.0985
        env, space = affine_benchmark(noise_half_width=0.0)
        wpi = compute_wpi2(env, space, s=4.0)
        self.assertAlmostEqual(wpi.tau, 2.0985, delta=1e-3)
        rule = space.rule([2.0 + 1e-6, 1.0 - 0.39e-6 - 0.5e-6])
        ratio = loss_moment(env, rule, 4.0).value ** 0.25 / loss_moment(env, rule, 1.0).value
        self.assertLessEqual(ratio, wpi.tau * (1.0 + 1e-9))

    def test_gaussian_tau(self):
        env = make_affine_environment([2.0], 1.0, [0.0], [1.0], gaussian_noise(0.3))
        _, space = affine_benchmark()
        wpi = compute_wpi2(env, space, s=4.0)
        self.assertEqual(wpi.provenance, "analytic_moments")
        # 잡음만 있을 때 (E ε⁸)^{1/4} / E ε² = 105^{1/4}
        self.assertGreaterEqual(wpi.tau, 105.0 ** 0.25 - 1e-12)


class TestOracle(unittest.TestCase):

    def test_benchmark_oracle_is_response(self):
        env, space = affine_benchmark()
        oracle = optimal_rule(env, space)
        np.testing.assert_allclose(oracle.rule.params, [2.0, 1.0], atol=1e-8)
        self.assertAlmostEqual(oracle.risk, 0.25 / 3.0, places=10)
        self.assertEqual(oracle.method, "weighted_lstsq_quadrature")

    def test_oracle_unavailable_for_unboxed_nonlinear_space(self):
        env = make_affine_environment([1.0, 1.0], 0.0, [0.0, 0.0], [1.0, 1.0], gaussian_noise(0.1))
        with self.assertRaises(OracleUnavailableError):
            optimal_rule(env, perceptron_space(2))


class TestCoverageExperiment(unittest.TestCase):

    def test_um1_holds_on_benchmark(self):
        result = run_coverage_experiment(small_config(), workers=2)
        summary = result.summaries["UM1"]
        self.assertEqual(summary.replications, 12)
        self.assertEqual(summary.non_vacuous, 12)
        self.assertEqual(summary.coverage, 1.0)
        self.assertTrue(summary.meets_target)
        self.assertGreater(summary.median_slack, 0.0)
        self.assertEqual([record.index for record in result.records], list(range(12)))

    def test_um2_vacuous_at_small_n(self):
        config = small_config(models=["UM2"], wpi={"source": "declared", "s": 4.0, "tau": 10.0})
        summary = run_coverage_experiment(config, workers=1).summaries["UM2"]
        self.assertEqual(summary.non_vacuous, 0)
        self.assertIsNone(summary.coverage)
        self.assertIsNone(summary.meets_target)

    def test_records_independent_of_workers(self):
        first = run_coverage_experiment(small_config(replications=6), workers=1)
        second = run_coverage_experiment(small_config(replications=6), workers=3)
        for a, b in zip(first.records, second.records):
            self.assertEqual(a.seed, b.seed)
            self.assertEqual(a.r_emp, b.r_emp)
            self.assertEqual(a.d_squared, b.d_squared)

    def test_replay_matches_record(self):
        config = small_config(replications=6)
        result = run_coverage_experiment(config, workers=2)
        replayed = replay_replication(config, 4)
        self.assertEqual(replayed.seed, result.records[4].seed)
        self.assertEqual(replayed.p_emp, result.records[4].p_emp)
        with self.assertRaises(DomainError):
            replay_replication(config, 6)

    def test_declared_wpi_requires_values(self):
        with self.assertRaises(ConfigError):
            prepare_experiment(small_config(wpi={"source": "declared"}))

    def test_outputs_written(self):
        result = run_coverage_experiment(small_config(replications=4), workers=1)
        with tempfile.TemporaryDirectory() as directory:
            paths = write_coverage_outputs(result, directory)
            self.assertTrue(os.path.exists(paths["json"]))
            frame = pd.read_csv(paths["csv"])
            self.assertEqual(len(frame), 4)
            self.assertIn("phi_UM1", frame.columns)
            self.assertIn("held_UM1", frame.columns)


class TestExperimentConfigs(unittest.TestCase):

    def test_shipped_configs_load(self):
        paths = sorted(glob.glob(os.path.join(CONFIG_DIR, "experiments", "*.yaml")))
        self.assertGreaterEqual(len(paths), 4)
        for path in paths:
            config = load_experiment_config(path)
            self.assertGreaterEqual(config.n_samples, 1)

    def test_unknown_key_rejected(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "bad.yaml")
            with open(path, "w", encoding="utf-8") as f:
                f.write("name: bad\nn_samples: 10\neta: 0.1\nrule_space: {kind: affine}\n"
                        "environment: {kind: affine}\nreplicas: 3\n")
            with self.assertRaises(ConfigError):
                load_experiment_config(path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_experiment_config(os.path.join(CONFIG_DIR, "experiments", "missing.yaml"))


class TestStudies(unittest.TestCase):

    def setUp(self):
        self.env, self.space = affine_benchmark()

    def test_risk_identity(self):
        rules = [self.space.rule(p) for p in ([0.0, 0.0], [2.0, 1.0], [-3.0, 4.5], [5.0, -5.0])]
        check = run_risk_identity_check(self.env, rules)
        self.assertLess(check.max_residual, 1e-10)
        self.assertAlmostEqual(check.noise_term, 0.25 / 3.0, places=12)

    def test_pointwise_convergence_is_monotone(self):
        n_grid = [100, 1000, 10000, 100000]
        table = run_pointwise_convergence(self.env, self.space.rule([0.0, 0.0]), n_grid, 50, seed=3)
        medians = table.set_index("n")["median"]
        for smaller, larger in zip(n_grid, n_grid[1:]):
            self.assertLess(medians[larger], medians[smaller])
        self.assertEqual(table["reps"].tolist(), [50] * 4)

    def test_erm_gap_is_non_negative(self):
        table = run_erm_gap_study(self.env, self.space, [50, 400], 5, seed=1)
        self.assertTrue((table["q25"] >= -1e-10).all())
        self.assertEqual(table["oracle_method"].iloc[0], "weighted_lstsq_quadrature")

    def test_uniform_deviation_within_bound(self):
        table = run_uniform_deviation_study(self.env, self.space, 200, 4, seed=2, eta=0.1, n_rules=16)
        self.assertEqual(len(table), 4)
        self.assertTrue(table["within_bound"].all())
        self.assertFalse(math.isinf(table["bound_c"].iloc[0]))


if __name__ == "__main__":
    unittest.main()
