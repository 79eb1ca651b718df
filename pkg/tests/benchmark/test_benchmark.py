import random
import unittest

from src.benchmark.control_benchmark import run_control_benchmark, sample_targets
from src.benchmark.metrics import BenchmarkConfig, summarize_records, summary_table
from src.benchmark.state_benchmark import run_state_benchmark
from src.simulation.scenario import default_scenario
from src.utils.exceptions import ConfigError


def make_records(method, translations, failures=0):
    rows = []
    for i, t in enumerate(translations):
        rows.append({"trial": i, "method": method, "ok": True, "flagged": i == 0, "translation": t,
                     "rotation": t * 10.0, "joint_l2": t, "joint_err_0": t, "joint_err_1": -t})
    for k in range(failures):
        rows.append({"trial": len(translations) + k, "method": method, "ok": False, "flagged": False,
                     "translation": None, "rotation": None, "joint_l2": None, "joint_err_0": None,
                     "joint_err_1": None})
    return rows


class TestMetrics(unittest.TestCase):
    """汇总指标"""

    def test_summary_values(self):
        records = make_records("a", [0.001 * k for k in range(1, 11)], failures=2)
        summary = summarize_records(records, seed=0, trials=12)
        m = summary.methods["a"]
        self.assertEqual(m.trials, 12)
        self.assertEqual(m.failures, 2)
        self.assertEqual(m.flagged, 1)
        self.assertAlmostEqual(m.median_translation, 0.0055)
        self.assertAlmostEqual(m.p90_translation, 0.0091)
        self.assertAlmostEqual(m.median_rotation, 0.055)
        self.assertEqual(len(m.joint_rms), 2)
        self.assertAlmostEqual(m.joint_rms[0], m.joint_rms[1])
        self.assertIsNone(m.median_camera_translation)

    def test_order_independent(self):
        records = make_records("a", [0.003, 0.001, 0.002]) + make_records("b", [0.01, 0.02])
        shuffled = list(records)
        random.Random(5).shuffle(shuffled)
        self.assertEqual(summarize_records(records, 1, 3).to_dict(), summarize_records(shuffled, 1, 3).to_dict())

    def test_all_failed(self):
        summary = summarize_records(make_records("a", [], failures=3), seed=0, trials=3)
        self.assertIsNone(summary.methods["a"].median_translation)
        self.assertEqual(summary.methods["a"].joint_rms, [])

    def test_summary_table(self):
        summary = summarize_records(make_records("a", [0.001]) + make_records("b", [0.002]), 0, 1)
        lines = summary_table(summary, order=["b", "a", "missing"]).splitlines()
        self.assertEqual(len(lines), 3)
        self.assertIn("median_trans_mm", lines[0])
        self.assertEqual(lines[1].split()[0], "b")
        self.assertEqual(lines[2].split()[0], "a")

    def test_benchmark_config(self):
        self.assertEqual(BenchmarkConfig.from_dict({}).trials, 200)
        self.assertEqual(BenchmarkConfig.from_dict({"workers": 4}).to_dict()["workers"], 4)
        with self.assertRaises(ConfigError):
            BenchmarkConfig(trials=0)
        with self.assertRaises(ConfigError):
            BenchmarkConfig(target_margin=-0.1)
        with self.assertRaises(ConfigError):
            BenchmarkConfig.from_dict({"repeats": 3})


class TestStateBenchmark(unittest.TestCase):
    """状态估计基准"""

    def test_noiseless(self):
        result = run_state_benchmark(default_scenario("noiseless"), trials=5, seed=0)
        self.assertLess(result.summary.methods["ours-enc"].median_translation, 1e-8)
        self.assertLess(result.summary.methods["ours-no-enc"].median_translation, 1e-6)
        self.assertEqual(result.summary.methods["encoder-only"].median_translation, 0.0)
        self.assertIsNone(result.ratio)
        self.assertLess(result.summary.methods["ours-enc"].median_camera_translation, 1e-9)

    def test_low_cost_improves_on_encoders(self):
        result = run_state_benchmark(default_scenario("low_cost"), trials=20, seed=1)
        self.assertIsNotNone(result.ratio)
        self.assertLess(result.ratio, 0.8)
        self.assertEqual(result.summary.methods["ours-enc"].failures, 0)
        self.assertEqual(len(result.records), 20 * 3)

    def test_deterministic_and_parallel_matches_serial(self):
        scenario = default_scenario("low_cost")
        serial = run_state_benchmark(scenario, trials=4, seed=3)
        again = run_state_benchmark(scenario, trials=4, seed=3)
        parallel = run_state_benchmark(scenario, trials=4, seed=3, workers=2)
        self.assertEqual(serial.to_dict(), again.to_dict())
        self.assertEqual(serial.to_dict(), parallel.to_dict())
        self.assertNotEqual(serial.to_dict(), run_state_benchmark(scenario, trials=4, seed=4).to_dict())

    def test_occlusion_sweep(self):
        result = run_state_benchmark(default_scenario("low_cost"), trials=6, seed=2, occlusion_levels=[0, 3])
        self.assertEqual(sorted(result.occlusion), [0, 3, 6])
        level0 = result.occlusion[0].methods
        # 只有基座可见时估计退回编码器读数
        self.assertAlmostEqual(level0["ours-enc"].median_translation, level0["encoder-only"].median_translation)
        self.assertIn("3", result.to_dict()["occlusion"])

    def test_upside_down(self):
        result = run_state_benchmark(default_scenario("noiseless"), trials=3, seed=0, upside_down=True)
        self.assertLess(result.summary.methods["ours-enc"].median_translation, 1e-8)
        self.assertLess(result.summary.methods["ours-enc"].median_camera_rotation, 1e-8)

    def test_invalid_arguments(self):
        scenario = default_scenario("noiseless")
        with self.assertRaises(ConfigError):
            run_state_benchmark(scenario, trials=0, seed=0)
        with self.assertRaises(ConfigError):
            run_state_benchmark(scenario, trials=1, seed=0, occlusion_levels=[7])


class TestControlBenchmark(unittest.TestCase):
    """控制基准"""

    def test_sample_targets(self):
        scenario = default_scenario("noiseless")
        targets, start = sample_targets(scenario, 5, 0, 0.1)
        again, start_again = sample_targets(scenario, 5, 0, 0.1)
        self.assertEqual([t.to_list() for t in targets], [t.to_list() for t in again])
        self.assertEqual(start.to_list(), start_again.to_list())
        self.assertTrue(all(scenario.chain.within_limits(t) for t in targets))

    def test_offset_only(self):
        result = run_control_benchmark(default_scenario("offset_only"), targets=4, seed=0)
        self.assertGreater(result.median("naive"), 1e-3)
        self.assertLess(result.median("no-delta"), 1e-6)
        self.assertLess(result.median("delta"), 1e-6)
        self.assertGreater(result.reduction, 0.99)
        doc = result.to_dict(include_steps=False)
        self.assertNotIn("episodes", doc)
        self.assertEqual(sorted(doc["statistics"]), ["delta", "naive", "no-delta"])

    def test_parallel_matches_serial(self):
        scenario = default_scenario("low_cost")
        serial = run_control_benchmark(scenario, targets=3, seed=5)
        parallel = run_control_benchmark(scenario, targets=3, seed=5, workers=3)
        self.assertEqual(serial.to_dict(), parallel.to_dict())

    def test_subset_of_modes(self):
        result = run_control_benchmark(default_scenario("noiseless"), targets=2, seed=0, modes=["naive"])
        self.assertEqual(list(result.summary.methods), ["naive"])
        self.assertIsNone(result.reduction)
        self.assertFalse(result.ordering_holds)

    def test_invalid_target_count(self):
        with self.assertRaises(ConfigError):
            run_control_benchmark(default_scenario("noiseless"), targets=0, seed=0)


if __name__ == '__main__':
    unittest.main()
