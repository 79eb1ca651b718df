import json
import logging
import os
import shutil
import tempfile
import unittest

import numpy as np
import yaml

from src.utils.config_manager import DEFAULT_CONFIG, ConfigManager, config_hash, setup_logging
from src.utils.exceptions import ParseError
from src.utils.json_io import dumps_document, load_document, parse_document_text, report_document, save_document


class TestConfigManager(unittest.TestCase):
    """配置管理器测试"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)
        logging.getLogger().handlers.clear()

    def test_missing_file_uses_defaults(self):
        manager = ConfigManager(self.temp_dir)
        self.assertEqual(manager.get_config(), DEFAULT_CONFIG)
        self.assertEqual(manager.get_solver_config()["rot_weight"], 0.1)
        self.assertEqual(manager.get_benchmark_config()["trials"], 200)

    def test_file_is_merged_with_defaults(self):
        with open(os.path.join(self.temp_dir, "config.yaml"), "w", encoding="utf-8") as f:
            yaml.safe_dump({"solver": {"rot_weight": 0.5}, "control": {"delta_iterations": 2}}, f)
        manager = ConfigManager(self.temp_dir)
        self.assertEqual(manager.get_solver_config()["rot_weight"], 0.5)
        self.assertEqual(manager.get_solver_config()["max_iterations"], 100)
        self.assertEqual(manager.get_control_config(), {"delta_iterations": 2, "recalibrate": "step_start"})

    def test_broken_file_falls_back(self):
        with open(os.path.join(self.temp_dir, "config.yaml"), "w", encoding="utf-8") as f:
            f.write("solver: [unclosed\n")
        manager = ConfigManager(self.temp_dir)
        self.assertFalse(manager.reload_config())
        self.assertEqual(manager.get_config(), DEFAULT_CONFIG)

    def test_bundled_config_matches_defaults(self):
        self.assertEqual(ConfigManager().get_config(), DEFAULT_CONFIG)

    def test_getters_return_copies(self):
        manager = ConfigManager(self.temp_dir)
        manager.get_solver_config()["rot_weight"] = 9.0
        self.assertEqual(manager.get_solver_config()["rot_weight"], 0.1)

    def test_config_hash(self):
        a = {"x": 1, "y": [1.0, 2.0]}
        b = {"y": [1.0, 2.0], "x": 1}
        self.assertEqual(config_hash(a), config_hash(b))
        self.assertNotEqual(config_hash(a), config_hash({"x": 2, "y": [1.0, 2.0]}))
        self.assertEqual(len(config_hash(a)), 64)

    def test_setup_logging(self):
        log_file = os.path.join(self.temp_dir, "logs", "run.log")
        setup_logging({"level": "warning", "file": log_file}, verbose=False)
        root = logging.getLogger()
        self.assertEqual(root.level, logging.WARNING)
        self.assertEqual(len(root.handlers), 2)
        for handler in root.handlers:
            handler.close()
        setup_logging({}, verbose=True)
        self.assertEqual(logging.getLogger().level, logging.DEBUG)
        self.assertEqual(len(logging.getLogger().handlers), 1)


class TestJsonIO(unittest.TestCase):
    """文档读写"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_dumps_is_canonical(self):
        text = dumps_document({"b": np.float64(1.5), "a": np.arange(3)})
        self.assertEqual(text, '{\n  "a": [\n    0,\n    1,\n    2\n  ],\n  "b": 1.5\n}\n')

    def test_json_syntax_error_position(self):
        with self.assertRaises(ParseError) as ctx:
            parse_document_text('{\n  "a": 1,\n  "b": \n}', source="doc.json")
        self.assertEqual(ctx.exception.location, "line 4, column 1")
        self.assertIn("doc.json", str(ctx.exception))

    def test_yaml_syntax_error_position(self):
        with self.assertRaises(ParseError) as ctx:
            parse_document_text("a: [1, 2\nb: 3\n", source="doc.yaml", fmt="yaml")
        self.assertTrue(ctx.exception.location.startswith("line "))

    def test_load_by_extension(self):
        yaml_path = os.path.join(self.temp_dir, "doc.yaml")
        with open(yaml_path, "w", encoding="utf-8") as f:
            f.write("a: 1\nb: [x, y]\n")
        self.assertEqual(load_document(yaml_path), {"a": 1, "b": ["x", "y"]})

        json_path = os.path.join(self.temp_dir, "nested", "doc.json")
        save_document({"k": [1, 2]}, json_path)
        self.assertEqual(load_document(json_path), {"k": [1, 2]})

    def test_missing_file(self):
        with self.assertRaises(ParseError) as ctx:
            load_document(os.path.join(self.temp_dir, "nope.json"))
        self.assertEqual(ctx.exception.exit_code, 3)

    def test_report_document(self):
        doc = report_document("estimate", {"theta": [0.0]}, {"solver": {"rot_weight": 0.1}}, seed=3)
        self.assertEqual(sorted(doc), ["config", "config_hash", "kind", "result", "seed", "tool_version"])
        self.assertEqual(doc["config_hash"], config_hash({"solver": {"rot_weight": 0.1}}))
        self.assertEqual(json.loads(dumps_document(doc)), doc)


if __name__ == '__main__':
    unittest.main()
