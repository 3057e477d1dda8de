import json
import os
import sys
import tempfile
import unittest

import yaml

# Add parent directory to path to allow imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from curvflow.config.settings import ExperimentConfig, FlowControls, Settings
from curvflow.core.exceptions import ConfigError

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


class TestSettings(unittest.TestCase):
    """Test cases for the settings tree"""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.temp_dir.cleanup()

    def _write(self, name, data):
        path = os.path.join(self.temp_dir.name, name)
        with open(path, "w") as f:
            if name.endswith(".json"):
                json.dump(data, f)
            else:
                yaml.safe_dump(data, f)
        return path

    def test_defaults(self):
        """Test the default thresholds"""
        s = Settings()
        self.assertEqual(s.flow.blowup_threshold, 1e6)
        self.assertEqual(s.symbol.threshold_atol, 1e-4)
        self.assertEqual(s.estimates.grids, [64, 128, 256])
        self.assertEqual(s.catalog.structure_constant, 2.0)

    def test_repository_config(self):
        """Test that the shipped config.yaml validates"""
        s = Settings.load_from_file(os.path.join(REPO_ROOT, "config.yaml"))
        self.assertEqual(s.jet.default_degree, 6)
        self.assertEqual(s.flow.conv_tol, 1e-10)

    def test_yaml_and_json(self):
        """Test loading partial YAML and JSON files"""
        for name in ("partial.yaml", "partial.json"):
            s = Settings.load_from_file(self._write(name, {"flow": {"horizon": 3.0}}))
            self.assertEqual(s.flow.horizon, 3.0)
            self.assertEqual(s.flow.rtol, 1e-9)

    def test_unknown_key(self):
        """Test that unknown keys are rejected"""
        path = self._write("bad.yaml", {"flow": {"horizen": 3.0}})
        with self.assertRaises(ConfigError):
            Settings.load_from_file(path)

    def test_unsupported_format(self):
        """Test that other file extensions are rejected"""
        path = os.path.join(self.temp_dir.name, "settings.toml")
        with open(path, "w") as f:
            f.write("")
        with self.assertRaises(ConfigError):
            Settings.load_from_file(path)

    def test_step_ordering(self):
        """Test the step-size ordering validator"""
        with self.assertRaises(ValueError):
            FlowControls(min_step=1e-2, initial_step=1e-3)


class TestExperimentConfig(unittest.TestCase):
    """Test cases for experiment descriptions"""

    def test_round_trip_through_file(self):
        """Test loading an experiment description with nested controls"""
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "run.yaml")
            with open(path, "w") as f:
                yaml.safe_dump({"subcommand": "flow", "family": "berger", "alpha": 0.2,
                                "controls": {"horizon": 1.5}}, f)
            cfg = ExperimentConfig.load_from_file(path)
        self.assertEqual(cfg.family, "berger")
        self.assertEqual(cfg.controls.horizon, 1.5)
        self.assertEqual(cfg.workers, 4)

    def test_unknown_subcommand(self):
        """Test that the subcommand is validated"""
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "run.json")
            with open(path, "w") as f:
                json.dump({"subcommand": "ricci"}, f)
            with self.assertRaises(ConfigError):
                ExperimentConfig.load_from_file(path)

    def test_schema(self):
        """Test that the published schema lists the subcommands"""
        schema = ExperimentConfig.model_json_schema()
        self.assertIn("subcommand", schema["required"])
        self.assertIn("controls", schema["properties"])


if __name__ == '__main__':
    unittest.main()
