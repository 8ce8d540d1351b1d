"""Tests for the command-line interface."""
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from cli import EXIT_CONFIG_ERROR, EXIT_DIVERGENCE, EXIT_SUCCESS, EXIT_TASK_FAILURE, build_parser, main
from exceptions import SimulationDivergenceError
from models.schemas import RunMetrics
from orchestration.orchestrator import RunResult
from utils.file_utils import ensure_run_dirs, write_table
from tests.mocks.synthetic import make_scenario, synthetic_logs


class TestParser(unittest.TestCase):
    """Tests for argument parsing."""

    def test_run_arguments(self):
        args = build_parser().parse_args(["--seed-override", "5", "--quiet", "run", "noise1"])
        self.assertEqual(args.scenario, "noise1")
        self.assertEqual(args.seed_override, 5)
        self.assertTrue(args.quiet)

    def test_ablate_defaults(self):
        args = build_parser().parse_args(["ablate", "ablation_contact_factor"])
        self.assertEqual(args.toggle, "contact_factor")
        self.assertEqual(args.workers, 2)

    def test_no_command_prints_help(self):
        with mock.patch("sys.stdout"):
            self.assertEqual(main([]), EXIT_SUCCESS)


class TestRunCommand(unittest.TestCase):
    """Tests for exit codes of the run command."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = str(Path(self.tmp.name) / "run")

    def tearDown(self):
        self.tmp.cleanup()

    def _run(self, *extra):
        return main(["--quiet", "--out-dir", self.out, "run", "peg_in_hole_baseline", *extra])

    @mock.patch("cli.run_scenario")
    def test_success(self, mock_run):
        mock_run.return_value = RunResult(RunMetrics(scenario="s", seed=1, success=True), None)
        self.assertEqual(self._run(), EXIT_SUCCESS)
        scenario = mock_run.call_args[0][0]
        self.assertEqual(scenario.name, "peg_in_hole_baseline")
        self.assertEqual(scenario.timing.camera_rate, 30.0)

    @mock.patch("cli.run_scenario")
    def test_task_failure(self, mock_run):
        mock_run.return_value = RunResult(RunMetrics(scenario="s", seed=1, success=False), None)
        self.assertEqual(self._run(), EXIT_TASK_FAILURE)

    @mock.patch("cli.run_scenario")
    def test_divergence_from_result(self, mock_run):
        mock_run.return_value = RunResult(RunMetrics(scenario="s", seed=1), None, diverged=True)
        self.assertEqual(self._run(), EXIT_DIVERGENCE)

    @mock.patch("cli.run_scenario")
    def test_divergence_raised(self, mock_run):
        mock_run.side_effect = SimulationDivergenceError("state became non-finite")
        with mock.patch("cli.console"):
            self.assertEqual(self._run(), EXIT_DIVERGENCE)

    @mock.patch("cli.run_scenario")
    def test_seed_override_reaches_scenario(self, mock_run):
        mock_run.return_value = RunResult(RunMetrics(scenario="s", seed=99, success=True), None)
        main(["--quiet", "--seed-override", "99", "--out-dir", self.out, "run", "peg_in_hole_baseline"])
        self.assertEqual(mock_run.call_args[0][0].seed, 99)

    def test_unknown_scenario_is_config_error(self):
        with mock.patch("cli.console"):
            self.assertEqual(main(["--quiet", "--out-dir", self.out, "run", "no_such_scenario"]),
                             EXIT_CONFIG_ERROR)


class TestLogCommands(unittest.TestCase):
    """Tests for metrics and plots over existing logs."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.paths = ensure_run_dirs(Path(self.tmp.name) / "run")
        logs = synthetic_logs()
        for name in ("truth", "control", "ft", "phases"):
            frame = getattr(logs, name)
            write_table(frame.to_dict("records"), self.paths.stream(name), frame.columns)

    def tearDown(self):
        self.tmp.cleanup()

    def test_metrics_needs_a_scenario(self):
        with mock.patch("cli.console"):
            self.assertEqual(main(["--quiet", "metrics", str(self.paths.root)]), EXIT_CONFIG_ERROR)

    def test_metrics_uses_snapshot(self):
        self.paths.scenario_json.write_text(make_scenario().model_dump_json())
        # two seconds of logs cannot fill the final force window
        self.assertEqual(main(["--quiet", "metrics", str(self.paths.logs)]), EXIT_TASK_FAILURE)

    def test_plots_writes_panels(self):
        exit_code = main(["--quiet", "plots", str(self.paths.root), "--scenario", "peg_in_hole_baseline"])
        self.assertEqual(exit_code, EXIT_SUCCESS)
        self.assertTrue((self.paths.plots / "force.csv").exists())


if __name__ == "__main__":
    unittest.main()
