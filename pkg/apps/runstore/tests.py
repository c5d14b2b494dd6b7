import json
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from apps.asymptotics.models import ModScatReport
from apps.core.exceptions import ConfigError, LabError
from apps.core.grid import Grid
from apps.decay_probe.models import NormKind
from apps.decay_probe.services import DecayProbeService
from . import services as runstore_services
from .services import MANIFEST_NAME, RunStoreService


class ConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text, name="run.cfg"):
        path = self.dir / name
        path.write_text(text)
        return path

    def test_minimal_config_gets_defaults(self):
        config = RunStoreService.load_config(self.write("# barrier run\npotential.kind = barrier\npotential.height = 1\npotential.half_width = 1\n"))
        self.assertEqual(config.grid, Grid(40.0, 2048, 16.0, 2048))
        self.assertEqual(config.evolution.t_end, 200.0)
        self.assertEqual(config.evolution.sign, "defocusing")
        self.assertEqual(config.experiment.epsilons, (0.4, 0.2, 0.1, 0.05))
        self.assertEqual(config.evolution.snapshots, (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0))

    def test_invalid_value_names_the_field(self):
        with self.assertRaises(ConfigError) as caught:
            RunStoreService.load_config(self.write("grid.n_x = 0\n"))
        self.assertEqual(caught.exception.field_path, "grid.n_x")
        self.assertIn("grid.n_x", str(caught.exception))
        self.assertEqual(caught.exception.exit_code, 2)

        with self.assertRaises(ConfigError) as caught:
            RunStoreService.load_config(self.write("grid.n_k = 101\n"))
        self.assertEqual(caught.exception.field_path, "grid.n_k")

        with self.assertRaises(ConfigError) as caught:
            RunStoreService.load_config(self.write("potential.kind = sampled\n"))
        self.assertEqual(caught.exception.field_path, "potential.path")

    def test_unknown_keys_are_listed(self):
        with self.assertRaises(ConfigError) as caught:
            RunStoreService.load_config(self.write("grid.n_z = 4\nsolver.order = 2\ngrid.n_x = 64\n"))
        self.assertIn("grid.n_z", str(caught.exception))
        self.assertIn("solver.order", str(caught.exception))

    def test_unparseable_line_and_missing_file(self):
        with self.assertRaises(ConfigError):
            RunStoreService.load_config(self.write("grid.n_x 64\n"))
        with self.assertRaises(ConfigError):
            RunStoreService.load_config(self.dir / "missing.cfg")

    def test_round_trip(self):
        text = "potential.kind = gaussian\npotential.amplitude = 0.7\ngrid.n_x = 257\ngrid.n_k = 64\nevolution.dt = 0.05\nevolution.snapshots = 3, 1.5\nexperiment.epsilons = 0.3,0.1\n"
        first = RunStoreService.load_config(self.write(text))
        dumped = RunStoreService.dump_config(first)
        second = RunStoreService.load_config(self.write(dumped, "dumped.cfg"))
        self.assertEqual(first, second)
        self.assertEqual(RunStoreService.dump_config(second), dumped)
        self.assertEqual(second.evolution.snapshots, (1.5, 3.0))

    def test_settings_drive_defaults(self):
        with self.settings(SPECTRAL_LAB={**settings.SPECTRAL_LAB, "GRID": {"X_HALF_WIDTH": 10.0, "N_X": 129, "K_HALF_WIDTH": 4.0, "N_K": 32}}):
            self.assertEqual(RunStoreService.parse_config({}).grid, Grid(10.0, 129, 4.0, 32))


class ReportTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        ts = np.array([1.0, 2.0, 4.0])
        self.series = DecayProbeService.make_series(ts, ts**-0.5, NormKind.SUP)

    def tearDown(self):
        self.tmp.cleanup()

    def test_series_csv(self):
        path = RunStoreService.emit_series(self.series, self.dir / "sup.csv")
        lines = path.read_text().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertEqual(lines[0], "t,norm")
        self.assertEqual(float(lines[2].split(",")[1]), 2.0**-0.5)
        first = path.read_bytes()
        RunStoreService.emit_series(self.series, path)
        self.assertEqual(path.read_bytes(), first)

    def test_report_json(self):
        report = ModScatReport(ts=np.array([0.0, 1.0]), ks_probe=np.array([0.5]), w_snapshots=np.ones((2, 1)), W_inf_estimate=np.array([1.0 + 0.5j]))
        path = RunStoreService.emit_series(report, self.dir / "modscat.json")
        data = json.loads(path.read_text())
        self.assertEqual(data["W_inf_estimate"], {"re": [1.0], "im": [0.5]})
        self.assertIsNone(data["fitted_rho"])
        self.assertEqual(RunStoreService.read_manifest(self.dir), None)

    def test_empty_report_has_a_manifest(self):
        manifest = RunStoreService.write_report(self.dir / "run", {})
        self.assertEqual(manifest.outputs, {})
        stored = RunStoreService.read_manifest(self.dir / "run")
        self.assertEqual(stored["outputs"], {})
        self.assertEqual(stored["version"], "0.4.0")

    def test_checksums_are_reproducible(self):
        artifacts = {"sup.csv": self.series, "slope.json": {"slope": self.series.fitted_slope}}
        first = RunStoreService.write_report(self.dir / "a", artifacts, command="decay-fit", timings={"fit": 0.1}, checks={"sup": np.True_, "smoothing": False})
        second = RunStoreService.write_report(self.dir / "b", artifacts, command="decay-fit", timings={"fit": 0.2})
        self.assertEqual(first.outputs, second.outputs)
        self.assertEqual(len(first.outputs["sup.csv"]), 64)
        stored = RunStoreService.read_manifest(self.dir / "a")
        self.assertEqual(stored["command"], "decay-fit")
        self.assertEqual(stored["checks"], {"sup": True, "smoothing": False})
        self.assertIsNone(json.loads((self.dir / "a" / "slope.json").read_text())["slope"])

    def test_interrupted_write_leaves_no_manifest(self):
        run = self.dir / "run"
        RunStoreService.write_report(run, {"sup.csv": self.series})
        self.assertIsNotNone(RunStoreService.read_manifest(run))

        original = runstore_services._write_atomic
        calls = []

        def failing(path, content):
            calls.append(path)
            if len(calls) == 2:
                raise OSError("disk full")
            original(path, content)

        with mock.patch.object(runstore_services, "_write_atomic", side_effect=failing):
            with self.assertRaises(LabError):
                RunStoreService.write_report(run, {"sup.csv": self.series, "sup.json": self.series})
        self.assertFalse((run / MANIFEST_NAME).exists())
        self.assertEqual(sorted(p.name for p in run.iterdir()), ["sup.csv"])

    def test_unknown_artifact(self):
        with self.assertRaises(LabError):
            RunStoreService.render_artifact(object())
