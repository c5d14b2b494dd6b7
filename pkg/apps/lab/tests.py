import io
import json
import tempfile
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError
from apps.runstore.services import MANIFEST_NAME, RunStoreService
from .models import Subcommand
from .services import LabRunner

SMALL_GRID = "grid.x_half_width = 8\ngrid.n_x = 129\ngrid.k_half_width = 4\ngrid.n_k = 32\n"
BARRIER_GRID = "grid.x_half_width = 8\ngrid.n_x = 2049\ngrid.k_half_width = 4\ngrid.n_k = 64\n"
DELTA_GRID = "grid.x_half_width = 4\ngrid.n_x = 2049\ngrid.k_half_width = 4\ngrid.n_k = 64\n"
FREE_GRID = "grid.x_half_width = 20\ngrid.n_x = 257\ngrid.k_half_width = 8\ngrid.n_k = 128\n"


class LabCommandTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def config(self, text, name="run.cfg"):
        path = self.dir / name
        path.write_text(text)
        return str(path)

    def lab(self, subcommand, config_text, out="run"):
        stdout = io.StringIO()
        out = self.dir / out
        call_command("lab", subcommand, "--config", self.config(config_text), "--out", str(out), stdout=stdout)
        return out, stdout.getvalue()

    def lab_manifest(self, subcommand, config_text):
        """Run with failed checks tolerated; returns the run directory and its manifest."""
        try:
            self.lab(subcommand, config_text)
        except CommandError as e:
            if e.returncode != 1:
                raise
        out = self.dir / "run"
        return out, RunStoreService.read_manifest(out)


class ScatterCommandTests(LabCommandTestCase):
    def test_barrier_run_passes(self):
        out, stdout = self.lab(Subcommand.SCATTER, "potential.kind = barrier\npotential.height = 1\npotential.half_width = 1\n" + BARRIER_GRID)
        self.assertIn("identities: PASS", stdout)
        self.assertIn("barrier_oracle: PASS", stdout)

        manifest = RunStoreService.read_manifest(out)
        self.assertEqual(manifest["command"], "scatter")
        self.assertTrue(manifest["passed"])
        self.assertEqual(sorted(manifest["outputs"]), ["scattering.csv", "scattering.json"])
        self.assertEqual(manifest["config"]["grid"]["n_x"], 2049)

        summary = json.loads((out / "scattering.json").read_text())
        self.assertTrue(summary["generic"])
        self.assertLess(summary["barrier_oracle_error"], 1e-6)
        self.assertEqual(summary["potential"]["kind"], "barrier")
        self.assertEqual(summary["potential"]["description"], "barrier(K=1, L=1)")
        self.assertIn("0", summary["potential"]["gamma_norms"])
        self.assertEqual(summary["weighted_l1_norm"], summary["potential"]["gamma_norms"]["1"])
        self.assertEqual([(row["side"], row["s"]) for row in summary["jost_bounds"]], [("+", 0), ("+", 1), ("-", 0), ("-", 1)])
        rows = np.loadtxt(out / "scattering.csv", delimiter=",", skiprows=1)
        self.assertEqual(rows.shape[0], 64)
        self.assertLess(np.max(np.abs(rows[:, -1])), 1e-6)


class SolveCommandTests(LabCommandTestCase):
    def test_zero_data_stays_zero(self):
        text = "potential.kind = zero\n" + SMALL_GRID + "evolution.eta = 0\nevolution.t_end = 1\nevolution.dt = 0.1\nevolution.snapshots = 0.5\n"
        out, _ = self.lab(Subcommand.SOLVE, text)
        rows = np.loadtxt(out / "snapshots.csv", delimiter=",", skiprows=1)
        # x, then re/im for t = 0, 0.5, 1
        self.assertEqual(rows.shape, (129, 7))
        np.testing.assert_array_equal(rows[:, 1:], 0.0)
        header = (out / "snapshots.csv").read_text().splitlines()[0]
        self.assertEqual(header, "x,re_u_0,im_u_0,re_u_0.5,im_u_0.5,re_u_1,im_u_1")
        conservation = json.loads((out / "conservation.json").read_text())
        self.assertEqual(conservation["mass_drift"], 0.0)
        # Zero data has no splitting error to fit
        self.assertIsNone(conservation["splitting_order"])
        self.assertEqual(conservation["time_reversal_error"], 0.0)

    def test_splitting_order_is_recorded(self):
        text = "potential.kind = zero\n" + FREE_GRID + "evolution.eta = 0.08\nevolution.t_end = 1\nevolution.dt = 0.02\n"
        out, manifest = self.lab_manifest(Subcommand.SOLVE, text)
        self.assertTrue(manifest["checks"]["splitting_order"])
        self.assertTrue(manifest["checks"]["time_reversal"])
        self.assertTrue(manifest["checks"]["mass_conservation"])
        self.assertIn("splitting", manifest["timings"])
        conservation = json.loads((out / "conservation.json").read_text())
        self.assertLess(abs(conservation["splitting_order"] - 2.0), 0.5)
        self.assertEqual(conservation["splitting_window"], 1.0)
        self.assertEqual(sorted(manifest["outputs"]), ["conservation.json", "series.csv", "snapshots.csv"])

    def test_blowup_exits_with_numerical_failure(self):
        text = "potential.kind = zero\n" + SMALL_GRID + "evolution.eta = 0.1\nevolution.t_end = 0.2\nevolution.dt = 0.1\n"
        evolution = {**settings.SPECTRAL_LAB["EVOLUTION"], "BLOWUP_FACTOR": 0.5}
        with self.settings(SPECTRAL_LAB={**settings.SPECTRAL_LAB, "EVOLUTION": evolution}):
            with self.assertRaises(CommandError) as caught:
                self.lab(Subcommand.SOLVE, text)
        self.assertEqual(caught.exception.returncode, 4)
        self.assertIsNone(RunStoreService.read_manifest(self.dir / "run"))


class DftCheckCommandTests(LabCommandTestCase):
    def test_barrier_diagnostics(self):
        text = "potential.kind = barrier\npotential.height = 1\npotential.half_width = 1\n" + SMALL_GRID + "experiment.pdo_refinements = 0\n"
        out, manifest = self.lab_manifest(Subcommand.DFT_CHECK, text)
        self.assertEqual(sorted(manifest["outputs"]), ["dft_check.json", "pdo_norms.csv"])
        # No refinements, so no plateau checks
        self.assertEqual(sorted(manifest["checks"]), ["diagonalization", "low_frequency", "plancherel", "split_identity"])
        self.assertTrue(manifest["checks"]["split_identity"])

        summary = json.loads((out / "dft_check.json").read_text())
        self.assertLess(summary["split_residual"], 1e-12)
        self.assertEqual([probe["symbol_kind"] for probe in summary["pdo_norms"]], ["m_minus_1", "dx_m", "dk_m"])
        for probe in summary["pdo_norms"]:
            self.assertEqual(len(probe["norms"]), 1)
            self.assertFalse(probe["plateau"])
            self.assertEqual(probe["beta"], 1.0)


class DecayFitCommandTests(LabCommandTestCase):
    def test_free_line_probes(self):
        text = "potential.kind = zero\n" + SMALL_GRID + "evolution.t_end = 40\nexperiment.t_fit_min = 10\nexperiment.decay_points = 8\n"
        out, manifest = self.lab_manifest(Subcommand.DECAY_FIT, text)
        probes = ["smoothing_zero_mode_growth", "sup", "weighted_sup_zero_mode"]
        self.assertEqual(sorted(manifest["outputs"]), sorted([f"{name}.csv" for name in probes] + ["slopes.json"]))
        self.assertEqual(sorted(manifest["checks"]), sorted(probes + ["component_split"]))
        self.assertTrue(manifest["checks"]["component_split"])

        slopes = json.loads((out / "slopes.json").read_text())
        self.assertFalse(slopes["generic"])
        self.assertEqual(sorted(slopes["slopes"]), probes)
        self.assertEqual(slopes["slopes"]["sup"]["bound"], -0.5)
        rows = np.loadtxt(out / "sup.csv", delimiter=",", skiprows=1)
        self.assertEqual(rows.shape, (8, 2))


class MeasureCheckCommandTests(LabCommandTestCase):
    def test_barrier_decomposition(self):
        text = "potential.kind = barrier\npotential.height = 1\npotential.half_width = 1\n"
        text += "grid.x_half_width = 20\ngrid.n_x = 1025\ngrid.k_half_width = 8\ngrid.n_k = 256\n"
        out, manifest = self.lab_manifest(Subcommand.MEASURE_CHECK, text)
        self.assertEqual(sorted(manifest["outputs"]), ["measure.json"])
        expected = ["closure", "commutator", "inverse_map", "regular_decay_gap", "singular_+_paths", "singular_-_paths"]
        self.assertEqual(sorted(manifest["checks"]), expected)
        self.assertTrue(manifest["checks"]["singular_+_paths"])
        self.assertTrue(manifest["checks"]["singular_-_paths"])

        summary = json.loads((out / "measure.json").read_text())
        self.assertEqual(summary["t"], 0.5)
        self.assertLess(summary["closure"], 2e-3)
        self.assertIn("regular_decay_gap", summary)
        self.assertEqual(len(summary["identities"]), 3)


class AsymptoticsCommandTests(LabCommandTestCase):
    def test_short_run_fails_the_fit_checks(self):
        text = "potential.kind = zero\n" + FREE_GRID + "evolution.eta = 0.08\nevolution.t_end = 4\nevolution.dt = 0.05\n"
        out, manifest = self.lab_manifest(Subcommand.ASYMPTOTICS, text)
        self.assertFalse(manifest["passed"])
        self.assertEqual(sorted(manifest["outputs"]), ["asymptotics.json", "modscat.json", "profile_dk.csv"])
        checks = manifest["checks"]
        # The run ends before t_fit_min, so there is nothing to fit
        for name in ("ode_residual_rate", "cauchy_gaps", "profile_dk_growth"):
            self.assertFalse(checks[name], name)
        for name in ("modulus", "profile_sup", "decay_bound"):
            self.assertTrue(checks[name], name)

        summary = json.loads((out / "asymptotics.json").read_text())
        self.assertIsNone(summary["fitted_rho"])
        self.assertLess(summary["decay_bound"], 3 * 0.08)
        modscat = json.loads((out / "modscat.json").read_text())
        self.assertEqual(modscat["cauchy_gaps"], [])


class DeltaLimitCommandTests(LabCommandTestCase):
    def test_sweep_converges(self):
        out, stdout = self.lab(Subcommand.DELTA_LIMIT, DELTA_GRID)
        self.assertIn("monotone: PASS", stdout)
        rows = np.loadtxt(out / "delta_limit.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(rows[:, 0], [0.4, 0.2, 0.1, 0.05])
        self.assertTrue(np.all(np.diff(rows[:, 1]) < 0))
        self.assertLess(rows[-1, 1], 0.05)

    def test_outputs_are_byte_identical_across_runs(self):
        first, _ = self.lab(Subcommand.DELTA_LIMIT, DELTA_GRID + "experiment.epsilons = 0.1,0.05\n", out="a")
        second, _ = self.lab(Subcommand.DELTA_LIMIT, DELTA_GRID + "experiment.epsilons = 0.1,0.05\n", out="b")
        self.assertEqual(RunStoreService.read_manifest(first)["outputs"], RunStoreService.read_manifest(second)["outputs"])
        self.assertEqual((first / "delta_limit.csv").read_bytes(), (second / "delta_limit.csv").read_bytes())

    def test_failed_check_exits_with_one(self):
        with self.assertRaises(CommandError) as caught:
            self.lab(Subcommand.DELTA_LIMIT, DELTA_GRID + "experiment.epsilons = 0.4\n")
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn("final", str(caught.exception))
        # Artifacts and manifest are still written for a failed check
        manifest = RunStoreService.read_manifest(self.dir / "run")
        self.assertFalse(manifest["passed"])
        self.assertFalse(manifest["checks"]["final"])
        self.assertTrue(manifest["checks"]["monotone"])


class ErrorExitTests(LabCommandTestCase):
    def test_config_error_exits_with_two(self):
        with self.assertRaises(CommandError) as caught:
            self.lab(Subcommand.SCATTER, "grid.n_x = 0\n")
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("grid.n_x", str(caught.exception))
        self.assertFalse((self.dir / "run").exists())

    def test_contract_error_exits_with_three(self):
        with self.assertRaises(CommandError) as caught:
            self.lab(Subcommand.DECAY_FIT, SMALL_GRID + "evolution.t_end = 10\n")
        self.assertEqual(caught.exception.returncode, 3)

    def test_unknown_subcommand(self):
        with self.assertRaises(CommandError):
            call_command("lab", "fly", stdout=io.StringIO())

    def test_runner_rejects_unknown_command(self):
        with self.assertRaises(ContractError):
            LabRunner(RunStoreService.parse_config({})).execute("fly")


class ManifestTests(LabCommandTestCase):
    def test_rerun_replaces_the_manifest(self):
        out, _ = self.lab(Subcommand.DELTA_LIMIT, DELTA_GRID + "experiment.epsilons = 0.1,0.05\n")
        first = (out / MANIFEST_NAME).read_text()
        self.lab(Subcommand.DELTA_LIMIT, DELTA_GRID + "experiment.epsilons = 0.1,0.05\n")
        second = json.loads((out / MANIFEST_NAME).read_text())
        self.assertEqual(json.loads(first)["outputs"], second["outputs"])
        self.assertIn("sweep", second["timings"])
        self.assertEqual(second["config"]["experiment"]["epsilons"], [0.1, 0.05])
