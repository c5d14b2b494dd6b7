import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError, GuardError
from apps.core.grid import Grid
from .models import Direction, PotentialKind
from .serializers import PotentialSummarySerializer
from .services import DEFAULT_GAMMAS, PotentialService


class BarrierTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(x_half_width=8.0, n_x=33, k_half_width=4.0, n_k=16)
        self.barrier = PotentialService.make_barrier(1.0, 1.0, self.grid)

    def node(self, x):
        return int(np.argmin(np.abs(self.grid.xs - x)))

    def test_samples_follow_definition_by_cases(self):
        self.assertEqual(self.barrier.vs[self.node(0.0)], 1.0)
        self.assertEqual(self.barrier.vs[self.node(1.0)], 1.0)
        self.assertEqual(self.barrier.vs[self.node(2.0)], 0.0)
        self.assertEqual(self.barrier.kind, PotentialKind.BARRIER)

    def test_closed_form_norms(self):
        self.assertAlmostEqual(PotentialService.weighted_l1_norm(self.barrier, 0.0), 2.0, places=12)
        self.assertAlmostEqual(PotentialService.weighted_l1_norm(self.barrier, 2.0), 8.0 / 3.0, places=12)
        # <x> integrates to asinh(1) + sqrt(2) over [-1, 1]
        self.assertAlmostEqual(PotentialService.weighted_l1_norm(self.barrier, 1.0), np.sqrt(2.0) + np.arcsinh(1.0), places=12)

    def test_measure_integrates_the_jump_exactly(self):
        self.assertAlmostEqual(self.barrier.measure.sum(), 2.0, places=13)
        off_grid = PotentialService.make_barrier(1.0, 0.8, self.grid)
        self.assertAlmostEqual(off_grid.measure.sum(), 1.6, places=13)

    def test_zero_height(self):
        flat = PotentialService.make_barrier(0.0, 1.0, self.grid)
        self.assertFalse(np.any(flat.vs))
        self.assertTrue(flat.is_zero)
        self.assertEqual(flat.kind, PotentialKind.BARRIER)
        self.assertEqual(flat.params, {"height": 0.0, "half_width": 1.0})
        self.assertEqual(flat.describe(), "barrier(K=0, L=1)")
        self.assertEqual(PotentialService.resample(flat, self.grid.refined()).describe(), "barrier(K=0, L=1)")
        for gamma in DEFAULT_GAMMAS:
            self.assertEqual(flat.gamma_norms[gamma], 0.0)

    def test_rejects_negative_height_and_wide_barrier(self):
        with self.assertRaises(GuardError):
            PotentialService.make_barrier(-1.0, 1.0, self.grid)
        with self.assertRaises(ContractError):
            PotentialService.make_barrier(1.0, 8.0, self.grid)

    def test_tail_weight_values_and_monotonicity(self):
        tail = PotentialService.tail_weight(self.barrier, 0.0, Direction.PLUS)
        self.assertAlmostEqual(tail.values[self.node(-2.0)], 2.0, places=12)
        self.assertAlmostEqual(tail.values[self.node(0.0)], 1.0, places=12)
        self.assertAlmostEqual(tail.values[self.node(2.0)], 0.0, places=12)
        self.assertTrue(np.all(np.diff(tail.values) <= 0))

        left = PotentialService.tail_weight(self.barrier, 1.0, "-")
        self.assertTrue(np.all(np.diff(left.values) >= 0))
        norm = PotentialService.weighted_l1_norm(self.barrier, 1.0)
        self.assertAlmostEqual(left.values[-1] / norm, 1.0, places=10)

    def test_norms_monotone_in_gamma(self):
        norms = [PotentialService.weighted_l1_norm(self.barrier, g) for g in (0.0, 0.5, 1.0, 2.0, 3.51)]
        self.assertTrue(np.all(np.diff(norms) >= 0))

    def test_resample_rebuilds_the_barrier(self):
        fine = self.grid.refined()
        resampled = PotentialService.resample(self.barrier, fine)
        self.assertEqual(resampled.params, self.barrier.params)
        self.assertEqual(resampled.xs.size, fine.n_x)
        self.assertAlmostEqual(PotentialService.weighted_l1_norm(resampled, 0.0), 2.0, places=12)
        self.assertTrue(PotentialService.resample(PotentialService.make_zero(self.grid), fine).is_zero)


class SampledPotentialTests(SimpleTestCase):
    def setUp(self):
        self.grid = Grid(x_half_width=40.0, n_x=2048, k_half_width=16.0, n_k=64)

    def test_gaussian_norm_matches_sqrt_pi(self):
        gaussian = PotentialService.make_gaussian(1.0, 1.0, self.grid)
        self.assertEqual(gaussian.kind, PotentialKind.SAMPLED)
        self.assertLess(abs(PotentialService.weighted_l1_norm(gaussian, 0.0) / np.sqrt(np.pi) - 1.0), 1e-8)

    def test_tail_endpoints_match_norm(self):
        gaussian = PotentialService.make_gaussian(1.0, 1.0, self.grid)
        tail = PotentialService.tail_weight(gaussian, 2.0, "+")
        norm = PotentialService.weighted_l1_norm(gaussian, 2.0)
        self.assertLess(abs(tail.values[0] / norm - 1.0), 1e-10)
        self.assertEqual(tail.values[-1], 0.0)

    def test_all_zero_samples(self):
        flat = PotentialService.make_sampled(self.grid.xs, np.zeros(self.grid.n_x))
        self.assertEqual(flat.kind, PotentialKind.SAMPLED)
        self.assertEqual(PotentialService.weighted_l1_norm(flat, 3.0), 0.0)
        self.assertTrue(np.all(PotentialService.tail_weight(flat, 1.0, "+").values == 0.0))

    def test_guard_and_override(self):
        vs = np.zeros(self.grid.n_x)
        vs[100] = -1e-3
        with self.assertRaises(GuardError):
            PotentialService.make_sampled(self.grid.xs, vs)
        signed = PotentialService.make_sampled(self.grid.xs, vs, allow_signed=True)
        self.assertTrue(signed.allow_signed)

    def test_rejects_non_uniform_grid(self):
        xs = np.linspace(-1.0, 1.0, 16) ** 3
        with self.assertRaises(ContractError):
            PotentialService.make_sampled(xs, np.ones_like(xs))
        with self.assertRaises(ContractError):
            PotentialService.weighted_l1_norm(PotentialService.make_zero(self.grid), -1.0)

    def test_csv_round_trip_is_exact(self):
        gaussian = PotentialService.make_gaussian(0.5, 2.0, self.grid)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "v.csv"
            PotentialService.write_csv(gaussian, path)
            self.assertEqual(path.read_text().splitlines()[0], "x,v")
            loaded = PotentialService.read_csv(path, grid=self.grid)
        np.testing.assert_array_equal(loaded.vs, gaussian.vs)

    def test_summary_serializer(self):
        data = PotentialSummarySerializer(PotentialService.make_gaussian(1.0, 1.0, self.grid)).data
        self.assertEqual(data["kind"], "sampled")
        self.assertIn("0", data["gamma_norms"])
