import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.core.quadrature import japanese, l2_norm, spectral_derivative
from apps.dft.models import Component
from apps.dft.services import DftService
from apps.evolve.models import Profile
from apps.evolve.services import free_gaussian
from apps.jost.services import JostService
from apps.potentials.services import PotentialService
from apps.scattering.services import ScatteringService
from .models import NormKind, SymbolKind
from .serializers import DecaySeriesSerializer
from .services import DECAY_EXPONENTS, DecayProbeService


def build(potential, grid):
    jost = JostService.solve_jost(potential, grid)
    scattering = ScatteringService.coefficients(jost, potential)
    return DftService.build_basis(jost, scattering, grid, potential)


class FitDecayRateTests(SimpleTestCase):
    def test_exact_power_law(self):
        ts = np.geomspace(20.0, 200.0, 12)
        slope, ci = DecayProbeService.fit_decay_rate(ts, ts**-0.5)
        self.assertAlmostEqual(slope, -0.5, places=12)
        self.assertLess(ci, 1e-10)

    def test_oscillating_power_law(self):
        ts = np.geomspace(20.0, 1000.0, 40)
        norms = 3.0 * ts**-0.75 * (1.0 + 0.1 * np.sin(np.log(ts)))
        slope, _ = DecayProbeService.fit_decay_rate(ts, norms)
        self.assertGreaterEqual(slope, -0.8)
        self.assertLessEqual(slope, -0.7)

    def test_guards(self):
        ts = np.array([20.0, 40.0, 80.0, 160.0])
        with self.assertRaises(ContractError):
            DecayProbeService.fit_decay_rate(ts, ts**-0.5)
        ts = np.geomspace(20.0, 200.0, 6)
        norms = ts**-0.5
        norms[2] = 0.0
        with self.assertRaises(ContractError):
            DecayProbeService.fit_decay_rate(ts, norms)

    def test_window_excludes_early_times(self):
        ts = np.concatenate([[1.0, 2.0, 5.0], np.geomspace(20.0, 200.0, 6)])
        norms = np.where(ts < 20.0, 1.0, ts**-1.0)
        series = DecayProbeService.make_series(ts, norms, NormKind.SUP)
        self.assertAlmostEqual(series.fitted_slope, -1.0, places=12)
        self.assertAlmostEqual(DecayProbeService.fit_decay_rate(series)[0], -1.0, places=12)

    def test_short_series_is_left_unfitted(self):
        series = DecayProbeService.make_series([20.0, 40.0], [1.0, 0.5], NormKind.SUP)
        self.assertFalse(series.has_fit)
        self.assertFalse(DecayProbeService.slope_within(series, 0.0))


class FreeFlowTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(100.0, 1025, 8.0, 512)
        cls.basis = build(PotentialService.make_zero(cls.grid), cls.grid)
        cls.h = free_gaussian(cls.grid.xs, 0.0)

    def test_sup_norm_matches_closed_form(self):
        ts = np.array([0.0, 1.0, 2.0, 5.0, 10.0])
        series = DecayProbeService.norm_series(self.basis, self.h, ts, NormKind.SUP)
        np.testing.assert_allclose(series.norms, (1.0 + 4.0 * ts**2) ** -0.25, rtol=1e-6)

    def test_sup_norm_slope(self):
        ts = np.geomspace(2.0, 10.0, 8)
        series = DecayProbeService.norm_series(self.basis, self.h, ts, NormKind.SUP, t_fit_min=2.0)
        self.assertGreater(series.fitted_slope, -0.53)
        self.assertLess(series.fitted_slope, -0.45)
        self.assertTrue(DecayProbeService.slope_within(series, DECAY_EXPONENTS["sup"]))

    def test_zero_mode_hypothesis(self):
        with self.assertRaises(ContractError):
            DecayProbeService.norm_series(self.basis, self.h, [1.0], NormKind.WEIGHTED_SUP, require_zero_mode=True)
        odd = self.grid.xs * self.h
        series = DecayProbeService.norm_series(self.basis, odd, [1.0, 2.0], NormKind.WEIGHTED_SUP, require_zero_mode=True)
        self.assertEqual(series.norms.size, 2)

    def test_smoothing_at_time_zero_is_the_data_norm(self):
        series = DecayProbeService.smoothing_series(self.basis, self.h, [0.0], beta=1.0)
        expected = l2_norm(japanese(self.grid.xs) ** -1.0 * spectral_derivative(self.h, self.grid.dx), self.grid.dx)
        self.assertAlmostEqual(series.norms[0], expected, places=14)

    def test_smoothing_norm_decays(self):
        series = DecayProbeService.smoothing_series(self.basis, self.h, [2.0, 4.0, 8.0])
        self.assertTrue(np.all(np.diff(series.norms) < 0))
        scaled = DecayProbeService.smoothing_series(self.basis, self.h, [2.0, 4.0, 8.0], multiply_by_t=True)
        np.testing.assert_allclose(scaled.norms, series.norms * np.array([2.0, 4.0, 8.0]))

    def test_dispersive_constant(self):
        constant = DecayProbeService.dispersive_constant(self.basis, self.h, [1.0, 2.0, 5.0, 10.0])
        self.assertGreater(constant, 0.0)
        self.assertLess(constant, 1.0 / np.sqrt(2.0) + 1e-3)
        with self.assertRaises(ContractError):
            DecayProbeService.dispersive_constant(self.basis, self.h, [0.0, 1.0])

    def test_bad_inputs(self):
        with self.assertRaises(ContractError):
            DecayProbeService.norm_series(self.basis, self.h, [2.0, 1.0], NormKind.SUP)
        with self.assertRaises(ContractError):
            DecayProbeService.norm_series(self.basis, self.h, [1.0], "L4")
        with self.assertRaises(ContractError):
            DecayProbeService.norm_series(self.basis, self.h, [1.0], NormKind.SUP, component="X")


class ComponentTests(SimpleTestCase):
    def test_components_add_up(self):
        grid = Grid(20.0, 513, 8.0, 256)
        basis = build(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        h = np.exp(-((grid.xs - 1.0) ** 2)).astype(complex)
        for t in (0.0, 1.0, 3.0):
            with self.subTest(t=t):
                self.assertLess(DecayProbeService.component_defect(basis, h, t), 1e-8)
        regular = DecayProbeService.norm_series(basis, h, [1.0, 2.0], NormKind.WEIGHTED_SUP, component=Component.REGULAR)
        self.assertTrue(np.all(regular.norms > 0))


class ProfileSeriesTests(SimpleTestCase):
    def test_slow_growth_is_fitted(self):
        ks = Grid(1.0, 8, 4.0, 32).ks
        ts = np.linspace(0.0, 200.0, 21)
        snapshots = (1.0 + ts[:, None]) ** 0.01 * np.exp(-(ks**2)) * (1.0 + 0j)
        profile = Profile(ts=ts, ks=ks, f_tilde_snapshots=snapshots)
        series = DecayProbeService.profile_series(profile, NormKind.SUP)
        self.assertAlmostEqual(series.fitted_slope, 0.01, delta=2e-3)
        self.assertTrue(np.all(DecayProbeService.profile_series(profile, NormKind.DK_L2).norms > 0))
        with self.assertRaises(ContractError):
            DecayProbeService.profile_series(profile, NormKind.WEIGHTED_SUP)

    def test_serializer(self):
        ts = np.geomspace(20.0, 200.0, 6)
        series = DecayProbeService.make_series(ts, ts**-0.5, NormKind.SUP)
        data = DecaySeriesSerializer(series).data
        self.assertEqual(len(data["slope_ci"]), 2)
        self.assertEqual(data["norm_kind"], NormKind.SUP)
        self.assertEqual(len(data["norms"]), 6)


class PdoProbeTests(SimpleTestCase):
    def test_free_symbols_vanish(self):
        grid = Grid(10.0, 129, 4.0, 32)
        basis = build(PotentialService.make_zero(grid), grid)
        for kind in SymbolKind.CHOICES:
            with self.subTest(kind=kind):
                np.testing.assert_array_equal(DecayProbeService.pdo_norm_probe(kind, basis, refinements=1), 0.0)

    def test_barrier_norms_plateau(self):
        grid = Grid(10.0, 257, 8.0, 64)
        basis = build(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        for kind in (SymbolKind.M_MINUS_1, SymbolKind.DX_M):
            with self.subTest(kind=kind):
                norms = DecayProbeService.pdo_norm_probe(kind, basis, refinements=2)
                self.assertEqual(norms.size, 3)
                self.assertTrue(np.all(norms > 0))
                self.assertTrue(DecayProbeService.is_plateau(norms))

    def test_power_iteration_on_a_known_matrix(self):
        matrix = np.diag([3.0, 1.0, 0.5]).astype(complex)
        self.assertAlmostEqual(DecayProbeService.operator_norm(matrix), 3.0, places=8)

    def test_unknown_symbol(self):
        grid = Grid(10.0, 129, 4.0, 32)
        basis = build(PotentialService.make_zero(grid), grid)
        with self.assertRaises(ContractError):
            DecayProbeService.pdo_norm_probe("m_squared", basis)
