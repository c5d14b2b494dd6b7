import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.integrate import cumulative_trapezoid

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.core.quadrature import integrate
from apps.jost.services import JostService
from apps.potentials.services import PotentialService
from apps.scattering.services import ScatteringService
from . import cutoffs
from .models import Component
from .services import DftDiagnostics, DftService


def build(potential, grid):
    jost = JostService.solve_jost(potential, grid)
    scattering = ScatteringService.coefficients(jost, potential)
    return DftService.build_basis(jost, scattering, grid, potential)


class CutoffTests(SimpleTestCase):
    def setUp(self):
        self.xs = np.linspace(-3.0, 3.0, 6001)

    def test_partition_of_unity(self):
        np.testing.assert_allclose(cutoffs.chi_plus(self.xs) + cutoffs.chi_minus(self.xs), 1.0, atol=1e-14)
        self.assertTrue(np.all(np.diff(cutoffs.chi_plus(self.xs)) >= 0.0))
        self.assertEqual(cutoffs.chi_plus(-2.5), 0.0)
        self.assertEqual(cutoffs.chi_plus(2.5), 1.0)

    def test_bump_has_unit_mass(self):
        bump = cutoffs.bump(self.xs)
        self.assertTrue(np.all(bump >= 0.0))
        self.assertAlmostEqual(integrate(bump, self.xs), 1.0, places=8)
        np.testing.assert_array_equal(bump[np.abs(self.xs) >= 2.0], 0.0)

    def test_zeta_and_varpi_rebuild_phi_plus(self):
        zeta = cutoffs.zeta(self.xs)
        self.assertAlmostEqual(integrate(zeta, self.xs), 1.0, places=8)
        np.testing.assert_allclose(cutoffs.varpi(self.xs), cutoffs.varpi(-self.xs), atol=1e-15)

        rebuilt = cumulative_trapezoid(zeta, self.xs, initial=0.0) + cutoffs.varpi(self.xs)
        np.testing.assert_allclose(rebuilt, cutoffs.phi_plus(self.xs), atol=1e-6)

    def test_frequency_samples(self):
        self.assertAlmostEqual(cutoffs.zeta_hat(0.0)[0], 1.0 / np.sqrt(2.0 * np.pi), places=10)
        np.testing.assert_allclose(cutoffs.zeta_hat([1.5]), cutoffs.zeta_hat([-1.5]), atol=1e-15)
        # Smooth and compactly supported, so the transform decays fast
        self.assertLess(abs(cutoffs.varpi_hat(40.0)[0]), 1e-4)


class FreeBasisTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(20.0, 513, 8.0, 256)
        cls.basis = build(PotentialService.make_zero(cls.grid), cls.grid)
        cls.gaussian = np.exp(-(cls.grid.xs**2) / 2.0).astype(complex)

    def test_plane_waves(self):
        expected = np.exp(1j * np.outer(self.grid.xs, self.grid.ks)) / np.sqrt(2.0 * np.pi)
        np.testing.assert_allclose(self.basis.K, expected, atol=1e-14)
        np.testing.assert_array_equal(self.basis.K_R, 0.0)
        self.assertLess(self.basis.split_residual, 1e-12)

    def test_flat_fourier_transform(self):
        transformed = DftService.forward(self.basis, self.gaussian)
        np.testing.assert_allclose(transformed, np.exp(-(self.grid.ks**2) / 2.0), atol=1e-10)

    def test_round_trip(self):
        self.assertLess(DftDiagnostics.round_trip_error(self.basis, self.gaussian), 1e-6)

    def test_identity_multipliers(self):
        ones = np.ones(self.grid.n_k)
        unit_time = np.exp(1j * self.grid.ks**2 * 0.0)
        round_trip = DftService.inverse(self.basis, DftService.forward(self.basis, self.gaussian))
        np.testing.assert_allclose(DftService.multiplier(self.basis, ones, self.gaussian), round_trip, atol=1e-14)
        np.testing.assert_allclose(DftService.multiplier(self.basis, unit_time, self.gaussian), self.gaussian, atol=1e-6)

    def test_regular_projection_vanishes(self):
        g = np.exp(-(self.grid.ks**2))
        np.testing.assert_array_equal(DftService.component_project(self.basis, g, Component.REGULAR), 0.0)

    def test_shape_checks(self):
        with self.assertRaises(ContractError):
            DftService.forward(self.basis, np.zeros(10))
        with self.assertRaises(ContractError):
            DftService.component_project(self.basis, np.zeros(self.grid.n_k), "X")

    def test_basis_rejects_foreign_scattering_grid(self):
        other = Grid(20.0, 513, 4.0, 256)
        jost = JostService.solve_jost(PotentialService.make_zero(self.grid), self.grid)
        with self.assertRaises(ContractError):
            DftService.build_basis(jost, self.basis.scattering, other)


class BarrierBasisTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(20.0, 1025, 10.0, 320)
        cls.barrier = PotentialService.make_barrier(1.0, 1.0, cls.grid)
        cls.basis = build(cls.barrier, cls.grid)
        cls.gaussian = np.exp(-(cls.grid.xs**2) / 2.0).astype(complex)

    def test_split_identity(self):
        self.assertLess(self.basis.split_residual, 1e-12)

    def test_plancherel(self):
        ratio = DftDiagnostics.plancherel_ratio(self.basis, self.gaussian)
        self.assertLess(abs(ratio - 1.0), 1e-3)

    def test_round_trip(self):
        self.assertLess(DftDiagnostics.round_trip_error(self.basis, self.gaussian), 1e-3)

    def test_unitarity_on_wave_packets(self):
        self.assertLess(DftDiagnostics.unitarity_defect(self.basis), 1e-3)

    def test_split_projection(self):
        g = np.exp(-((self.grid.ks - 1.0) ** 2))
        full = DftService.component_project(self.basis, g, Component.FULL)
        singular = DftService.component_project(self.basis, g, Component.SINGULAR)
        regular = DftService.component_project(self.basis, g, Component.REGULAR)
        self.assertLess(np.max(np.abs(singular + regular - full)), 1e-10)
        self.assertGreater(np.max(np.abs(regular)), 1e-3)

    def test_coefficients_are_contractions(self):
        transformed = DftService.forward(self.basis, self.gaussian)
        self.assertLessEqual(DftDiagnostics.coefficient_bound(self.basis, transformed), 1.0 + 1e-6)

    def test_regular_part_bound_is_grid_stable(self):
        fine = Grid(20.0, 2049, 10.0, 640)
        coarse_bound = DftDiagnostics.regular_part_bound(self.basis)
        fine_bound = DftDiagnostics.regular_part_bound(build(PotentialService.make_barrier(1.0, 1.0, fine), fine))
        self.assertLess(abs(fine_bound / coarse_bound - 1.0), 0.1)

    def test_regular_kernel_is_localized(self):
        far = np.abs(self.grid.xs) > 5.0
        near = np.abs(self.grid.xs) < 1.0
        self.assertLess(np.max(np.abs(self.basis.K_R[far])), 1e-12)
        self.assertGreater(np.max(np.abs(self.basis.K_R[near])), 1e-2)

    def test_even_barrier_maps_odd_data_to_odd_transform(self):
        odd = self.grid.xs * self.gaussian
        transformed = DftService.forward(self.basis, odd)
        np.testing.assert_allclose(transformed[::-1], -transformed, atol=1e-10)

    def test_report_keys(self):
        report = DftDiagnostics.report(self.basis, self.barrier)
        for key in ("plancherel_ratio", "diagonalization_residual", "split_residual", "coefficient_bound", "low_frequency_ratio"):
            self.assertIn(key, report)

    def test_export_slices(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = DftService.export_csv(self.basis, [1.0, -1.0], tmp)
            lines = Path(path).read_text().splitlines()
        self.assertEqual(len(lines), self.grid.n_x + 1)
        self.assertTrue(lines[0].startswith("x,re_K_"))


class GenericVanishingTests(SimpleTestCase):
    def ratio(self, n_k):
        grid = Grid(20.0, 513, 8.0, n_k)
        basis = build(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        transformed = DftService.forward(basis, np.exp(-((grid.xs - 0.5) ** 2)))
        return np.abs(transformed[n_k // 2]) / np.max(np.abs(transformed))

    def test_transform_vanishes_linearly_at_zero(self):
        coarse, fine = self.ratio(256), self.ratio(512)
        self.assertLess(fine, 0.1)
        self.assertLess(fine / coarse, 0.7)

    def test_extrapolated_zero_value(self):
        grid = Grid(20.0, 513, 8.0, 512)
        f = np.exp(-((grid.xs - 0.5) ** 2))
        barrier = build(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        self.assertLess(DftDiagnostics.zero_frequency_ratio(barrier, DftService.forward(barrier, f)), 1e-3)
        # Without a potential f~(0) is the mean of f, the largest value of |f~|
        free = build(PotentialService.make_zero(grid), grid)
        self.assertGreater(DftDiagnostics.zero_frequency_ratio(free, DftService.forward(free, f)), 0.9)


class DiagonalizationTests(SimpleTestCase):
    def test_barrier(self):
        grid = Grid(20.0, 1025, 10.0, 320)
        barrier = PotentialService.make_barrier(1.0, 1.0, grid)
        basis = build(barrier, grid)
        # Packet kept off the barrier, where the eigenfunctions have kinks
        f = np.exp(-((grid.xs - 4.0) ** 2))
        self.assertLess(DftDiagnostics.diagonalization_residual(basis, barrier, f), 1e-3)

    def test_squared_frequency_multiplier_is_the_hamiltonian(self):
        grid = Grid(20.0, 1025, 10.0, 320)
        potential = PotentialService.make_gaussian(1.0, 1.0, grid)
        basis = build(potential, grid)
        f = np.exp(-(grid.xs**2) / 2.0)
        applied = DftService.multiplier(basis, grid.ks**2, f)
        expected = (1.0 - grid.xs**2) * f + potential.vs * f
        interior = np.abs(grid.xs) < 10.0
        error = np.linalg.norm((applied - expected)[interior]) / np.linalg.norm(expected[interior])
        self.assertLess(error, 1e-3)
        self.assertLess(np.max(np.abs(applied.imag)), 1e-6)
