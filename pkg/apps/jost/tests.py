import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.core.quadrature import centered_derivative
from apps.potentials.services import PotentialService
from .services import JostService


def nearest(values, target):
    return int(np.argmin(np.abs(values - target)))


class ZeroPotentialTests(SimpleTestCase):
    def test_free_jost_functions_are_one(self):
        grid = Grid(8.0, 129, 4.0, 32)
        jost = JostService.solve_jost(PotentialService.make_zero(grid), grid)
        np.testing.assert_array_equal(jost.m_plus, 1.0)
        np.testing.assert_array_equal(jost.m_minus, 1.0)
        for derivative in (jost.dk_m_plus, jost.dk_m_minus, jost.dx_m_plus, jost.dx_m_minus):
            np.testing.assert_array_equal(derivative, 0.0)
        psi = JostService.eigenfunction(jost, "+")
        np.testing.assert_allclose(psi, np.exp(1j * np.outer(grid.xs, grid.ks)), atol=1e-15)

    def test_rejects_foreign_grid(self):
        grid = Grid(8.0, 129, 4.0, 32)
        with self.assertRaises(ContractError):
            JostService.solve_jost(PotentialService.make_zero(grid), Grid(8.0, 65, 4.0, 32))


class BarrierJostTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        # dk = 2/3 puts k = 1 on the half-shifted grid
        cls.grid = Grid(8.0, 2049, 8.0 / 3.0, 8)
        cls.barrier = PotentialService.make_barrier(1.0, 1.0, cls.grid)
        cls.jost = JostService.solve_jost(cls.barrier, cls.grid)
        cls.k_one = nearest(cls.grid.ks, 1.0)

    def test_boundary_normalization(self):
        np.testing.assert_allclose(self.jost.m_plus[-1], 1.0, atol=1e-10)
        np.testing.assert_allclose(self.jost.m_minus[0], 1.0, atol=1e-10)
        self.assertLess(self.jost.max_residual, 1e-10)

    def test_exactly_one_beyond_support(self):
        self.assertEqual(self.jost.m_plus[nearest(self.grid.xs, 5.0), self.k_one], 1.0)
        beyond = self.grid.xs > 1.1
        np.testing.assert_array_equal(self.jost.m_plus[beyond], 1.0)

    def test_matches_shooting_oracle(self):
        k = self.grid.ks[self.k_one]
        self.assertAlmostEqual(k, 1.0, places=12)
        oracle = JostService.shooting_oracle(self.barrier, k, -2.0)
        computed = self.jost.m_plus[nearest(self.grid.xs, -2.0), self.k_one]
        self.assertLess(abs(computed - oracle) / abs(oracle), 1e-6)

    def test_oracle_agreement_does_not_depend_on_resolution(self):
        for n_x in (129, 513):
            grid = Grid(8.0, n_x, 8.0 / 3.0, 8)
            barrier = PotentialService.make_barrier(1.0, 1.0, grid)
            jost = JostService.solve_jost(barrier, grid)
            for x in (-2.0, 0.5):
                with self.subTest(n_x=n_x, x=x):
                    oracle = JostService.shooting_oracle(barrier, grid.ks[self.k_one], x)
                    computed = jost.m_plus[nearest(grid.xs, x), self.k_one]
                    self.assertLess(abs(computed - oracle) / abs(oracle), 1e-6)

    def test_closed_form_field(self):
        self.assertTrue(self.jost.closed_form)
        self.assertLess(self.jost.max_residual, 1e-12)
        gaussian = JostService.solve_jost(PotentialService.make_gaussian(1.0, 1.0, self.grid), self.grid)
        self.assertFalse(gaussian.closed_form)

    def test_conjugation_symmetry(self):
        np.testing.assert_allclose(self.jost.m_plus[:, ::-1], np.conj(self.jost.m_plus), atol=1e-10)
        np.testing.assert_allclose(self.jost.m_minus[:, ::-1], np.conj(self.jost.m_minus), atol=1e-10)

    def test_zero_energy_eigenfunction_is_real(self):
        self.assertLess(np.max(np.abs(self.jost.m_plus_zero.imag)), 1e-12)
        self.assertTrue(np.all(self.jost.m_plus_zero.real > 0))


class DerivativeTests(SimpleTestCase):
    def test_k_derivative_matches_differences(self):
        grid = Grid(8.0, 513, 4.0, 256)
        jost = JostService.solve_jost(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        for m, dk, rows in ((jost.m_plus, jost.dk_m_plus, grid.xs >= -1.0), (jost.m_minus, jost.dk_m_minus, grid.xs <= 1.0)):
            differenced = centered_derivative(m[rows], grid.dk)[:, 2:-2]
            exact = dk[rows][:, 2:-2]
            self.assertLess(np.max(np.abs(differenced - exact)) / np.max(np.abs(exact)), 1e-4)

    def test_eigenfunction_residual_is_second_order(self):
        residuals, spacings = [], []
        for n_x in (1025, 2049):
            grid = Grid(8.0, n_x, 2.0, 16)
            gaussian = PotentialService.make_gaussian(1.0, 1.0, grid)
            jost = JostService.solve_jost(gaussian, grid)
            residuals.append(JostService.eigenfunction_residual(jost, gaussian, "+", k_max=2.0))
            spacings.append(grid.dx)
            psi_max = np.max(np.abs(JostService.eigenfunction(jost, "+")))
            self.assertLess(residuals[-1], 5.0 * grid.dx**2 * psi_max)
        self.assertGreater(residuals[0] / residuals[1], 3.0)

    def test_x_derivative_matches_differences(self):
        grid = Grid(8.0, 2049, 2.0, 16)
        jost = JostService.solve_jost(PotentialService.make_gaussian(1.0, 1.0, grid), grid)
        differenced = np.gradient(jost.m_plus, grid.dx, axis=0)
        interior = slice(2, -2)
        self.assertLess(np.max(np.abs(differenced[interior] - jost.dx_m_plus[interior])), 1e-3)
        differenced = np.gradient(jost.m_minus, grid.dx, axis=0)
        self.assertLess(np.max(np.abs(differenced[interior] - jost.dx_m_minus[interior])), 1e-3)


class BoundReportTests(SimpleTestCase):
    def test_zero_potential_reports_zero(self):
        grid = Grid(8.0, 129, 16.0, 64)
        zero = PotentialService.make_zero(grid)
        report = JostService.jost_bound_report(JostService.solve_jost(zero, grid), zero)
        self.assertTrue(all(value == 0.0 for value in report.constants.values()))

    def test_barrier_constants_stable_under_refinement(self):
        grid = Grid(8.0, 257, 16.0, 128)
        reports = []
        for current in (grid, grid.refined()):
            barrier = PotentialService.make_barrier(1.0, 1.0, current)
            reports.append(JostService.jost_bound_report(JostService.solve_jost(barrier, current), barrier))
        for key, coarse in reports[0].constants.items():
            fine = reports[1].constants[key]
            self.assertTrue(np.isfinite(coarse) and coarse > 0)
            self.assertLess(max(coarse, fine) / min(coarse, fine), 2.0)


class ExportTests(SimpleTestCase):
    def test_interleaved_columns(self):
        grid = Grid(8.0, 65, 4.0, 8)
        jost = JostService.solve_jost(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        with tempfile.TemporaryDirectory() as tmp:
            paths = JostService.export_csv(jost, tmp)
            data = np.loadtxt(paths[0], delimiter=",", skiprows=1)
        self.assertEqual(data.shape, (65, 1 + 2 * 8))
        np.testing.assert_array_equal(data[:, 1] + 1j * data[:, 2], jost.m_plus[:, 0])
        self.assertEqual(Path(paths[1]).name, "m_minus.csv")
