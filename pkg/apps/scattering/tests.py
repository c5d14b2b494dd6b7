import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.jost.services import JostService
from apps.potentials.services import PotentialService
from .services import CSV_HEADER, ScatteringService


def scatter(potential, grid):
    jost = JostService.solve_jost(potential, grid)
    return jost, ScatteringService.coefficients(jost, potential)


class ZeroPotentialScatteringTests(SimpleTestCase):
    def test_free_line_is_transparent(self):
        grid = Grid(8.0, 129, 4.0, 32)
        potential = PotentialService.make_zero(grid)
        jost, data = scatter(potential, grid)
        np.testing.assert_allclose(data.T, 1.0, atol=1e-15)
        np.testing.assert_allclose(data.R_plus, 0.0, atol=1e-15)
        np.testing.assert_allclose(data.R_minus, 0.0, atol=1e-15)

        generic, value = ScatteringService.is_generic(jost, potential)
        self.assertFalse(generic)
        self.assertEqual(value, 0)

    def test_zero_height_barrier_is_transparent(self):
        grid = Grid(8.0, 129, 4.0, 32)
        flat = PotentialService.make_barrier(0.0, 1.0, grid)
        jost, data = scatter(flat, grid)
        self.assertFalse(jost.closed_form)
        np.testing.assert_array_equal(data.T, 1.0)
        np.testing.assert_array_equal(data.R_plus, 0.0)
        self.assertFalse(data.generic)


class BarrierScatteringTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(8.0, 2049, 4.0, 64)
        cls.barrier = PotentialService.make_barrier(1.0, 1.0, cls.grid)
        cls.jost, cls.data = scatter(cls.barrier, cls.grid)

    def test_algebraic_identities(self):
        report = ScatteringService.identity_report(self.data)
        for name, defect in report.items():
            with self.subTest(identity=name):
                self.assertLess(defect, 1e-6)

    def test_matches_transfer_matrix(self):
        positive = np.flatnonzero(self.grid.ks > 0)
        reference = ScatteringService.barrier_oracle(1.0, 1.0, self.grid.ks[positive])
        self.assertLess(ScatteringService.oracle_error(self.data, reference, positive), 1e-6)

    def test_closed_form_beats_the_sampled_barrier(self):
        # The same samples through the Volterra sweep carry an O(dx^2) quadrature error
        sampled = PotentialService.make_sampled(self.grid.xs, self.barrier.vs)
        _, data = scatter(sampled, self.grid)
        positive = np.flatnonzero(self.grid.ks > 0)
        reference = ScatteringService.barrier_oracle(1.0, 1.0, self.grid.ks[positive])
        self.assertGreater(ScatteringService.oracle_error(data, reference, positive), 1e-5)

    def test_transfer_matrix_is_unitary(self):
        ks = np.linspace(0.1, 5.0, 50)
        reference = ScatteringService.barrier_oracle(1.0, 1.0, ks)
        np.testing.assert_allclose(np.abs(reference.T) ** 2 + np.abs(reference.R_plus) ** 2, 1.0, atol=1e-12)
        # Symmetric barrier reflects equally from both sides
        np.testing.assert_allclose(reference.R_plus, reference.R_minus, atol=1e-12)

    def test_transfer_matrix_without_barrier(self):
        reference = ScatteringService.barrier_oracle(0.0, 1.0, np.array([0.5, 1.0, 2.0]))
        np.testing.assert_allclose(reference.T, 1.0, atol=1e-13)
        np.testing.assert_allclose(reference.R_plus, 0.0, atol=1e-13)

    def test_barrier_is_generic(self):
        generic, value = ScatteringService.is_generic(self.jost, self.barrier)
        self.assertTrue(generic)
        self.assertGreater(value.real, 0.0)
        self.assertEqual(self.data.T_zero, 0j)
        self.assertEqual(self.data.R_plus_zero, -1 + 0j)

    def test_low_frequency_limits(self):
        smallest = np.argsort(np.abs(self.grid.ks))[:2]
        self.assertLess(np.max(np.abs(self.data.T[smallest])), 0.2)
        np.testing.assert_allclose(self.data.R_plus[smallest].real, -1.0, atol=0.05)

    def test_low_frequency_slope(self):
        alpha, (alpha_plus, alpha_minus) = ScatteringService.low_k_expansion(self.data)
        self.assertGreater(abs(alpha), 0.1)
        # T ~ -2ik / int V m_+(x, 0) dx, which is close to -0.55i for this barrier
        self.assertLess(abs(alpha.real), 0.1 * abs(alpha))
        self.assertIsNone(self.data.alpha_slope)
        self.assertEqual(ScatteringService.with_slopes(self.data).alpha_slope, alpha)

    def test_scattering_matrix_view(self):
        S = self.data.S
        self.assertEqual(S.shape, (self.grid.n_k, 2, 2))
        np.testing.assert_array_equal(S[:, 0, 1], self.data.R_plus)
        np.testing.assert_array_equal(S[:, 1, 1], self.data.T)
        # Unitary per k
        product = S @ np.conj(np.swapaxes(S, 1, 2))
        np.testing.assert_allclose(product, np.broadcast_to(np.eye(2), product.shape), atol=1e-6)

    def test_derivative_bound_is_finite(self):
        bound = ScatteringService.derivative_bound(self.data)
        self.assertTrue(np.isfinite(bound))
        self.assertGreater(bound, 0.0)

    def test_table(self):
        header, rows = ScatteringService.table(self.data)
        self.assertEqual(header, CSV_HEADER)
        self.assertEqual(rows.shape, (self.grid.n_k, 8))
        self.assertLess(np.max(np.abs(rows[:, -1])), 1e-6)


class GaussianScatteringTests(SimpleTestCase):
    def test_identities_for_sampled_potential(self):
        grid = Grid(12.0, 1025, 6.0, 128)
        potential = PotentialService.make_gaussian(2.0, 1.5, grid)
        _, data = scatter(potential, grid)
        for name, defect in ScatteringService.identity_report(data).items():
            with self.subTest(identity=name):
                self.assertLess(defect, 1e-6)


class GenericityTests(SimpleTestCase):
    def test_tiny_barrier_is_borderline_non_generic(self):
        grid = Grid(4.0, 257, 4.0, 32)
        tiny = PotentialService.make_barrier(1e-6, 1e-3, grid)
        jost = JostService.solve_jost(tiny, grid)
        with self.assertLogs("apps.scattering", level="WARNING") as logs:
            generic, value = ScatteringService.is_generic(jost, tiny)
        self.assertFalse(generic)
        self.assertLess(abs(value), 1e-8)
        self.assertIn("borderline", logs.output[0])

    def test_non_generic_data_has_no_slope(self):
        grid = Grid(8.0, 129, 4.0, 32)
        _, data = scatter(PotentialService.make_zero(grid), grid)
        self.assertEqual(data.T_zero.real, 1.0)
        with self.assertRaises(ContractError):
            ScatteringService.low_k_expansion(data)


class DeltaClosedFormTests(SimpleTestCase):
    def test_value_at_unit_frequency(self):
        data = ScatteringService.delta_closed_form(2.0, [1.0])
        self.assertAlmostEqual(data.T[0], (1 - 1j) / 2, places=15)
        self.assertAlmostEqual(abs(data.T[0]) ** 2, 0.5, places=15)

    def test_unitarity_and_transparency(self):
        ks = np.linspace(-50.0, 50.0, 1000)
        data = ScatteringService.delta_closed_form(2.0, ks)
        np.testing.assert_allclose(np.abs(data.T) ** 2 + np.abs(data.R_plus) ** 2, 1.0, atol=1e-14)
        self.assertLess(abs(data.T[-1] - 1.0), 0.05)

    def test_slope(self):
        grid = Grid(1.0, 16, 1.0, 256)
        data = ScatteringService.delta_closed_form(2.0, grid.ks)
        alpha, alpha_pm = ScatteringService.low_k_expansion(data)
        self.assertLess(abs(alpha + 1j), 1e-3)
        self.assertLess(abs(alpha_pm[0] + 1j), 1e-3)

    def test_rejects_non_positive_strength(self):
        with self.assertRaises(ContractError):
            ScatteringService.delta_closed_form(0.0, [1.0])


class DeltaLimitTests(SimpleTestCase):
    def test_thin_barriers_converge_to_delta(self):
        grid = Grid(4.0, 2049, 4.0, 64)
        band = (np.abs(grid.ks) >= 0.5) & (np.abs(grid.ks) <= 4.0)
        delta = ScatteringService.delta_closed_form(2.0, grid.ks[band])

        errors = []
        for epsilon in (0.4, 0.2, 0.1, 0.05):
            _, data = scatter(PotentialService.make_barrier(1.0 / epsilon, epsilon, grid), grid)
            errors.append(float(np.max(np.abs(data.T[band] - delta.T))))

        self.assertTrue(all(a > b for a, b in zip(errors, errors[1:])), errors)
        self.assertLess(errors[-1], 0.05)
