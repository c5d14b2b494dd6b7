import math

import numpy as np
from django.test import SimpleTestCase

from .exceptions import ConfigError, ContractError, GuardError, LabError, NumericalFailure
from .grid import Grid
from .quadrature import centered_derivative, integrate, japanese, l2_norm, spectral_derivative, tail_from_left, tail_from_right, trapezoid_weights
from .serializers import ComplexArrayField, RealArrayField


class GridTests(SimpleTestCase):
    def test_k_grid_is_symmetric_without_zero(self):
        grid = Grid(10.0, 129, 4.0, 32)
        np.testing.assert_allclose(grid.mirror(grid.ks), -grid.ks, atol=1e-14)
        self.assertGreater(np.min(np.abs(grid.ks)), 0.0)
        self.assertAlmostEqual(grid.ks[grid.n_k // 2], 0.5 * grid.dk, places=14)
        self.assertAlmostEqual(grid.dx, 20.0 / 128)

    def test_refined_keeps_the_box(self):
        grid = Grid(10.0, 129, 4.0, 32)
        fine = grid.refined()
        self.assertEqual(fine, Grid(10.0, 257, 4.0, 64))
        self.assertAlmostEqual(fine.dx, grid.dx / 2)
        np.testing.assert_allclose(fine.xs[::2], grid.xs, atol=1e-13)

    def test_rejects_bad_sizes(self):
        for args in ((0.0, 16, 1.0, 8), (1.0, 4, 1.0, 8), (1.0, 16, 1.0, 9), (1.0, 16, -1.0, 8)):
            with self.subTest(args=args):
                with self.assertRaises(ContractError):
                    Grid(*args)

    def test_require_same(self):
        grid = Grid(10.0, 129, 4.0, 32)
        grid.require_same(Grid(10.0, 129, 4.0, 32))
        with self.assertRaises(ContractError):
            grid.require_same(grid.refined(), "basis and data")
        self.assertTrue(grid.matches_xs(np.linspace(-10.0, 10.0, 129)))
        self.assertFalse(grid.matches_xs(np.linspace(-10.0, 10.0, 128)))


class QuadratureTests(SimpleTestCase):
    def test_trapezoid(self):
        weights = trapezoid_weights(11, 0.1)
        self.assertAlmostEqual(weights.sum(), 1.0, places=14)
        xs = np.linspace(0.0, 1.0, 11)
        self.assertAlmostEqual(integrate(3.0 * xs + 1.0, xs), 2.5, places=14)

    def test_tails_add_up_to_the_integral(self):
        xs = np.linspace(-5.0, 5.0, 201)
        values = np.exp(-(xs**2))
        total = integrate(values, xs)
        np.testing.assert_allclose(tail_from_left(values, xs) + tail_from_right(values, xs), total, rtol=1e-13)
        self.assertEqual(tail_from_left(values, xs)[0], 0.0)
        self.assertAlmostEqual(tail_from_right(values, xs)[-1], 0.0, places=15)

    def test_derivatives(self):
        xs = np.linspace(-20.0, 20.0, 513)
        h = xs[1] - xs[0]
        u = np.exp(-(xs**2)).astype(complex)
        np.testing.assert_allclose(spectral_derivative(u, h), -2.0 * xs * u, atol=1e-8)

        xs = np.linspace(0.0, 1.0, 101)
        values = np.sin(xs)
        np.testing.assert_allclose(centered_derivative(values, xs[1] - xs[0])[2:-2], np.cos(xs)[2:-2], atol=1e-8)

    def test_norms_and_weights(self):
        self.assertAlmostEqual(l2_norm(np.ones(16), 0.25), 2.0, places=14)
        np.testing.assert_allclose(japanese([0.0, 1.0]), [1.0, math.sqrt(2.0)])


class ExceptionTests(SimpleTestCase):
    def test_exit_codes(self):
        self.assertEqual(LabError("io").exit_code, 1)
        self.assertEqual(ConfigError("bad", field_path="grid.n_x").exit_code, 2)
        self.assertEqual(ContractError("bad").exit_code, 3)
        self.assertEqual(NumericalFailure("diverged", metric=1.0).exit_code, 4)

    def test_messages_carry_their_data(self):
        error = ConfigError("Must be positive.", field_path="evolution.dt")
        self.assertEqual(str(error), "evolution.dt: Must be positive.")
        guard = GuardError(-0.5, 12)
        self.assertIsInstance(guard, ContractError)
        self.assertEqual(guard.index, 12)
        self.assertIn("allow_signed", str(guard))
        self.assertIn("metric = 2.000e-03", str(NumericalFailure("Residual too large", metric=2e-3)))


class ArrayFieldTests(SimpleTestCase):
    def test_representations(self):
        self.assertEqual(RealArrayField().to_representation(np.array([[1.0, 2.0]])), [1.0, 2.0])
        self.assertTrue(math.isnan(RealArrayField().to_representation(np.array([np.nan]))[0]))
        self.assertEqual(ComplexArrayField().to_representation(np.array([1.0 - 2.0j])), {"re": [1.0], "im": [-2.0]})
