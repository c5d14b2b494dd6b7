import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError, NumericalFailure
from apps.core.grid import Grid
from apps.core.quadrature import l2_norm
from apps.dft.services import DftDiagnostics, DftService
from apps.jost.services import JostService
from apps.potentials.services import PotentialService
from apps.scattering.services import ScatteringService
from .models import DataShape, Sign, SolutionState
from .services import EvolveService, free_gaussian

GRID = Grid(60.0, 512, 5.0, 256)
BARRIER_GRID = Grid(40.0, 1024, 5.0, 256)


def build(potential, grid=GRID):
    jost = JostService.solve_jost(potential, grid)
    scattering = ScatteringService.coefficients(jost, potential)
    return DftService.build_basis(jost, scattering, grid, potential)


class InitialDataTests(SimpleTestCase):
    def test_normalization(self):
        for shape in (DataShape.GAUSSIAN, DataShape.ODD_GAUSSIAN):
            with self.subTest(shape=shape):
                u0 = EvolveService.initial_data(GRID, shape, 0.08, width=2.0)
                self.assertAlmostEqual(EvolveService.h11_norm(u0, GRID), 0.08, places=12)

    def test_odd_shape_is_odd(self):
        u0 = EvolveService.initial_data(GRID, DataShape.ODD_GAUSSIAN, 0.1)
        np.testing.assert_allclose(u0[::-1], -u0, atol=1e-15)

    def test_zero_and_unknown_shapes(self):
        np.testing.assert_array_equal(EvolveService.initial_data(GRID, DataShape.ZERO, 0.1), 0.0)
        with self.assertRaises(ContractError):
            EvolveService.initial_data(GRID, "square", 0.1)


class FreeFlowTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.potential = PotentialService.make_zero(GRID)
        cls.basis = build(cls.potential)

    def test_linear_flow_matches_free_gaussian(self):
        u0 = free_gaussian(GRID.xs, 0.0)
        for t in (0.5, 2.0):
            with self.subTest(t=t):
                computed = EvolveService.linear_evolve(self.basis, u0, t)
                exact = free_gaussian(GRID.xs, t)
                self.assertLess(l2_norm(computed - exact, GRID.dx) / l2_norm(exact, GRID.dx), 1e-4)

    def test_group_law_and_unitarity(self):
        u0 = free_gaussian(GRID.xs, 0.0)
        twice = EvolveService.linear_evolve(self.basis, EvolveService.linear_evolve(self.basis, u0, 1.0), 1.5)
        once = EvolveService.linear_evolve(self.basis, u0, 2.5)
        self.assertLess(l2_norm(twice - once, GRID.dx), 1e-5)
        self.assertAlmostEqual(l2_norm(once, GRID.dx) / l2_norm(u0, GRID.dx), 1.0, delta=1e-3)

    def test_zero_data_stays_zero(self):
        trajectory = EvolveService.nls_solve(self.basis, np.zeros(GRID.n_x), 1.0, 0.1, Sign.DEFOCUSING)
        for state in trajectory.states:
            np.testing.assert_array_equal(state.u, 0.0)
        self.assertEqual(trajectory.series[-1][1:], (0.0, 0.0))

    def test_conservation(self):
        u0 = EvolveService.initial_data(GRID, DataShape.GAUSSIAN, 0.05, width=2.0)
        trajectory = EvolveService.nls_solve(self.basis, u0, 10.0, 0.02, Sign.DEFOCUSING, snapshots=[5.0])
        drift = EvolveService.conservation_drift(trajectory)
        self.assertLess(drift["mass"], 1e-10)
        self.assertLess(drift["energy"], 1e-4)
        np.testing.assert_allclose(trajectory.ts, [0.0, 5.0, 10.0], atol=1e-12)

    def test_gauge_step_preserves_modulus(self):
        u = EvolveService.initial_data(GRID, DataShape.GAUSSIAN, 1.0)
        a = 1.0 + 0.5 * np.tanh(GRID.xs)
        rotated = EvolveService.nonlinear_substep(u, Sign.FOCUSING, 0.3, a)
        np.testing.assert_allclose(np.abs(rotated), np.abs(u), rtol=1e-15, atol=0.0)

    def test_invariants_of_gaussian(self):
        amplitude = 0.3
        state = SolutionState(t=0.0, u=amplitude * free_gaussian(GRID.xs, 0.0), sign=Sign.DEFOCUSING)
        mass, energy = EvolveService.invariants_MH(state, self.potential, GRID)
        self.assertAlmostEqual(mass, amplitude**2 * np.sqrt(np.pi), places=8)
        # int |u'|^2 = A^2 sqrt(pi)/2 and int |u|^4 = A^4 sqrt(pi/2)
        expected = amplitude**2 * np.sqrt(np.pi) / 2.0 + 0.5 * amplitude**4 * np.sqrt(np.pi / 2.0)
        self.assertAlmostEqual(energy, expected, places=8)
        self.assertEqual(EvolveService.invariants_MH(SolutionState(0.0, np.zeros(GRID.n_x)), self.potential, GRID), (0.0, 0.0))

    def test_rejects_bad_step(self):
        with self.assertRaises(ContractError):
            EvolveService.nls_solve(self.basis, np.zeros(GRID.n_x), 1.0, 0.0)


class BarrierFlowTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.potential = PotentialService.make_barrier(1.0, 1.0, BARRIER_GRID)
        cls.basis = build(cls.potential, BARRIER_GRID)
        cls.u0 = EvolveService.initial_data(BARRIER_GRID, DataShape.GAUSSIAN, 1.0)

    def final(self, dt, t_end=1.0):
        return EvolveService.nls_solve(self.basis, self.u0, t_end, dt, Sign.DEFOCUSING).states[-1].u

    def test_splitting_is_second_order(self):
        reference = self.final(0.0125)
        coarse = l2_norm(self.final(0.1) - reference, BARRIER_GRID.dx)
        fine = l2_norm(self.final(0.05) - reference, BARRIER_GRID.dx)
        self.assertGreater(coarse / fine, 3.0)
        self.assertLess(coarse / fine, 5.0)

    def test_self_convergence_order(self):
        order = EvolveService.splitting_order(self.basis, self.u0, 1.0, 0.1, Sign.DEFOCUSING)
        self.assertLess(abs(order - 2.0), 0.5)
        zero = EvolveService.splitting_order(self.basis, np.zeros(BARRIER_GRID.n_x), 1.0, 0.1, Sign.DEFOCUSING)
        self.assertTrue(np.isnan(zero))

    def test_modes_outside_the_basis_carry_no_mass(self):
        # The step leaves modes outside the span of K unchanged, so the data must not reach them
        dx = BARRIER_GRID.dx
        norm = l2_norm(self.u0, dx)
        self.assertLess(DftDiagnostics.round_trip_error(self.basis, self.u0), 1e-3)
        stepped = EvolveService.propagator(self.basis, 0.5) @ self.u0
        flowed = EvolveService.linear_evolve(self.basis, self.u0, 0.5)
        self.assertLess(l2_norm(stepped - flowed, dx) / norm, 1e-3)
        self.assertAlmostEqual(l2_norm(stepped, dx) / norm, 1.0, places=12)

    def test_time_reversal(self):
        error = EvolveService.time_reversal_error(self.basis, self.u0, 2.0, 0.05, Sign.DEFOCUSING)
        self.assertLess(error, 1e-8)

    def test_linear_profile_is_frozen(self):
        u0 = EvolveService.initial_data(BARRIER_GRID, DataShape.GAUSSIAN, 0.1, width=2.0)
        trajectory = EvolveService.nls_solve(self.basis, u0, 4.0, 0.1, Sign.LINEAR, snapshots=[1.0, 2.0])
        profile = EvolveService.extract_profile(self.basis, trajectory)
        self.assertEqual(profile.f_tilde_snapshots.shape, (4, BARRIER_GRID.n_k))
        drift = np.max(np.abs(profile.f_tilde_snapshots - profile.f_tilde_snapshots[0]))
        self.assertLess(drift, 1e-3 * np.max(np.abs(profile.f_tilde_snapshots[0])))
        self.assertIs(trajectory.states[1].f_tilde, profile.f_tilde_snapshots[1])

    def test_blowup_guard(self):
        evolution = {**settings.SPECTRAL_LAB["EVOLUTION"], "BLOWUP_FACTOR": 0.5}
        with self.settings(SPECTRAL_LAB={**settings.SPECTRAL_LAB, "EVOLUTION": evolution}):
            with self.assertRaises(NumericalFailure):
                EvolveService.nls_solve(self.basis, self.u0, 0.2, 0.1, Sign.DEFOCUSING)
