import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.dft.services import DftService
from apps.evolve.models import DataShape, Profile, Sign, SolutionState, Trajectory
from apps.evolve.services import EvolveService
from apps.jost.services import JostService
from apps.potentials.services import PotentialService
from apps.scattering.services import ScatteringService
from .serializers import ModScatReportSerializer
from .services import AsymptoticsService


def build(potential, grid):
    jost = JostService.solve_jost(potential, grid)
    scattering = ScatteringService.coefficients(jost, potential)
    return DftService.build_basis(jost, scattering, grid, potential)


def log_phase_profile(sign=Sign.DEFOCUSING):
    # f~(t, k) = A(k) exp(i sigma/2 |A|^2 log(1+t)); its ODE residual decays like t^-2
    ks = Grid(1.0, 8, 4.0, 16).ks
    ts = np.linspace(0.0, 200.0, 2001)
    amplitude = 0.3 * np.exp(-(ks**2) / 4.0) * (1.0 + 0.2j)
    snapshots = amplitude * np.exp(0.5j * sign * np.abs(amplitude) ** 2 * np.log1p(ts)[:, None])
    return Profile(ts=ts, ks=ks, f_tilde_snapshots=snapshots, sign=sign), amplitude


class ModifiedProfileTests(SimpleTestCase):
    def test_modulus_is_preserved(self):
        profile, _ = log_phase_profile()
        report = AsymptoticsService.modified_profile(profile)
        np.testing.assert_allclose(np.abs(report.w_snapshots), np.abs(profile.f_tilde_snapshots), rtol=1e-13)

    def test_phase_correction_converges(self):
        profile, amplitude = log_phase_profile()
        report = AsymptoticsService.modified_profile(profile)
        self.assertLess(np.max(np.abs(report.W_inf_estimate - amplitude)), 1e-4)
        self.assertTrue(np.all(np.diff(report.ode_residual_norms[report.residual_times >= 20.0]) < 0))
        self.assertGreater(report.fitted_rho, 0.7)
        self.assertLess(report.fitted_rho, 1.2)
        self.assertGreater(report.excluded_low_k, 0)

    def test_linear_profile_is_unchanged(self):
        profile, _ = log_phase_profile(Sign.LINEAR)
        report = AsymptoticsService.modified_profile(profile, ks_probe=[1.25, 2.25])
        np.testing.assert_array_equal(report.w_snapshots, profile.f_tilde_snapshots[:, [10, 12]])
        self.assertEqual(report.ks_probe.size, 2)

    def test_ode_residual_needs_neighbours(self):
        profile, _ = log_phase_profile()
        with self.assertRaises(ContractError):
            AsymptoticsService.ode_residual(profile, 0.0)
        with self.assertRaises(ContractError):
            AsymptoticsService.ode_residual(profile, 200.0)
        residual = AsymptoticsService.ode_residual(profile, 50.0)
        self.assertTrue(np.isnan(residual[profile.ks.size // 2]))
        self.assertLess(np.nanmax(residual), 1e-4)

    def test_cauchy_gaps_on_dyadic_times(self):
        ts = np.arange(0.0, 161.0)
        w = 0.2 + 1.0 / (1.0 + ts[:, None]) * np.ones((1, 4))
        times, gaps = AsymptoticsService.cauchy_gaps(ts, w, t_start=20.0)
        np.testing.assert_array_equal(times, [20.0, 40.0, 80.0, 160.0])
        self.assertTrue(np.all(np.diff(gaps) < 0))

    def test_computed_defocusing_trajectory(self):
        grid = Grid(30.0, 256, 5.0, 128)
        basis = build(PotentialService.make_zero(grid), grid)
        u0 = EvolveService.initial_data(grid, DataShape.GAUSSIAN, 0.1)
        snapshots = np.round(np.geomspace(1.0, 8.0, 25) / 0.05) * 0.05
        trajectory = EvolveService.nls_solve(basis, u0, 8.0, 0.05, Sign.DEFOCUSING, snapshots=snapshots)
        profile = EvolveService.extract_profile(basis, trajectory)
        report = AsymptoticsService.modified_profile(profile, alpha=0.05)

        self.assertEqual(report.w_snapshots.shape, (profile.ts.size, grid.n_k))
        np.testing.assert_allclose(np.abs(report.w_snapshots), np.abs(profile.f_tilde_snapshots), rtol=1e-12, atol=1e-15)
        self.assertEqual(report.sign, Sign.DEFOCUSING)
        self.assertGreater(report.residual_times.size, 0)
        self.assertTrue(np.all(np.isfinite(report.ode_residual_norms)))
        # Ends before the fit window opens
        self.assertTrue(np.isnan(report.fitted_rho))
        self.assertEqual(report.cauchy_gaps.size, 0)

    def test_report_serializer(self):
        profile, _ = log_phase_profile()
        report = AsymptoticsService.modified_profile(profile)
        data = ModScatReportSerializer(report, context={"profile": profile}).data
        self.assertEqual(len(data["W_inf_estimate"]["re"]), profile.ks.size)
        self.assertLess(data["modulus_defect"], 1e-14)
        self.assertEqual(data["sign"], Sign.DEFOCUSING)


class PhysicalCompareTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(100.0, 512, 3.0, 256)
        cls.basis = build(PotentialService.make_zero(cls.grid), cls.grid)
        u0 = np.exp(-(cls.grid.xs**2) / 8.0).astype(complex)
        states = [SolutionState(t=t, u=EvolveService.linear_evolve(cls.basis, u0, t), sign=Sign.LINEAR) for t in (0.0, 10.0, 20.0)]
        cls.trajectory = Trajectory(states=states)
        cls.profile = EvolveService.extract_profile(cls.basis, cls.trajectory)

    def test_linear_form_improves_in_time(self):
        early = AsymptoticsService.physical_compare(self.profile, self.trajectory, self.grid, 10.0)
        late = AsymptoticsService.physical_compare(self.profile, self.trajectory, self.grid, 20.0)
        self.assertLess(late["lin_err"], 0.7 * early["lin_err"])
        self.assertLess(early["lin_err"], 0.2 * np.max(np.abs(self.profile.at(10.0))))
        self.assertGreater(early["excluded"], 0)

    def test_modified_form_with_linear_report(self):
        report = AsymptoticsService.modified_profile(self.profile)
        result = AsymptoticsService.physical_compare(self.profile, self.trajectory, self.grid, 20.0, report)
        self.assertAlmostEqual(result["mod_err"], result["lin_err"], places=6)

    def test_early_times_are_rejected(self):
        with self.assertRaises(ContractError):
            AsymptoticsService.physical_compare(self.profile, self.trajectory, self.grid, 5.0)


class NegativeTimeMapTests(SimpleTestCase):
    def data(self, grid):
        return np.exp(-((grid.xs - 1.0) ** 2) + 0.5j * grid.xs)

    def test_free_line(self):
        grid = Grid(20.0, 513, 8.0, 256)
        basis = build(PotentialService.make_zero(grid), grid)
        self.assertLess(AsymptoticsService.negative_time_map(basis, self.data(grid)), 1e-10)

    def test_barrier(self):
        grid = Grid(20.0, 1025, 8.0, 256)
        basis = build(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        f = self.data(grid)
        self.assertLess(AsymptoticsService.negative_time_map(basis, f), 1e-3)
        conj_norm = np.linalg.norm(DftService.forward(basis, np.conj(f)))
        self.assertAlmostEqual(conj_norm / np.linalg.norm(DftService.forward(basis, f)), 1.0, delta=1e-3)


class StationaryPhaseTests(SimpleTestCase):
    @staticmethod
    def g(q):
        return 0.5 * np.exp(-((q - 1.0) ** 2))

    def discrepancy(self, t):
        leading, quadrature = AsymptoticsService.stationary_phase_oracle(self.g, t, 1.0)
        return abs(quadrature - leading) / abs(leading)

    def test_leading_term_at_large_time(self):
        leading, _ = AsymptoticsService.stationary_phase_oracle(self.g, 400.0, 1.0)
        self.assertAlmostEqual(leading, 1j * np.sqrt(np.pi / 2.0) * 0.5, places=12)
        self.assertLess(self.discrepancy(400.0), 0.15)

    def test_discrepancy_shrinks(self):
        self.assertLess(self.discrepancy(100.0), self.discrepancy(25.0))

    def test_reflection(self):
        def even(q):
            return 0.5 * np.exp(-((q**2 - 1.0) ** 2))

        lead_plus, quad_plus = AsymptoticsService.stationary_phase_oracle(even, 50.0, 1.0)
        lead_minus, quad_minus = AsymptoticsService.stationary_phase_oracle(even, 50.0, -1.0)
        self.assertEqual(lead_minus, -lead_plus)
        self.assertLess(abs(quad_minus + quad_plus), 1e-6 * abs(quad_plus))

    def test_low_frequency_is_rejected(self):
        with self.assertRaises(ContractError):
            AsymptoticsService.stationary_phase_oracle(self.g, 400.0, 0.01)


class BoundChecksTests(SimpleTestCase):
    def test_profile_and_decay_bounds(self):
        profile, _ = log_phase_profile()
        value, ok = AsymptoticsService.profile_sup_bound(profile, 0.1)
        self.assertAlmostEqual(value, 0.3 * abs(1.0 + 0.2j) * np.exp(-(profile.ks[8] ** 2) / 4.0), places=12)
        self.assertFalse(ok)

        xs = np.linspace(-10.0, 10.0, 11)
        states = [SolutionState(t=t, u=np.full(xs.size, 0.1 / np.sqrt(1.0 + t))) for t in (0.0, 1.0, 50.0, 300.0)]
        value, ok = AsymptoticsService.decay_bound_check(Trajectory(states=states), 0.1)
        self.assertAlmostEqual(value, 0.1, places=12)
        self.assertTrue(ok)
