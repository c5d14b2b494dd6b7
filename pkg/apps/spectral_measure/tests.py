import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.dft.services import DftService
from apps.evolve.models import Sign
from apps.evolve.services import EvolveService
from apps.jost.services import JostService
from apps.potentials.services import PotentialService
from apps.scattering.services import ScatteringService
from .models import BKind, Side, TrilinearSpec
from .services import SpectralMeasureService, TrilinearForms, frequency_lattice


def build(potential, grid):
    jost = JostService.solve_jost(potential, grid)
    scattering = ScatteringService.coefficients(jost, potential)
    return DftService.build_basis(jost, scattering, grid, potential)


def packets(ks):
    # Vanish at k = 0, where the singular coefficients jump
    return (
        ks * np.exp(-((ks - 1.0) ** 2)),
        (1.0 + 0.5j) * ks * np.exp(-((ks + 0.5) ** 2)),
        ks * np.exp(-(ks**2)),
    )


def gaussians(ks):
    return np.exp(-(ks**2)), np.exp(-((ks - 0.5) ** 2)), (1.0 + 0.5j) * np.exp(-((ks + 0.3) ** 2))


def relative(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


class TrilinearSpecTests(SimpleTestCase):
    def test_validation(self):
        with self.assertRaises(ContractError):
            TrilinearSpec(epsilons=(1, 0, 1))
        with self.assertRaises(ContractError):
            TrilinearSpec(b_kind="box")
        self.assertFalse(TrilinearSpec(b_kind=BKind.PV).is_smooth)

    def test_lattice_requires_symmetric_grid(self):
        p, dk, c0 = frequency_lattice(Grid(1.0, 8, 2.0, 16).ks)
        self.assertEqual(p[c0], 0.0)
        self.assertEqual(p.size, 4 * 16 - 3)
        with self.assertRaises(ContractError):
            frequency_lattice(np.linspace(0.1, 2.0, 16))


class DirectActionTests(SimpleTestCase):
    def test_flat_action_matches_triple_sum(self):
        grid = Grid(10.0, 129, 4.0, 32)
        basis = build(PotentialService.make_zero(grid), grid)
        g1, g2, g3 = gaussians(grid.ks)
        for t in (0.0, 0.7):
            with self.subTest(t=t):
                direct = SpectralMeasureService.trilinear_direct(basis, g1, g2, g3, t)
                brute = SpectralMeasureService.brute_force_flat(grid, g1, g2, g3, t)
                self.assertLess(relative(direct, brute), 1e-10)

    def test_brute_force_is_limited_to_small_grids(self):
        grid = Grid(10.0, 129, 4.0, 64)
        with self.assertRaises(ContractError):
            SpectralMeasureService.brute_force_flat(grid, *gaussians(grid.ks), 0.0)

    def test_zero_input_gives_zero(self):
        grid = Grid(10.0, 129, 4.0, 32)
        basis = build(PotentialService.make_barrier(1.0, 1.0, grid), grid)
        g1, _, g3 = gaussians(grid.ks)
        out = SpectralMeasureService.trilinear_direct(basis, g1, np.zeros(grid.n_k), g3, 1.0)
        np.testing.assert_array_equal(out, 0.0)


class DecompositionTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.grid = Grid(20.0, 1025, 8.0, 256)
        cls.barrier = build(PotentialService.make_barrier(1.0, 1.0, cls.grid), cls.grid)
        cls.free = build(PotentialService.make_zero(cls.grid), cls.grid)
        cls.g = packets(cls.grid.ks)
        cls.t = 0.5

    def test_lattice_assembly_matches_physical_pairing(self):
        for name, basis in (("barrier", self.barrier), ("free", self.free)):
            for side in Side.CHOICES:
                with self.subTest(potential=name, side=side):
                    lattice = SpectralMeasureService.singular_action(basis, *self.g, self.t, side)
                    physical = SpectralMeasureService.singular_action_physical(basis, *self.g, self.t, side)
                    self.assertLess(relative(lattice, physical), 1e-3)

    def test_closure(self):
        direct = SpectralMeasureService.trilinear_direct(self.barrier, *self.g, self.t)
        regular = SpectralMeasureService.regular_action(self.barrier, *self.g, self.t)
        plus = SpectralMeasureService.singular_action(self.barrier, *self.g, self.t, Side.PLUS)
        minus = SpectralMeasureService.singular_action(self.barrier, *self.g, self.t, Side.MINUS)
        self.assertLess(relative(plus + minus + regular, direct), 2e-3)

    def test_regular_block_completes_the_physical_split(self):
        direct = SpectralMeasureService.trilinear_direct(self.barrier, *self.g, self.t)
        regular = SpectralMeasureService.regular_action(self.barrier, *self.g, self.t)
        diagonal = sum(SpectralMeasureService.singular_action_physical(self.barrier, *self.g, self.t, side) for side in Side.CHOICES)
        self.assertLess(relative(diagonal + regular, direct), 1e-9)

    def test_regular_components_add_up(self):
        regular = SpectralMeasureService.regular_action(self.barrier, *self.g, self.t)
        parts = SpectralMeasureService.regular_components(self.barrier, *self.g, self.t)
        direct = SpectralMeasureService.trilinear_direct(self.barrier, *self.g, self.t)
        self.assertLess(np.max(np.abs(parts["K_R"] + parts["cross_cutoff"] - regular)), 1e-6 * np.max(np.abs(direct)))
        self.assertGreater(np.max(np.abs(parts["K_R"])), 1e-3 * np.max(np.abs(direct)))

    def test_free_regular_part_is_the_cross_cutoff_layer(self):
        parts = SpectralMeasureService.regular_components(self.free, *self.g, self.t)
        direct = SpectralMeasureService.trilinear_direct(self.free, *self.g, self.t)
        np.testing.assert_array_equal(parts["K_R"], 0.0)
        # chi_+^4 + chi_-^4 != 1 on |x| < 2, so this layer does not vanish
        self.assertGreater(np.max(np.abs(parts["cross_cutoff"])), 1e-3 * np.max(np.abs(direct)))

    def test_unknown_side(self):
        with self.assertRaises(ContractError):
            SpectralMeasureService.singular_action(self.free, *self.g, self.t, "0")


class RegularDecayGapTests(SimpleTestCase):
    def test_regular_part_decays_faster(self):
        # Box and frequency spacing keep the packets and their aliases apart up to t = 100
        grid = Grid(400.0, 1601, 4.0, 1024)
        basis = build(PotentialService.make_zero(grid), grid)
        decay = SpectralMeasureService.regular_decay_gap(basis, *packets(grid.ks))
        np.testing.assert_allclose(decay["times"][[0, -1]], [10.0, 100.0])
        self.assertGreater(decay["direct_exponent"], 0.5)
        self.assertGreaterEqual(decay["gap"], 0.2)

    def test_zero_sample_has_no_exponent(self):
        grid = Grid(10.0, 129, 4.0, 32)
        basis = build(PotentialService.make_zero(grid), grid)
        g1, _, g3 = gaussians(grid.ks)
        decay = SpectralMeasureService.regular_decay_gap(basis, g1, np.zeros(grid.n_k), g3, times=[1.0, 2.0])
        self.assertTrue(np.isnan(decay["gap"]))


class CommutatorIdentityTests(SimpleTestCase):
    def residual(self, n_k, spec):
        ks = Grid(1.0, 8, 8.0, n_k).ks
        return TrilinearForms.commutator_residual(spec, ks, *gaussians(ks))

    def test_identity_holds(self):
        for epsilons in ((1, 1, 1), (-1, 1, -1), (1, -1, 1)):
            with self.subTest(epsilons=epsilons):
                self.assertLess(self.residual(512, TrilinearSpec(epsilons, BKind.GAUSSIAN, 1.0)), 1e-3)

    def test_time_zero_collapse(self):
        for kind in (BKind.GAUSSIAN, BKind.ZETA):
            with self.subTest(kind=kind):
                self.assertLess(self.residual(512, TrilinearSpec((1, 1, 1), kind, 0.0)), 1e-3)

    def test_refinement(self):
        spec = TrilinearSpec((1, 1, 1), BKind.GAUSSIAN, 1.0)
        self.assertGreater(self.residual(256, spec) / self.residual(512, spec), 4.0)

    def test_singular_kernels_are_rejected(self):
        with self.assertRaises(ContractError):
            self.residual(64, TrilinearSpec(b_kind=BKind.DELTA))


class InverseTransformIdentityTests(SimpleTestCase):
    def setUp(self):
        self.ks = Grid(1.0, 8, 8.0, 256).ks

    def test_identity_holds(self):
        for epsilons in ((1, 1, 1), (-1, 1, 1), (1, -1, -1)):
            with self.subTest(epsilons=epsilons):
                spec = TrilinearSpec(epsilons, BKind.GAUSSIAN, 0.5)
                self.assertLess(TrilinearForms.inverse_fd_map(spec, self.ks, *gaussians(self.ks)), 1e-4)

    def test_zero_input(self):
        f1, f2, _ = gaussians(self.ks)
        spec = TrilinearSpec((1, 1, 1), BKind.GAUSSIAN, 0.5)
        self.assertEqual(TrilinearForms.inverse_fd_map(spec, self.ks, f1, f2, np.zeros(self.ks.size)), 0.0)

    def test_pv_kernel_is_rejected(self):
        with self.assertRaises(ContractError):
            TrilinearForms.inverse_fd_map(TrilinearSpec(b_kind=BKind.PV), self.ks, *gaussians(self.ks))


class DuhamelStepTests(SimpleTestCase):
    def test_euler_step_matches_split_flow_to_second_order(self):
        grid = Grid(30.0, 256, 6.0, 128)
        basis = build(PotentialService.make_zero(grid), grid)
        u0 = 0.5 * np.exp(-(grid.xs**2) / 2.0).astype(complex)
        f0 = DftService.forward(basis, u0)

        def error(dt):
            u1 = EvolveService.nls_solve(basis, u0, dt, dt, Sign.DEFOCUSING).states[-1].u
            f1 = np.exp(-1j * dt * grid.ks**2) * DftService.forward(basis, u1)
            return np.max(np.abs(f1 - SpectralMeasureService.duhamel_step(basis, f0, 0.0, dt, Sign.DEFOCUSING)))

        ratio = error(0.02) / error(0.01)
        self.assertGreater(ratio, 3.0)
        self.assertLess(ratio, 5.0)
