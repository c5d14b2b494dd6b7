import logging

import numpy as np
from django.conf import settings

from apps.core.exceptions import ContractError, NumericalFailure
from apps.core.grid import Grid
from apps.core.quadrature import japanese, l2_norm, spectral_derivative
from apps.dft.models import DistortedBasis
from apps.dft.services import DftService
from apps.potentials.models import Potential
from apps.potentials.services import PotentialService
from .models import DataShape, Profile, SolutionState, Trajectory

logger = logging.getLogger(__name__)

SERIES_POINTS = 200
SPLITTING_FLOOR = 1e-12


def free_gaussian(xs, t: float) -> np.ndarray:
    """e^{itH} e^{-x^2/2} for V = 0: (1 - 2it)^{-1/2} exp(-x^2 / (2 (1 - 2it)))"""
    spread = 1.0 - 2j * t
    return np.exp(-(np.asarray(xs) ** 2) / (2.0 * spread)) / np.sqrt(spread)


class EvolveService:
    """
    Linear flow e^{itH} through the distorted multiplier and the cubic NLS by Strang splitting
    """

    @staticmethod
    def h11_norm(u, grid: Grid) -> float:
        """||<x> u||_{L^2} + ||u'||_{L^2}"""
        return l2_norm(japanese(grid.xs) * u, grid.dx) + l2_norm(spectral_derivative(u, grid.dx), grid.dx)

    @staticmethod
    def initial_data(grid: Grid, shape: str, eta: float, width: float = 1.0) -> np.ndarray:
        """
        Gaussian or odd Gaussian data scaled to ||u0||_{H^{1,1}} = eta

        Raises:
            ContractError: For an unknown shape or a non-positive width
        """
        if shape not in DataShape.CHOICES:
            raise ContractError(f"Unknown data shape {shape!r}, expected one of {DataShape.CHOICES}")
        if width <= 0:
            raise ContractError(f"Data width must be positive, got {width}")

        xs = grid.xs
        if shape == DataShape.ZERO or eta == 0:
            return np.zeros(grid.n_x, dtype=complex)
        profile = np.exp(-(xs**2) / (2.0 * width**2)).astype(complex)
        if shape == DataShape.ODD_GAUSSIAN:
            profile = profile * xs / width
        return eta * profile / EvolveService.h11_norm(profile, grid)

    @staticmethod
    def linear_evolve(basis: DistortedBasis, f0, t: float) -> np.ndarray:
        """e^{itH} f0 = F~^{-1} e^{ik^2 t} F~ f0"""
        return DftService.multiplier(basis, np.exp(1j * basis.grid.ks**2 * t), f0)

    @staticmethod
    def propagator(basis: DistortedBasis, dt: float) -> np.ndarray:
        """
        Exactly unitary step exp(i dt H_q) of the discrete generator

        H_q = Q diag(k^2) Q^H with Q = K sqrt(dx dk) is Hermitian; on band-limited data
        it acts as the distorted multiplier k^2.
        """
        grid = basis.grid
        Q = basis.K * np.sqrt(grid.dx * grid.dk)
        generator = (Q * grid.ks**2) @ Q.conj().T
        # The k and -k columns pair into the real kernel of a real operator
        generator = 0.5 * (generator + generator.T).real
        values, vectors = np.linalg.eigh(generator)
        return (vectors * np.exp(1j * dt * values)) @ vectors.conj().T

    @staticmethod
    def nonlinear_substep(u, sign: int, tau: float, a_coeff_nl=None) -> np.ndarray:
        """Exact flow of i u_t + sigma a |u|^2 u = 0 over tau; |u| is unchanged."""
        weight = np.abs(u) ** 2 if a_coeff_nl is None else a_coeff_nl * np.abs(u) ** 2
        return u * np.exp(1j * sign * tau * weight)

    @staticmethod
    def nls_solve(
        basis: DistortedBasis,
        u0,
        t_end: float,
        dt: float,
        sign: int = 1,
        a_coeff_nl=None,
        snapshots=None,
    ) -> Trajectory:
        """
        Strang splitting for i u_t - u_xx + V u + sigma a(x) |u|^2 u = 0

        Args:
            basis: Distorted basis of H (its potential enters the energy)
            u0: Initial data on the x-grid
            t_end: Final time
            dt: Step; snapshot times are rounded to multiples of dt
            sign: +1 defocusing, -1 focusing
            a_coeff_nl: Optional coefficient a(x) of the nonlinearity
            snapshots: Times to keep; 0 and t_end are always kept

        Returns:
            Trajectory with snapshot states and (t, M, H) series

        Raises:
            ContractError: If dt <= 0 or t_end < 0
            NumericalFailure: If sup|u| exceeds the blow-up factor times its initial value
        """
        if dt <= 0:
            raise ContractError(f"Time step must be positive, got {dt}")
        if t_end < 0:
            raise ContractError(f"Final time must be non-negative, got {t_end}")

        grid = basis.grid
        potential = basis.potential if basis.potential is not None else PotentialService.make_zero(grid)
        u = np.asarray(u0, dtype=complex).copy()
        if u.shape != (grid.n_x,):
            raise ContractError(f"Initial data must have {grid.n_x} samples, got {u.shape}")

        steps = int(round(t_end / dt))
        keep = {0, steps}
        for t in snapshots if snapshots is not None else ():
            if 0 <= t <= t_end:
                keep.add(int(round(t / dt)))
        series_every = max(1, steps // SERIES_POINTS)

        blowup = settings.SPECTRAL_LAB["EVOLUTION"]["BLOWUP_FACTOR"] * float(np.max(np.abs(u)))
        logger.info(f"NLS run: {steps} steps of {dt:g}, sign {sign:+d}, {len(keep)} snapshots")

        step_matrix = EvolveService.propagator(basis, dt) if steps else None
        trajectory = Trajectory(dt=dt, steps=steps)
        for n in range(steps + 1):
            t = n * dt
            if n in keep:
                trajectory.states.append(SolutionState(t=t, u=u.copy(), sign=sign, a_coeff_nl=a_coeff_nl))
            if n % series_every == 0 or n == steps:
                state = SolutionState(t=t, u=u, sign=sign, a_coeff_nl=a_coeff_nl)
                trajectory.series.append((t, *EvolveService.invariants_MH(state, potential, grid)))
            if n == steps:
                break

            u = EvolveService.nonlinear_substep(u, sign, 0.5 * dt, a_coeff_nl)
            u = step_matrix @ u
            u = EvolveService.nonlinear_substep(u, sign, 0.5 * dt, a_coeff_nl)

            sup = float(np.max(np.abs(u)))
            if blowup > 0 and (sup > blowup or not np.isfinite(sup)):
                logger.error(f"Blow-up guard tripped at t={t + dt:g}: sup|u| = {sup:.3e}")
                raise NumericalFailure(f"Solution left the small-data regime at t={t + dt:g}", metric=sup)

        fraction = EvolveService.boundary_mass_fraction(u, grid)
        if fraction > settings.SPECTRAL_LAB["EVOLUTION"]["BOUNDARY_MASS_FRACTION"]:
            logger.warning(f"{fraction:.2e} of the mass sits in the outer 5% of the box at t={steps * dt:g}")
        return trajectory

    @staticmethod
    def invariants_MH(state: SolutionState, potential: Potential, grid: Grid) -> tuple:
        """
        M(u) = int |u|^2 and H(u) = int |u_x|^2 + V |u|^2 + (sigma/2) a |u|^4

        Node sums throughout, so the mass is exactly the norm the unitary step preserves.
        The V term uses the discrete measure of the potential.
        """
        density = np.abs(state.u) ** 2
        mass = float(np.sum(density) * grid.dx)
        if mass == 0.0:
            return 0.0, 0.0
        kinetic = float(np.sum(np.abs(spectral_derivative(state.u, grid.dx)) ** 2) * grid.dx)
        potential_term = float(np.sum(potential.measure * density))
        quartic = density**2 if state.a_coeff_nl is None else state.a_coeff_nl * density**2
        energy = kinetic + potential_term + 0.5 * state.sign * float(np.sum(quartic) * grid.dx)
        return mass, energy

    @staticmethod
    def extract_profile(basis: DistortedBasis, trajectory: Trajectory) -> Profile:
        ks = basis.grid.ks
        snapshots = np.array([np.exp(-1j * state.t * ks**2) * DftService.forward(basis, state.u) for state in trajectory.states])
        for state, f_tilde in zip(trajectory.states, snapshots):
            state.f_tilde = f_tilde
        sign = trajectory.states[0].sign if trajectory.states else 1
        return Profile(ts=trajectory.ts, ks=ks, f_tilde_snapshots=snapshots, sign=sign)

    @staticmethod
    def boundary_mass_fraction(u, grid: Grid) -> float:
        density = np.abs(u) ** 2
        total = density.sum()
        if total == 0:
            return 0.0
        outer = np.abs(grid.xs) > 0.95 * grid.x_half_width
        return float(density[outer].sum() / total)

    @staticmethod
    def time_reversal_error(basis: DistortedBasis, u0, t_end: float, dt: float, sign: int = 1, a_coeff_nl=None) -> float:
        """
        Evolve to t_end, conjugate, evolve again; returns ||v - conj(u0)||_2 / ||u0||_2
        """
        forward = EvolveService.nls_solve(basis, u0, t_end, dt, sign, a_coeff_nl)
        back = EvolveService.nls_solve(basis, np.conj(forward.states[-1].u), t_end, dt, sign, a_coeff_nl)
        norm = l2_norm(u0, basis.grid.dx)
        if norm == 0:
            return 0.0
        return l2_norm(back.states[-1].u - np.conj(u0), basis.grid.dx) / norm

    @staticmethod
    def splitting_order(basis: DistortedBasis, u0, t_end: float, dt: float, sign: int = 1, a_coeff_nl=None) -> float:
        """
        Self-convergence order of the Strang step from runs with dt, dt/2 and dt/4

            p = log2(||u_dt - u_{dt/2}|| / ||u_{dt/2} - u_{dt/4}||)

        Returns nan when the finer difference is at roundoff (zero data or linear flow),
        where the splitting is exact.
        """
        dx = basis.grid.dx
        finals = [EvolveService.nls_solve(basis, u0, t_end, dt / 2**level, sign, a_coeff_nl).states[-1].u for level in range(3)]
        coarse = l2_norm(finals[0] - finals[1], dx)
        fine = l2_norm(finals[1] - finals[2], dx)
        if fine <= SPLITTING_FLOOR * l2_norm(u0, dx):
            logger.info("Splitting differences are at roundoff; no order to fit")
            return float("nan")
        order = float(np.log2(coarse / fine))
        logger.info(f"Strang self-convergence over t <= {t_end:g}: order {order:.3f}")
        return order

    @staticmethod
    def conservation_drift(trajectory: Trajectory) -> dict:
        """Relative drift of M and H between the first and last series entries."""
        _, mass0, energy0 = trajectory.series[0]
        _, mass1, energy1 = trajectory.series[-1]
        return {
            "mass": abs(mass1 - mass0) / mass0 if mass0 else 0.0,
            "energy": abs(energy1 - energy0) / abs(energy0) if energy0 else 0.0,
        }
