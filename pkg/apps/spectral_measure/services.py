import logging
from itertools import product

import numpy as np
from scipy.signal import fftconvolve
from scipy.stats import linregress

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.core.quadrature import centered_derivative, l2_norm
from apps.dft import cutoffs
from apps.dft.models import DistortedBasis
from apps.dft.services import DftService
from .models import BKind, Side, TrilinearSpec

logger = logging.getLogger(__name__)

SQRT_2PI = np.sqrt(2.0 * np.pi)
BRUTE_FORCE_MAX_NODES = 32
DECAY_GAP_WINDOW = (10.0, 100.0)
DECAY_GAP_POINTS = 6


def frequency_lattice(ks) -> tuple:
    """
    Nodes p_c = (c + 2 - 2N) dk, c = 0..4N-4, on which k + e1 l + e2 m + e3 n lands

    Returns:
        (p, dk, c0) with p[c0] = 0

    Raises:
        ContractError: If ks is not a uniform half-shifted grid symmetric about 0
    """
    ks = np.asarray(ks, dtype=float)
    n = ks.size
    if n < 2 or n % 2:
        raise ContractError(f"Frequency grid needs an even number of nodes, got {n}")
    dk = ks[1] - ks[0]
    scale = max(1.0, float(np.max(np.abs(ks))))
    if not np.allclose(np.diff(ks), dk, rtol=0.0, atol=1e-10 * scale) or not np.allclose(ks, -ks[::-1], rtol=0.0, atol=1e-10 * scale):
        raise ContractError("Principal-value sums need a uniform frequency grid symmetric about p = 0")
    c0 = 2 * n - 2
    p = (np.arange(4 * n - 3) - c0) * dk
    return p, dk, c0


def kernel_samples(b_kind: str, p, dk: float, c0: int) -> np.ndarray:
    """
    b on the lattice

    delta puts 1/dk on p = 0. pv is the symmetric sum of zeta_hat(p)/(ip): weight
    2 zeta_hat(p)/(ip) on odd offsets from p = 0 and nothing on even ones, which is the
    exact lattice transform of zeta * sgn / 2 on one period.
    """
    if b_kind == BKind.GAUSSIAN:
        return np.exp(-(p**2)).astype(complex)
    if b_kind == BKind.ZETA:
        return cutoffs.zeta_hat(p).astype(complex)
    if b_kind == BKind.VARPI:
        return cutoffs.varpi_hat(p).astype(complex)
    if b_kind == BKind.DELTA:
        samples = np.zeros(p.size, dtype=complex)
        samples[c0] = 1.0 / dk
        return samples
    if b_kind == BKind.PV:
        offsets = np.arange(p.size) - c0
        odd = offsets % 2 == 1
        samples = np.zeros(p.size, dtype=complex)
        samples[odd] = 2.0 * cutoffs.zeta_hat(p[odd]) / (1j * p[odd])
        return samples
    raise ContractError(f"b_kind must be one of {BKind.CHOICES}, got {b_kind!r}")


def phi_hat_samples(side: str, p, dk: float, c0: int) -> np.ndarray:
    """phi_pm^ = sqrt(pi/2) delta_0 +- zeta_hat(p)/(ip) + varpi_hat(p) on the lattice"""
    if side not in Side.CHOICES:
        raise ContractError(f"Side must be one of {Side.CHOICES}, got {side!r}")
    sign = 1.0 if side == Side.PLUS else -1.0
    return (
        np.sqrt(np.pi / 2.0) * kernel_samples(BKind.DELTA, p, dk, c0)
        + sign * kernel_samples(BKind.PV, p, dk, c0)
        + kernel_samples(BKind.VARPI, p, dk, c0)
    )


def lattice_action(b_samples, f1, f2, f3, epsilons, t: float, ks, dk: float) -> np.ndarray:
    # Reflecting a sequence turns e*k_j into a node of the same grid, so the triple sum
    # is a threefold convolution followed by a correlation against b.
    phase = np.exp(1j * t * np.asarray(ks) ** 2)
    pieces = [phase * np.asarray(f1), np.conj(phase * np.asarray(f2)), phase * np.asarray(f3)]
    pieces = [piece if eps > 0 else piece[::-1] for piece, eps in zip(pieces, epsilons)]
    combined = fftconvolve(fftconvolve(pieces[0], pieces[1]), pieces[2])
    return np.conj(phase) * fftconvolve(b_samples, combined[::-1], mode="valid") * dk**3


def flat_inverse(g, ks, xs) -> np.ndarray:
    """(2 pi)^{-1/2} sum_k e^{ikx} g(k) dk at arbitrary points"""
    ks = np.asarray(ks)
    dk = ks[1] - ks[0]
    return np.exp(1j * np.outer(xs, ks)) @ np.asarray(g) * dk / SQRT_2PI


class TrilinearForms:
    """
    The trilinear form T_b and the two identities it satisfies
    """

    @staticmethod
    def evaluate(spec: TrilinearSpec, ks, f1, f2, f3, weight_by_argument: bool = False) -> np.ndarray:
        """T_b(f1, f2, f3) on ks; weight_by_argument replaces b(p) by p b(p)."""
        p, dk, c0 = frequency_lattice(ks)
        samples = kernel_samples(spec.b_kind, p, dk, c0)
        if weight_by_argument:
            samples = p * samples
        return lattice_action(samples, f1, f2, f3, spec.epsilons, spec.t, ks, dk)

    @staticmethod
    def commutator_residual(spec: TrilinearSpec, ks, f1, f2, f3) -> float:
        """
        Relative sup-norm defect of

            d_k T_b(f1, f2, f3) = -e1 T_b(f1', f2, f3) + e2 T_b(f1, f2', f3) - e3 T_b(f1, f2, f3')
                                  - 2it T_{yb}(f1, f2, f3)

        with every derivative taken by fourth-order centered differences on ks.

        Raises:
            ContractError: For a delta or pv kernel
        """
        if not spec.is_smooth:
            raise ContractError(f"The derivative identity is checked with a smooth kernel, got {spec.b_kind!r}")
        ks = np.asarray(ks, dtype=float)
        dk = ks[1] - ks[0]
        e1, e2, e3 = spec.epsilons
        d1, d2, d3 = (centered_derivative(np.asarray(f, dtype=complex), dk) for f in (f1, f2, f3))

        lhs = centered_derivative(TrilinearForms.evaluate(spec, ks, f1, f2, f3), dk)
        rhs = (
            -e1 * TrilinearForms.evaluate(spec, ks, d1, f2, f3)
            + e2 * TrilinearForms.evaluate(spec, ks, f1, d2, f3)
            - e3 * TrilinearForms.evaluate(spec, ks, f1, f2, d3)
            - 2j * spec.t * TrilinearForms.evaluate(spec, ks, f1, f2, f3, weight_by_argument=True)
        )
        scale = float(np.max(np.abs(lhs)))
        if scale == 0.0:
            return 0.0
        residual = float(np.max(np.abs(lhs - rhs))) / scale
        logger.debug(f"Commutator residual {residual:.3e} for {spec}")
        return residual

    @staticmethod
    def inverse_fd_map(spec: TrilinearSpec, ks, f1, f2, f3, xs=None) -> float:
        """
        Relative L^2 mismatch of the flat identity

            F^{-1}[e^{itk^2} T_b](x) = (2 pi)^{3/2} u1(-e1 x) conj(u2(e2 x)) u3(-e3 x) F^{-1}[b](x)

        where u_j = F^{-1}[e^{itk^2} f_j], evaluated on xs (default [-10, 10]).

        Raises:
            ContractError: For a delta or pv kernel
        """
        if not spec.is_smooth:
            raise ContractError(f"The inverse transform identity needs a smooth kernel, got {spec.b_kind!r}")
        ks = np.asarray(ks, dtype=float)
        xs = np.linspace(-10.0, 10.0, 401) if xs is None else np.asarray(xs, dtype=float)
        phase = np.exp(1j * spec.t * ks**2)
        e1, e2, e3 = spec.epsilons

        lhs = flat_inverse(phase * TrilinearForms.evaluate(spec, ks, f1, f2, f3), ks, xs)

        if spec.b_kind == BKind.GAUSSIAN:
            inverse_b = np.exp(-(xs**2) / 4.0) / np.sqrt(2.0)
        elif spec.b_kind == BKind.ZETA:
            inverse_b = cutoffs.zeta(xs)
        else:
            inverse_b = cutoffs.varpi(xs)
        rhs = (
            SQRT_2PI**3
            * flat_inverse(phase * f1, ks, -e1 * xs)
            * np.conj(flat_inverse(phase * f2, ks, e2 * xs))
            * flat_inverse(phase * f3, ks, -e3 * xs)
            * inverse_b
        )

        norm = np.linalg.norm(rhs)
        if norm == 0.0:
            return float(np.linalg.norm(lhs))
        return float(np.linalg.norm(lhs - rhs) / norm)


class SpectralMeasureService:
    """
    Trilinear actions of the nonlinear spectral distribution
    mu(k, l, m, n) = int conj(K(x,k)) K(x,l) conj(K(x,m)) K(x,n) dx

    The four-index mu is never formed; every action goes through transforms or lattice sums.
    """

    @staticmethod
    def _pairing(left, right, g1, g2, g3, t: float, grid: Grid) -> np.ndarray:
        # e^{-itk^2} int conj(left(x,k)) u1 conj(u2) u3 dx with u_j = right_j @ (e^{itl^2} g_j) dl
        rights = right if isinstance(right, tuple) else (right, right, right)
        phase = np.exp(1j * t * grid.ks**2)
        u1, u2, u3 = (kernel @ (phase * np.asarray(g)) * grid.dk for kernel, g in zip(rights, (g1, g2, g3)))
        return np.conj(phase) * (left.conj().T @ (u1 * np.conj(u2) * u3)) * grid.dx

    @staticmethod
    def trilinear_direct(basis: DistortedBasis, g1, g2, g3, t: float) -> np.ndarray:
        """
        N[g1, g2, g3](k) = e^{-itk^2} F~[u1 conj(u2) u3], u_j = F~^{-1}[e^{itk^2} g_j]

        This is the exact discrete pairing with mu and the reference for every split.
        """
        ks = basis.grid.ks
        phase = np.exp(1j * t * ks**2)
        u1, u2, u3 = (DftService.inverse(basis, phase * np.asarray(g)) for g in (g1, g2, g3))
        return np.conj(phase) * DftService.forward(basis, u1 * np.conj(u2) * u3)

    @staticmethod
    def singular_action(basis: DistortedBasis, g1, g2, g3, t: float, side: str) -> np.ndarray:
        """
        Action of (2 pi)^{-2} mu_pm assembled on the frequency lattice

        mu_pm = sum over sign tuples of conj(a^{e0}(k)) a^{e1}(l) conj(a^{e2}(m)) a^{e3}(n)
        sqrt(2 pi) phi_pm^(e0 k - e1 l + e2 m - e3 n), with phi_pm^ split into its delta,
        pv and smooth parts.

        Raises:
            ContractError: For an unknown side or an asymmetric grid
        """
        ks = basis.grid.ks
        p, dk, c0 = frequency_lattice(ks)
        samples = SQRT_2PI * phi_hat_samples(side, p, dk, c0)
        coeff = {1: basis.a_coeff[(side, "+")], -1: basis.a_coeff[(side, "-")]}
        inputs = [np.asarray(g) for g in (g1, g2, g3)]

        total = np.zeros(ks.size, dtype=complex)
        for e0, e1, e2, e3 in product((1, -1), repeat=4):
            epsilons = (-e0 * e1, e0 * e2, -e0 * e3)
            kernel = samples if e0 > 0 else samples[::-1]
            action = lattice_action(kernel, coeff[e1] * inputs[0], coeff[e2] * inputs[1], coeff[e3] * inputs[2], epsilons, t, ks, dk)
            total += np.conj(coeff[e0]) * action
        return total / (2.0 * np.pi) ** 2

    @staticmethod
    def singular_action_physical(basis: DistortedBasis, g1, g2, g3, t: float, side: str) -> np.ndarray:
        """Same action by multiplying with phi_pm = chi_pm^4 in physical space."""
        if side not in Side.CHOICES:
            raise ContractError(f"Side must be one of {Side.CHOICES}, got {side!r}")
        grid = basis.grid
        wave = np.exp(1j * np.outer(grid.xs, grid.ks))
        kernel = basis.a_coeff[(side, "+")] * wave + basis.a_coeff[(side, "-")] * np.conj(wave)
        phi = (basis.chi_plus if side == Side.PLUS else basis.chi_minus) ** 4
        return SpectralMeasureService._pairing(phi[:, None] * kernel, kernel, g1, g2, g3, t, grid) / (2.0 * np.pi) ** 2

    @staticmethod
    def regular_action(basis: DistortedBasis, g1, g2, g3, t: float) -> np.ndarray:
        """Sum of the K_R block and the cross-cutoff layer of regular_components."""
        parts = SpectralMeasureService.regular_components(basis, g1, g2, g3, t)
        return parts["K_R"] + parts["cross_cutoff"]

    @staticmethod
    def regular_components(basis: DistortedBasis, g1, g2, g3, t: float) -> dict:
        """
        Split the regular action into

            K_R:           pairings where at least one slot carries K_R
            cross_cutoff:  all four slots singular, minus the two diagonal cutoff terms

        The K_R block is summed by the first slot holding K_R: slots before it are
        singular, slots after it carry the full kernel. The diagonal terms are the
        physical-space chi_pm^4 pairings.

        For V = 0 the first block is exactly zero; the second lives where chi_+ chi_- != 0.
        """
        grid = basis.grid
        singular = basis.K_S / SQRT_2PI
        regular = basis.K_R / SQRT_2PI
        full = singular + regular
        gs = (g1, g2, g3)
        pairing = SpectralMeasureService._pairing

        block = pairing(regular, full, *gs, t, grid)
        block = block + pairing(singular, (regular, full, full), *gs, t, grid)
        block = block + pairing(singular, (singular, regular, full), *gs, t, grid)
        block = block + pairing(singular, (singular, singular, regular), *gs, t, grid)

        all_singular = pairing(singular, singular, *gs, t, grid)
        diagonal = sum(SpectralMeasureService.singular_action_physical(basis, *gs, t, side) for side in Side.CHOICES)
        return {"K_R": block, "cross_cutoff": all_singular - diagonal}

    @staticmethod
    def regular_decay_gap(basis: DistortedBasis, g1, g2, g3, times=None) -> dict:
        """
        Fitted decay exponents a in ||.||_{L^2_k} ~ t^{-a} of trilinear_direct and regular_action

        Args:
            times: Sample times, default DECAY_GAP_POINTS log-spaced points on [10, 100]

        Returns:
            {"times", "direct", "regular", "direct_exponent", "regular_exponent", "gap"};
            the exponents are nan when a series has a zero sample
        """
        times = np.geomspace(*DECAY_GAP_WINDOW, DECAY_GAP_POINTS) if times is None else np.asarray(times, dtype=float)
        dk = basis.grid.dk
        direct = np.array([l2_norm(SpectralMeasureService.trilinear_direct(basis, g1, g2, g3, t), dk) for t in times])
        regular = np.array([l2_norm(SpectralMeasureService.regular_action(basis, g1, g2, g3, t), dk) for t in times])

        def exponent(norms):
            if np.any(norms <= 0):
                return float("nan")
            return float(-linregress(np.log(times), np.log(norms)).slope)

        direct_exponent, regular_exponent = exponent(direct), exponent(regular)
        gap = regular_exponent - direct_exponent
        logger.info(f"Decay exponents over t in [{times[0]:g}, {times[-1]:g}]: direct {direct_exponent:.3f}, regular {regular_exponent:.3f}")
        return {
            "times": times,
            "direct": direct,
            "regular": regular,
            "direct_exponent": direct_exponent,
            "regular_exponent": regular_exponent,
            "gap": gap,
        }

    @staticmethod
    def brute_force_flat(grid: Grid, g1, g2, g3, t: float) -> np.ndarray:
        """
        Triple sum against the four-index flat mu on small grids

        For V = 0, (2 pi)^2 mu(k, l, m, n) = sum_x e^{i(-k + l - m + n) x} dx, and -k + l - m + n
        is an integer multiple of dk on the half-shifted grid.

        Raises:
            ContractError: If the grid has more than 32 frequency nodes
        """
        n = grid.n_k
        if n > BRUTE_FORCE_MAX_NODES:
            raise ContractError(f"Brute-force sums are limited to {BRUTE_FORCE_MAX_NODES} frequency nodes, got {n}")

        offsets = np.arange(-2 * (n - 1), 2 * (n - 1) + 1)
        exponentials = np.exp(1j * np.outer(offsets * grid.dk, grid.xs)).sum(axis=1) * grid.dx / (2.0 * np.pi) ** 2
        idx = np.arange(n)
        shift = -idx[:, None, None, None] + idx[None, :, None, None] - idx[None, None, :, None] + idx[None, None, None, :]
        mu = exponentials[shift + 2 * (n - 1)]

        phase = np.exp(1j * t * grid.ks**2)
        h1, h2, h3 = phase * np.asarray(g1), np.conj(phase * np.asarray(g2)), phase * np.asarray(g3)
        return np.conj(phase) * np.einsum("klmn,l,m,n->k", mu, h1, h2, h3) * grid.dk**3

    @staticmethod
    def duhamel_step(basis: DistortedBasis, f_tilde, t: float, dt: float, sign: int = 1) -> np.ndarray:
        """
        One explicit Euler step of the profile equation d_t f~ = i sigma N[f~, f~, f~](t)
        """
        f_tilde = np.asarray(f_tilde, dtype=complex)
        return f_tilde + 1j * sign * dt * SpectralMeasureService.trilinear_direct(basis, f_tilde, f_tilde, f_tilde, t)
