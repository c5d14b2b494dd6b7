import logging
from pathlib import Path

import numpy as np
from django.conf import settings

from apps.core.exceptions import ContractError
from apps.core.grid import Grid
from apps.core.quadrature import spectral_derivative
from apps.jost.models import JostField
from apps.potentials.models import Potential
from apps.scattering.models import ScatteringData
from apps.dft import cutoffs
from apps.dft.models import Component, DistortedBasis

logger = logging.getLogger(__name__)

SQRT_2PI = np.sqrt(2.0 * np.pi)


class DftService:
    """
    Service layer for the distorted Fourier transform
    Builds the eigenfunction matrix once; transforms are dense products against it
    """

    @staticmethod
    def build_basis(jost: JostField, scattering: ScatteringData, grid: Grid, potential: Potential | None = None) -> DistortedBasis:
        """
        Assemble K, K_S and K_R on the grid

            k > 0:  sqrt(2 pi) K = T(k) m_+(x, k) e^{ikx}
            k < 0:  sqrt(2 pi) K = T(-k) m_-(x, -k) e^{ikx}

        Args:
            jost: Jost field solved on grid
            scattering: Coefficients computed from the same field
            grid: Run grid
            potential: Kept on the basis for energy functionals and the Hamiltonian check

        Returns:
            DistortedBasis with the split residual max|sqrt(2 pi) K - K_S - K_R| recorded

        Raises:
            ContractError: If the three inputs do not share one grid
        """
        jost.grid.require_same(grid, "Jost field and basis")
        if scattering.ks.shape != grid.ks.shape or not np.array_equal(scattering.ks, grid.ks):
            raise ContractError("Scattering data is not sampled on the basis k-grid")

        xs, ks = grid.xs, grid.ks
        positive = (ks > 0)[None, :]
        wave = np.exp(1j * np.outer(xs, ks))
        back = np.conj(wave)

        T, R_plus, R_minus = scattering.T, scattering.R_plus, scattering.R_minus
        T_m, R_plus_m = T[::-1], R_plus[::-1]
        m_plus, m_minus = jost.m_plus, jost.m_minus
        m_plus_m, m_minus_m = m_plus[:, ::-1], m_minus[:, ::-1]

        full = np.where(positive, T * m_plus, T_m * m_minus_m) * wave

        pos = ks > 0
        a_coeff = {
            ("+", "+"): np.where(pos, T, 1.0 + 0j),
            ("+", "-"): np.where(pos, 0j, R_plus_m),
            ("-", "+"): np.where(pos, 1.0 + 0j, T_m),
            ("-", "-"): np.where(pos, R_minus, 0j),
        }
        chi_p, chi_m = cutoffs.chi_plus(xs)[:, None], cutoffs.chi_minus(xs)[:, None]
        singular = chi_p * (a_coeff[("+", "+")] * wave + a_coeff[("+", "-")] * back) + chi_m * (
            a_coeff[("-", "+")] * wave + a_coeff[("-", "-")] * back
        )

        regular_pos = chi_p * T * (m_plus - 1.0) * wave + chi_m * ((m_minus_m - 1.0) * wave + R_minus * (m_minus - 1.0) * back)
        regular_neg = chi_m * T_m * (m_minus_m - 1.0) * wave + chi_p * ((m_plus - 1.0) * wave + R_plus_m * (m_plus_m - 1.0) * back)
        regular = np.where(positive, regular_pos, regular_neg)

        residual = float(np.max(np.abs(full - singular - regular)))
        tolerance = settings.SPECTRAL_LAB["TOLERANCES"]["SPLIT_IDENTITY"]
        if residual > tolerance:
            logger.warning(f"Split identity holds only to {residual:.3e} (tolerance {tolerance:.0e})")

        logger.info(f"Built distorted basis on {grid.n_x}x{grid.n_k} nodes, split residual {residual:.2e}")
        return DistortedBasis(
            grid=grid,
            scattering=scattering,
            jost=jost,
            K=full / SQRT_2PI,
            K_S=singular,
            K_R=regular,
            chi_plus=chi_p[:, 0],
            chi_minus=chi_m[:, 0],
            a_coeff=a_coeff,
            split_residual=residual,
            potential=potential,
        )

    @staticmethod
    def forward(basis: DistortedBasis, f) -> np.ndarray:
        """f~(k_j) = sum_i conj(K(x_i, k_j)) f(x_i) dx; f may carry extra trailing columns."""
        f = np.asarray(f)
        if f.shape[0] != basis.grid.n_x:
            raise ContractError(f"Expected {basis.grid.n_x} x-samples, got {f.shape[0]}")
        return basis.K.conj().T @ f * basis.grid.dx

    @staticmethod
    def inverse(basis: DistortedBasis, g) -> np.ndarray:
        g = np.asarray(g)
        if g.shape[0] != basis.grid.n_k:
            raise ContractError(f"Expected {basis.grid.n_k} k-samples, got {g.shape[0]}")
        return basis.K @ g * basis.grid.dk

    @staticmethod
    def multiplier(basis: DistortedBasis, symbol, f) -> np.ndarray:
        """m(D) f = F~^{-1} m F~ f"""
        symbol = np.asarray(symbol)
        transformed = DftService.forward(basis, f)
        if transformed.ndim > 1:
            symbol = symbol.reshape(-1, *([1] * (transformed.ndim - 1)))
        return DftService.inverse(basis, symbol * transformed)

    @staticmethod
    def component_project(basis: DistortedBasis, g, which: str) -> np.ndarray:
        """
        phi_* = (2 pi)^{-1/2} int K_*(x, k) g(k) dk for * in {0, S, R}

        Raises:
            ContractError: For an unknown component tag
        """
        if which == Component.FULL:
            return DftService.inverse(basis, g)
        if which == Component.SINGULAR:
            return basis.K_S @ np.asarray(g) * basis.grid.dk / SQRT_2PI
        if which == Component.REGULAR:
            return basis.K_R @ np.asarray(g) * basis.grid.dk / SQRT_2PI
        raise ContractError(f"Component must be one of {Component.CHOICES}, got {which!r}")

    @staticmethod
    def apply_hamiltonian(potential: Potential, f, dx: float) -> np.ndarray:
        """
        -f'' + V f with V taken as the same discrete measure the basis is built from

        The second derivative is spectral, so f must be concentrated inside the box.
        """
        f = np.asarray(f, dtype=complex)
        second = spectral_derivative(spectral_derivative(f, dx), dx)
        return -second + potential.measure / dx * f

    @staticmethod
    def export_csv(basis: DistortedBasis, k_values, directory) -> Path:
        """Debug dump of K(., k) at the grid nodes closest to k_values."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        indices = [int(np.argmin(np.abs(basis.grid.ks - k))) for k in k_values]
        columns = [basis.grid.xs]
        header = ["x"]
        for j in indices:
            columns += [basis.K[:, j].real, basis.K[:, j].imag]
            header += [f"re_K_{basis.grid.ks[j]:.6g}", f"im_K_{basis.grid.ks[j]:.6g}"]
        path = directory / "basis_slices.csv"
        np.savetxt(path, np.column_stack(columns), delimiter=",", header=",".join(header), comments="", fmt="%.17g")
        return path
