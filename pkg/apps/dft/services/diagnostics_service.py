import logging

import numpy as np

from apps.core.grid import Grid
from apps.core.quadrature import japanese, l2_norm
from apps.potentials.models import Potential
from apps.dft.models import DistortedBasis
from .basis_service import DftService

logger = logging.getLogger(__name__)

_ZERO_EXTRAPOLATION = np.array([15.0, -10.0, 3.0]) / 8.0


class DftDiagnostics:
    """
    Acceptance checks of the discrete distorted transform
    """

    @staticmethod
    def wave_packets(grid: Grid, centers=(-4.0, 0.0, 4.0), momenta=(-2.0, 0.0, 2.0), width: float = 1.0) -> np.ndarray:
        """Band-limited test functions e^{-(x-c)^2/2w^2} e^{ipx}, one per column."""
        xs = grid.xs
        columns = [np.exp(-((xs - c) ** 2) / (2.0 * width**2) + 1j * p * xs) for c in centers for p in momenta]
        return np.column_stack(columns)

    @staticmethod
    def plancherel_ratio(basis: DistortedBasis, f) -> float:
        """||f~||_{L^2(dk)} / ||f||_{L^2(dx)}"""
        transformed = DftService.forward(basis, f)
        return l2_norm(transformed, basis.grid.dk) / l2_norm(f, basis.grid.dx)

    @staticmethod
    def round_trip_error(basis: DistortedBasis, f) -> float:
        back = DftService.inverse(basis, DftService.forward(basis, f))
        return l2_norm(back - f, basis.grid.dx) / l2_norm(f, basis.grid.dx)

    @staticmethod
    def unitarity_defect(basis: DistortedBasis, samples=None) -> float:
        """
        Spectral norm of the Gram defect of F~ on the span of the sample columns

        Compares <F~f_a, F~f_b>_k with <f_a, f_b>_x, relative to the largest Gram eigenvalue.
        """
        samples = DftDiagnostics.wave_packets(basis.grid) if samples is None else np.asarray(samples)
        transformed = DftService.forward(basis, samples)
        gram_x = samples.conj().T @ samples * basis.grid.dx
        gram_k = transformed.conj().T @ transformed * basis.grid.dk
        return float(np.linalg.norm(gram_k - gram_x, 2) / np.linalg.norm(gram_x, 2))

    @staticmethod
    def diagonalization_residual(basis: DistortedBasis, potential: Potential, f) -> float:
        """||F~(Hf) - k^2 F~f||_2 / ||f||_2"""
        f = np.asarray(f, dtype=complex)
        applied = DftService.apply_hamiltonian(potential, f, basis.grid.dx)
        defect = DftService.forward(basis, applied) - basis.grid.ks**2 * DftService.forward(basis, f)
        return l2_norm(defect, basis.grid.dk) / l2_norm(f, basis.grid.dx)

    @staticmethod
    def regular_part_bound(basis: DistortedBasis, beta: float = 1.0) -> float:
        """sup over the grid of <x>^beta <k> |K_R(x, k)|"""
        weighted = japanese(basis.grid.xs)[:, None] ** beta * np.abs(basis.K_R) * japanese(basis.grid.ks)[None, :]
        return float(weighted.max())

    @staticmethod
    def coefficient_bound(basis: DistortedBasis, g) -> float:
        """max over (side, sign) of ||a_side^sign g||_2 / ||g||_2; at most 1 since |T|, |R_pm| <= 1."""
        g = np.asarray(g)
        norm = np.linalg.norm(g)
        return float(max(np.linalg.norm(coefficient * g) / norm for coefficient in basis.a_coeff.values()))

    @staticmethod
    def zero_frequency_ratio(basis: DistortedBasis, transformed) -> float:
        """
        |f~(0)| / ||f~||_inf with f~(0) extrapolated quadratically from each side

        The k-grid has no node at 0; f~ is smooth up to k = 0 from either side, so the
        nodes dk/2, 3dk/2, 5dk/2 (and their mirrors) carry the weights 15/8, -5/4, 3/8.
        The larger of the two one-sided values is used.
        """
        transformed = np.asarray(transformed)
        center = basis.grid.n_k // 2
        right = _ZERO_EXTRAPOLATION @ transformed[center : center + 3]
        left = _ZERO_EXTRAPOLATION @ transformed[center - 1 : center - 4 : -1]
        return float(max(abs(right), abs(left)) / np.max(np.abs(transformed)))

    @staticmethod
    def report(basis: DistortedBasis, potential: Potential) -> dict:
        """
        Plancherel and split figures on a centered Gaussian

        The diagonalization residual uses a packet centered at x = 4, away from the
        kinks the eigenfunctions of a barrier carry.
        """
        xs = basis.grid.xs
        gaussian = np.exp(-(xs**2) / 2.0).astype(complex)
        packet = np.exp(-((xs - 4.0) ** 2)).astype(complex)
        transformed = DftService.forward(basis, gaussian)
        result = {
            "plancherel_ratio": DftDiagnostics.plancherel_ratio(basis, gaussian),
            "round_trip_error": DftDiagnostics.round_trip_error(basis, gaussian),
            "unitarity_defect": DftDiagnostics.unitarity_defect(basis),
            "diagonalization_residual": DftDiagnostics.diagonalization_residual(basis, potential, packet),
            "split_residual": basis.split_residual,
            "regular_part_bound": DftDiagnostics.regular_part_bound(basis),
            "coefficient_bound": DftDiagnostics.coefficient_bound(basis, transformed),
            "low_frequency_ratio": DftDiagnostics.zero_frequency_ratio(basis, transformed),
        }
        logger.info("Transform diagnostics: " + ", ".join(f"{key}={value:.3e}" for key, value in result.items()))
        return result
