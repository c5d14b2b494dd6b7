import logging
from dataclasses import replace

import numpy as np
from django.conf import settings

from apps.core.exceptions import ContractError, NumericalFailure
from apps.core.quadrature import japanese
from apps.jost.models import JostField
from apps.potentials.models import Potential
from apps.potentials.services import PotentialService
from .models import ScatteringData
from .oracles import barrier_transfer_matrix

logger = logging.getLogger(__name__)

LOW_K_POINTS = 8
CSV_HEADER = ["k", "re_T", "im_T", "re_Rp", "im_Rp", "re_Rm", "im_Rm", "unitarity_defect"]


def _edge_coefficients(jost: JostField) -> tuple:
    """
    1/T, R_+/T and R_-/T read off the box edges, where V vanishes and

        m_+ = 1/T + (R_-/T) e^{-2ikx}  (left edge),  m_- = 1/T + (R_+/T) e^{2ikx}  (right edge)
    """
    xs, ks = jost.grid.xs, jost.grid.ks
    two_ik = 2j * ks
    inverse_T = jost.m_plus[0] + jost.dx_m_plus[0] / two_ik
    r_minus_over_T = -jost.dx_m_plus[0] * np.exp(2j * ks * xs[0]) / two_ik
    r_plus_over_T = jost.dx_m_minus[-1] * np.exp(-2j * ks * xs[-1]) / two_ik
    return inverse_T, r_plus_over_T, r_minus_over_T


class ScatteringService:
    """
    Transmission/reflection coefficients, genericity and low-frequency behaviour
    """

    @staticmethod
    def coefficients(jost: JostField, potential: Potential) -> ScatteringData:
        """
        Evaluate 1/T and R_pm/T at every grid k

            1/T    = 1 - (1/2ik) sum mu m_+
            R_+/T  = (1/2ik) sum e^{-2iky} mu m_-
            R_-/T  = (1/2ik) sum e^{+2iky} mu m_+

        A closed-form Jost field (square barrier) is read off the box edges instead,
        which avoids the quadrature error of the sums.

        Raises:
            ContractError: If the Jost field lives on another grid
            NumericalFailure: If |1/T| falls below the floor at some k
        """
        grid = jost.grid
        if not grid.matches_xs(potential.xs):
            raise ContractError("Jost field and potential are on different grids")

        ks, xs, mu = grid.ks, grid.xs, potential.measure
        two_ik = 2j * ks

        if jost.closed_form:
            inverse_T, r_plus_over_T, r_minus_over_T = _edge_coefficients(jost)
        else:
            phase = np.exp(2j * np.outer(xs, ks))
            inverse_T = 1.0 - (mu @ jost.m_plus) / two_ik
            r_plus_over_T = (mu @ (np.conj(phase) * jost.m_minus)) / two_ik
            r_minus_over_T = (mu @ (phase * jost.m_plus)) / two_ik

        floor = settings.SPECTRAL_LAB["TOLERANCES"]["INVERSE_T_FLOOR"]
        smallest = float(np.min(np.abs(inverse_T)))
        if smallest < floor:
            logger.error(f"|1/T| = {smallest:.3e} below {floor:.0e} for {potential.describe()}")
            raise NumericalFailure("Transmission coefficient blows up", metric=smallest)

        T = 1.0 / inverse_T
        R_plus = T * r_plus_over_T
        R_minus = T * r_minus_over_T

        generic, value = ScatteringService.is_generic(jost, potential)
        if generic:
            T_zero, R_plus_zero, R_minus_zero = 0j, -1 + 0j, -1 + 0j
        else:
            # Continuity limit from the node closest to 0; T(0) and R(0) are real
            j = grid.n_k // 2
            T_zero, R_plus_zero, R_minus_zero = complex(T[j].real), complex(R_plus[j].real), complex(R_minus[j].real)

        logger.info(f"Scattering data for {potential.describe()}: generic={generic}, max|R_+|={np.max(np.abs(R_plus)):.3e}")
        return ScatteringData(
            ks=ks,
            T=T,
            R_plus=R_plus,
            R_minus=R_minus,
            generic=generic,
            generic_value=value,
            T_zero=T_zero,
            R_plus_zero=R_plus_zero,
            R_minus_zero=R_minus_zero,
        )

    @staticmethod
    def is_generic(jost: JostField, potential: Potential) -> tuple:
        """
        Classify by the zero-energy integral of V m_+(., 0)

        The threshold is 1e-8 max(1, ||V||_{L^1}); values within a factor 100 of it
        are classified but logged as borderline.

        Returns:
            (generic, value)
        """
        value = complex(potential.measure @ jost.m_plus_zero)
        norm = PotentialService.weighted_l1_norm(potential, 0.0)
        threshold = settings.SPECTRAL_LAB["TOLERANCES"]["GENERIC_RELATIVE"] * max(1.0, norm)
        generic = abs(value) > threshold

        if threshold / 100.0 < abs(value) < threshold * 100.0:
            logger.warning(f"Genericity of {potential.describe()} is borderline: |int V m_+(x,0) dx| = {abs(value):.3e} vs threshold {threshold:.1e}")
        return generic, value

    @staticmethod
    def low_k_expansion(data: ScatteringData) -> tuple:
        """
        Least-squares slopes T(k) ~ alpha k and 1 + R_pm(k) ~ alpha_pm k over the smallest |k|

        Returns:
            (alpha, (alpha_plus, alpha_minus))

        Raises:
            ContractError: If the data is not generic
        """
        if not data.generic:
            raise ContractError("Low-frequency expansion T(k) = alpha k needs a generic potential")

        window = np.argsort(np.abs(data.ks))[:LOW_K_POINTS]
        ks = data.ks[window]
        denominator = np.sum(ks**2)

        def slope(values):
            return complex(np.sum(values[window] * ks) / denominator)

        alpha = slope(data.T)
        alpha_pm = (slope(1.0 + data.R_plus), slope(1.0 + data.R_minus))
        if abs(alpha) == 0.0:
            logger.warning("Fitted low-frequency slope of T vanishes")
        return alpha, alpha_pm

    @staticmethod
    def with_slopes(data: ScatteringData) -> ScatteringData:
        alpha, alpha_pm = ScatteringService.low_k_expansion(data)
        return replace(data, alpha_slope=alpha, alpha_pm=alpha_pm)

    @staticmethod
    def delta_closed_form(q: float, ks) -> ScatteringData:
        """T = 2ik/(2ik - q), R_pm = q/(2ik - q) for V = q delta_0."""
        if q <= 0:
            raise ContractError(f"Delta strength must be positive, got {q}")
        ks = np.asarray(ks, dtype=float)
        denominator = 2j * ks - q
        R = q / denominator
        return ScatteringData(ks=ks, T=2j * ks / denominator, R_plus=R, R_minus=R.copy(), generic=True, generic_value=complex(q))

    @staticmethod
    def barrier_oracle(height: float, half_width: float, ks) -> ScatteringData:
        T, R_plus, R_minus = barrier_transfer_matrix(height, half_width, ks)
        return ScatteringData(ks=np.asarray(ks, dtype=float), T=T, R_plus=R_plus, R_minus=R_minus, generic=height > 0)

    @staticmethod
    def identity_report(data: ScatteringData) -> dict:
        """Max defects of the algebraic identities of the scattering matrix."""
        T, Rp, Rm = data.T, data.R_plus, data.R_minus
        return {
            "unitarity_plus": float(np.max(np.abs(np.abs(T) ** 2 + np.abs(Rp) ** 2 - 1.0))),
            "unitarity_minus": float(np.max(np.abs(np.abs(T) ** 2 + np.abs(Rm) ** 2 - 1.0))),
            "transmission_reflection": float(np.max(np.abs(T[::-1] - np.conj(T)))),
            "reflection_plus_reflection": float(np.max(np.abs(Rp[::-1] - np.conj(Rp)))),
            "reflection_minus_reflection": float(np.max(np.abs(Rm[::-1] - np.conj(Rm)))),
            "cross_orthogonality": float(np.max(np.abs(T * np.conj(Rm) + np.conj(T) * Rp))),
        }

    @staticmethod
    def derivative_bound(data: ScatteringData) -> float:
        """sup_k <k> (|dT/dk| + |dR_+/dk| + |dR_-/dk|) by centered differences."""
        dk = data.ks[1] - data.ks[0]
        total = sum(np.abs(np.gradient(values, dk)) for values in (data.T, data.R_plus, data.R_minus))
        return float(np.max(japanese(data.ks) * total))

    @staticmethod
    def oracle_error(data: ScatteringData, reference: ScatteringData, indices) -> float:
        """
        Max over the chosen k-nodes of the relative error

            (|T - T_ref| + |R_+ - R_+ref| + |R_- - R_-ref|) / (|T_ref| + |R_+ref| + |R_-ref|)
        """
        indices = np.asarray(indices)
        error = (
            np.abs(data.T[indices] - reference.T)
            + np.abs(data.R_plus[indices] - reference.R_plus)
            + np.abs(data.R_minus[indices] - reference.R_minus)
        )
        scale = np.abs(reference.T) + np.abs(reference.R_plus) + np.abs(reference.R_minus)
        return float(np.max(error / scale))

    @staticmethod
    def table(data: ScatteringData) -> tuple:
        """CSV header and rows k, re/im of T, R_+, R_-, and |T|^2 + |R_+|^2 - 1."""
        defect = np.abs(data.T) ** 2 + np.abs(data.R_plus) ** 2 - 1.0
        rows = np.column_stack(
            [data.ks, data.T.real, data.T.imag, data.R_plus.real, data.R_plus.imag, data.R_minus.real, data.R_minus.imag, defect]
        )
        return CSV_HEADER, rows
