from dataclasses import dataclass, field

import numpy as np

from apps.core.grid import Grid
from apps.jost.models import JostField
from apps.potentials.models import Potential
from apps.scattering.models import ScatteringData


class Component:
    FULL = "0"
    SINGULAR = "S"
    REGULAR = "R"

    CHOICES = (FULL, SINGULAR, REGULAR)


@dataclass(frozen=True, eq=False)
class DistortedBasis:
    """
    Generalized eigenfunctions K(x_i, k_j) of H = -d_xx + V and their split

    sqrt(2 pi) K = K_S + K_R, where
        K_S = sum_pm chi_pm(x) (a_pm^+(k) e^{ikx} + a_pm^-(k) e^{-ikx})
    and K_R collects the (m_pm - 1) terms. a_coeff is keyed by (side, sign).
    """

    grid: Grid
    scattering: ScatteringData
    jost: JostField
    K: np.ndarray
    K_S: np.ndarray
    K_R: np.ndarray
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    a_coeff: dict = field(default_factory=dict)
    split_residual: float = 0.0
    potential: Potential | None = None
