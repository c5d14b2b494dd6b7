from dataclasses import dataclass

import numpy as np

from apps.dft.models import Component


class NormKind:
    """Norms tracked along a flow; the weighted ones take the exponent beta."""

    SUP = "sup"
    WEIGHTED_SUP = "weighted_sup"
    WEIGHTED_DX_L2 = "weighted_dx_L2"
    HK1_OF_PROFILE = "Hk1_of_profile"
    DK_L2 = "dk_L2"

    CHOICES = (SUP, WEIGHTED_SUP, WEIGHTED_DX_L2, HK1_OF_PROFILE, DK_L2)


class SymbolKind:
    """Symbols a(x, lam) of the operators g -> 1_{x >= -1} <x>^beta int e^{i lam x} a(x, lam) g(lam) dlam"""

    M_MINUS_1 = "m_minus_1"
    DX_M = "dx_m"
    DK_M = "dk_m"
    DKDX_M = "dkdx_m"

    CHOICES = (M_MINUS_1, DX_M, DK_M, DKDX_M)


@dataclass(frozen=True, eq=False)
class DecaySeries:
    """
    Norm of a flow sampled at increasing times, with the log-log fit over ts >= t_fit_min

    fitted_slope is NaN when fewer than five samples fall in the fit window.
    """

    ts: np.ndarray
    norms: np.ndarray
    norm_kind: str
    component: str = Component.FULL
    beta: float = 0.0
    t_fit_min: float = 20.0
    fitted_slope: float = float("nan")
    slope_ci: tuple = (float("nan"), float("nan"))

    @property
    def has_fit(self) -> bool:
        return bool(np.isfinite(self.fitted_slope))
