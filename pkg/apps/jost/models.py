from dataclasses import dataclass, field

import numpy as np

from apps.core.grid import Grid


@dataclass(frozen=True, eq=False)
class JostField:
    """
    Volterra solution record on (x_i, k_j)

    Rows index x, columns index the half-shifted k-grid. The k = 0 columns
    are stored separately since the k-grid never contains 0.
    """

    grid: Grid
    m_plus: np.ndarray
    m_minus: np.ndarray
    dk_m_plus: np.ndarray
    dk_m_minus: np.ndarray
    dx_m_plus: np.ndarray
    dx_m_minus: np.ndarray
    m_plus_zero: np.ndarray
    m_minus_zero: np.ndarray
    max_residual: float = 0.0
    # True when m_pm are exact solutions rather than solutions for the discrete measure
    closed_form: bool = False


@dataclass(frozen=True)
class JostBoundReport:
    """Empirical constants C in |d_k^s (m_pm - 1)| <k> <= C W_pm^{s+1}(x)."""

    constants: dict = field(default_factory=dict)
    skipped_nodes: dict = field(default_factory=dict)

    def as_rows(self):
        return [{"side": side, "s": s, "constant": value, "skipped": self.skipped_nodes[(side, s)]} for (side, s), value in sorted(self.constants.items())]
