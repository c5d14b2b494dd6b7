from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ScatteringData:
    """
    Transmission and reflection coefficients on the half-shifted k-grid

    T_zero, R_plus_zero and R_minus_zero hold the k = 0 limits: (0, -1, -1) for generic
    potentials, the continuity limit otherwise.
    """

    ks: np.ndarray
    T: np.ndarray
    R_plus: np.ndarray
    R_minus: np.ndarray
    generic: bool
    generic_value: complex = 0j
    T_zero: complex = 0j
    R_plus_zero: complex = -1 + 0j
    R_minus_zero: complex = -1 + 0j
    alpha_slope: complex | None = None
    alpha_pm: tuple | None = None

    @property
    def S(self) -> np.ndarray:
        """Per-k scattering matrix [[T, R_+], [R_-, T]], shape (n_k, 2, 2)."""
        return np.stack([np.stack([self.T, self.R_plus], axis=-1), np.stack([self.R_minus, self.T], axis=-1)], axis=-2)

    def mirror(self, values: np.ndarray) -> np.ndarray:
        return values[::-1]
