from dataclasses import dataclass, field

import numpy as np


class Sign:
    """Coefficient sigma of |u|^2 u in i u_t - u_xx + V u + sigma |u|^2 u = 0; 0 switches the nonlinearity off."""

    DEFOCUSING = 1
    FOCUSING = -1
    LINEAR = 0

    NAMES = {"defocusing": DEFOCUSING, "focusing": FOCUSING, "linear": LINEAR}

    @classmethod
    def parse(cls, value) -> int:
        if isinstance(value, str):
            return cls.NAMES[value]
        return int(value)


class DataShape:
    GAUSSIAN = "gaussian"
    ODD_GAUSSIAN = "odd_gaussian"
    ZERO = "zero"

    CHOICES = (GAUSSIAN, ODD_GAUSSIAN, ZERO)


@dataclass
class SolutionState:
    """
    Solution u(t, .) on the x-grid

    f_tilde is the profile e^{-itk^2} F~[u(t)]; it is filled by extract_profile.
    """

    t: float
    u: np.ndarray
    sign: int = Sign.DEFOCUSING
    a_coeff_nl: np.ndarray | None = None
    f_tilde: np.ndarray | None = None


@dataclass
class Trajectory:
    """Snapshots plus the conserved-quantity series sampled along the run."""

    states: list = field(default_factory=list)
    series: list = field(default_factory=list)
    dt: float = 0.0
    steps: int = 0

    @property
    def ts(self) -> np.ndarray:
        return np.array([state.t for state in self.states])

    def at(self, t: float) -> SolutionState:
        index = int(np.argmin(np.abs(self.ts - t)))
        return self.states[index]


@dataclass(frozen=True, eq=False)
class Profile:
    """f~(t_n, k_j) = e^{-i t_n k_j^2} F~[u(t_n)](k_j)"""

    ts: np.ndarray
    ks: np.ndarray
    f_tilde_snapshots: np.ndarray
    sign: int = Sign.DEFOCUSING

    def at(self, t: float) -> np.ndarray:
        return self.f_tilde_snapshots[int(np.argmin(np.abs(self.ts - t)))]
