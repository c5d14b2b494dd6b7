from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class PotentialKind(str, Enum):
    BARRIER = "barrier"
    SAMPLED = "sampled"
    ZERO = "zero"


class Direction(str, Enum):
    PLUS = "+"
    MINUS = "-"


@dataclass(frozen=True, eq=False)
class Potential:
    """
    Real potential sampled on the x-grid

    `measure` is the discrete measure the Volterra solver integrates against
    (quadrature weight times V at each node). `gamma_norms` caches
    ||<x>^gamma V||_{L^1} by gamma.
    """

    xs: np.ndarray
    vs: np.ndarray
    kind: PotentialKind
    measure: np.ndarray
    params: dict = field(default_factory=dict)
    gamma_norms: dict = field(default_factory=dict)
    allow_signed: bool = False
    label: str = ""

    @property
    def dx(self) -> float:
        return float(self.xs[1] - self.xs[0])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.measure)

    @property
    def support_right(self) -> float:
        """Largest node carrying weight; -inf for V = 0."""
        nonzero = np.flatnonzero(self.measure)
        return float(self.xs[nonzero[-1]]) if nonzero.size else -np.inf

    def describe(self) -> str:
        if self.kind == PotentialKind.BARRIER:
            return f"barrier(K={self.params['height']:g}, L={self.params['half_width']:g})"
        return self.label or self.kind.value


@dataclass(frozen=True, eq=False)
class TailWeight:
    """W_+^s(x) = int_x^inf <y>^s |V| dy, W_-^s(x) = int_-inf^x <y>^s |V| dy"""

    s: float
    direction: Direction
    values: np.ndarray
