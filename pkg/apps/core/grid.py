from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ContractError


@dataclass(frozen=True)
class Grid:
    """
    Paired uniform x-grid and half-shifted k-grid

    The k nodes are k_j = -K + (j + 1/2) dk, symmetric about 0 and never equal to 0,
    so index j and index n_k - 1 - j are mirror frequencies.
    """

    x_half_width: float
    n_x: int
    k_half_width: float
    n_k: int

    def __post_init__(self):
        if self.x_half_width <= 0 or self.k_half_width <= 0:
            raise ContractError("Grid half-widths must be positive")
        if self.n_x < 8:
            raise ContractError(f"n_x must be at least 8, got {self.n_x}")
        if self.n_k < 8 or self.n_k % 2:
            raise ContractError(f"n_k must be even and at least 8, got {self.n_k}")

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(-self.x_half_width, self.x_half_width, self.n_x)

    @property
    def dx(self) -> float:
        return 2.0 * self.x_half_width / (self.n_x - 1)

    @property
    def dk(self) -> float:
        return 2.0 * self.k_half_width / self.n_k

    @cached_property
    def ks(self) -> np.ndarray:
        return -self.k_half_width + (np.arange(self.n_k) + 0.5) * self.dk

    def mirror(self, values: np.ndarray) -> np.ndarray:
        """Evaluate a k-array at -k (last axis)."""
        return values[..., ::-1]

    def refined(self, factor: int = 2) -> "Grid":
        """Same box, factor times the nodes in x and k."""
        return Grid(self.x_half_width, (self.n_x - 1) * factor + 1, self.k_half_width, self.n_k * factor)

    def matches_xs(self, xs: np.ndarray) -> bool:
        return len(xs) == self.n_x and np.allclose(xs, self.xs, rtol=0.0, atol=1e-12 * self.x_half_width)

    def require_same(self, other: "Grid", what: str = "operands"):
        if self != other:
            raise ContractError(f"Grid mismatch between {what}: {self} vs {other}")
