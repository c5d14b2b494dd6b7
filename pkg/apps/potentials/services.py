import logging
from pathlib import Path

import numpy as np
from scipy.special import hyp2f1

from apps.core.exceptions import ContractError, GuardError, LabError
from apps.core.grid import Grid
from apps.core.quadrature import integrate, japanese, tail_from_left, tail_from_right, trapezoid_weights
from .models import Direction, Potential, PotentialKind, TailWeight

logger = logging.getLogger(__name__)

GAMMA_EPS = 0.01
DEFAULT_GAMMAS = (0.0, 1.0, 2.0, 2.5 + GAMMA_EPS, 3.5 + GAMMA_EPS)


def _bracket_antiderivative(x, s):
    """Odd antiderivative of <y>^s, G(x) = x 2F1(-s/2, 1/2; 3/2; -x^2)."""
    x = np.asarray(x, dtype=float)
    return x * hyp2f1(-0.5 * s, 0.5, 1.5, -(x**2))


def _hat_integrals(xs: np.ndarray, a: float, b: float) -> np.ndarray:
    """Exact integrals of the piecewise-linear hat functions of xs over [a, b]."""
    h = xs[1] - xs[0]
    left_lo, right_hi = xs - h, xs + h

    ya, yb = np.clip(a, left_lo, xs), np.clip(b, left_lo, xs)
    rising = ((yb - left_lo) ** 2 - (ya - left_lo) ** 2) / (2.0 * h)

    ya, yb = np.clip(a, xs, right_hi), np.clip(b, xs, right_hi)
    falling = ((right_hi - ya) ** 2 - (right_hi - yb) ** 2) / (2.0 * h)
    return rising + falling


class PotentialService:
    """
    Construction and weighted norms of admissible potentials
    Barriers are integrated in closed form; sampled potentials by the trapezoid rule
    """

    @staticmethod
    def make_barrier(height: float, half_width: float, grid: Grid) -> Potential:
        """
        Square barrier V = K on [-L, L], 0 elsewhere

        Args:
            height: K >= 0
            half_width: L > 0, strictly inside the grid box
            grid: Grid the potential is sampled on

        Returns:
            Potential with kind=barrier and closed-form gamma norms

        Raises:
            GuardError: If K < 0
            ContractError: If L is not inside the box
        """
        if height < 0:
            raise GuardError(min_value=height, index=grid.n_x // 2)
        if half_width <= 0 or half_width >= grid.x_half_width:
            raise ContractError(f"Barrier half-width {half_width} must lie in (0, {grid.x_half_width})")

        xs = grid.xs
        vs = np.where(np.abs(xs) <= half_width, float(height), 0.0)
        measure = float(height) * _hat_integrals(xs, -half_width, half_width)

        potential = Potential(
            xs=xs,
            vs=vs,
            kind=PotentialKind.BARRIER,
            measure=measure,
            params={"height": float(height), "half_width": float(half_width)},
        )
        for gamma in DEFAULT_GAMMAS:
            PotentialService.weighted_l1_norm(potential, gamma)

        logger.info(f"Built {potential.describe()} on {grid.n_x} nodes")
        return potential

    @staticmethod
    def make_sampled(xs, vs, allow_signed: bool = False, label: str = "") -> Potential:
        """
        Wrap samples V(x_i) on a uniform grid

        Raises:
            ContractError: If the arrays differ in length or xs is not uniform increasing
            GuardError: If some V(x_i) < 0 and allow_signed is False
        """
        xs = np.asarray(xs, dtype=float)
        vs = np.asarray(vs, dtype=float)
        if xs.shape != vs.shape or xs.ndim != 1 or xs.size < 8:
            raise ContractError(f"xs and vs must be 1d arrays of equal length >= 8, got {xs.shape} and {vs.shape}")

        steps = np.diff(xs)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ContractError("Sampled potential needs a uniform, strictly increasing x-grid")

        if not allow_signed and np.any(vs < 0):
            index = int(np.argmin(vs))
            raise GuardError(min_value=float(vs[index]), index=index)
        if allow_signed and np.any(vs < 0):
            logger.warning("Signed potential accepted on the caller's assertion that H has no eigenvalues")

        measure = trapezoid_weights(xs.size, float(steps[0])) * vs
        kind = PotentialKind.SAMPLED
        potential = Potential(xs=xs, vs=vs, kind=kind, measure=measure, allow_signed=allow_signed, label=label)
        for gamma in DEFAULT_GAMMAS:
            PotentialService.weighted_l1_norm(potential, gamma)
        return potential

    @staticmethod
    def make_zero(grid: Grid) -> Potential:
        xs = grid.xs
        potential = Potential(xs=xs, vs=np.zeros_like(xs), kind=PotentialKind.ZERO, measure=np.zeros_like(xs), label="zero")
        for gamma in DEFAULT_GAMMAS:
            potential.gamma_norms[gamma] = 0.0
        return potential

    @staticmethod
    def resample(potential: Potential, grid: Grid) -> Potential:
        """Same potential on another grid; barriers are rebuilt in closed form, samples interpolated linearly."""
        if potential.kind == PotentialKind.BARRIER:
            return PotentialService.make_barrier(potential.params["height"], potential.params["half_width"], grid)
        if potential.is_zero:
            return PotentialService.make_zero(grid)
        vs = np.interp(grid.xs, potential.xs, potential.vs, left=0.0, right=0.0)
        return PotentialService.make_sampled(grid.xs, vs, allow_signed=potential.allow_signed, label=potential.label)

    @staticmethod
    def make_gaussian(amplitude: float, width: float, grid: Grid) -> Potential:
        """Sampled A exp(-x^2 / w^2)."""
        if width <= 0:
            raise ContractError(f"Gaussian width must be positive, got {width}")
        vs = amplitude * np.exp(-((grid.xs / width) ** 2))
        return PotentialService.make_sampled(grid.xs, vs, label=f"gaussian(A={amplitude:g}, w={width:g})")

    @staticmethod
    def weighted_l1_norm(potential: Potential, gamma: float) -> float:
        """
        ||<x>^gamma V||_{L^1}, cached on the potential

        Barriers use the closed form 2K G(L); everything else the trapezoid rule.
        """
        if gamma < 0:
            raise ContractError(f"gamma must be non-negative, got {gamma}")
        gamma = float(gamma)
        if gamma in potential.gamma_norms:
            return potential.gamma_norms[gamma]

        if potential.kind == PotentialKind.BARRIER:
            height, half_width = potential.params["height"], potential.params["half_width"]
            value = float(2.0 * height * _bracket_antiderivative(half_width, gamma))
        else:
            value = float(integrate(japanese(potential.xs) ** gamma * np.abs(potential.vs), potential.xs))

        potential.gamma_norms[gamma] = value
        return value

    @staticmethod
    def tail_weight(potential: Potential, s: float, direction: Direction | str) -> TailWeight:
        """
        Tail integrals W_+^s (from the right) or W_-^s (from the left)

        Raises:
            ContractError: If s < 0
        """
        if s < 0:
            raise ContractError(f"Tail weight order must be non-negative, got {s}")
        direction = Direction(direction)
        xs = potential.xs

        if potential.kind == PotentialKind.BARRIER:
            height, half_width = potential.params["height"], potential.params["half_width"]
            clipped = _bracket_antiderivative(np.clip(xs, -half_width, half_width), s)
            edge = _bracket_antiderivative(half_width, s)
            values = height * (edge - clipped) if direction == Direction.PLUS else height * (clipped + edge)
        else:
            density = japanese(xs) ** s * np.abs(potential.vs)
            values = tail_from_right(density, xs) if direction == Direction.PLUS else tail_from_left(density, xs)

        # Cumulative sums can dip below zero by roundoff
        values = np.maximum(values, 0.0)
        if direction == Direction.PLUS:
            values = np.minimum.accumulate(values)
        else:
            values = np.maximum.accumulate(values)
        return TailWeight(s=float(s), direction=direction, values=values)

    @staticmethod
    def read_csv(path, grid: Grid | None = None, allow_signed: bool = False) -> Potential:
        """
        Load a potential from a CSV file with header `x,v`

        Raises:
            LabError: If the file cannot be read
            ContractError: If the samples do not sit on `grid`
        """
        path = Path(path)
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except OSError as e:
            raise LabError(f"Cannot read potential samples from {path}: {e}") from e

        potential = PotentialService.make_sampled(data[:, 0], data[:, 1], allow_signed=allow_signed, label=path.name)
        if grid is not None and not grid.matches_xs(potential.xs):
            raise ContractError(f"Potential samples in {path} do not lie on the run grid")
        return potential

    @staticmethod
    def write_csv(potential: Potential, path):
        np.savetxt(path, np.column_stack([potential.xs, potential.vs]), delimiter=",", header="x,v", comments="", fmt="%.17g")
