import logging

import numpy as np
from django.conf import settings
from scipy.stats import linregress

from apps.core.exceptions import ContractError, NumericalFailure
from apps.core.quadrature import centered_derivative, japanese, l2_norm, spectral_derivative
from apps.dft.models import Component, DistortedBasis
from apps.dft.services import DftService
from apps.evolve.models import Profile
from apps.jost.models import JostField
from apps.jost.services import JostService
from apps.potentials.models import Potential
from apps.potentials.services import PotentialService
from .models import DecaySeries, NormKind, SymbolKind

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 5
ZERO_MODE_FRACTION = 1e-3
SLOPE_SLACK = 0.05
PLATEAU_RATIO = 1.1
POWER_ITERATION_MAX_STEPS = 5000
DKDX_LAM_MAX = 1.0

# Upper bounds for the fitted log-log slopes
DECAY_EXPONENTS = {
    "sup": -0.5,
    "weighted_sup_zero_mode": -0.75,
    "weighted_sup_generic": -1.0,
    "smoothing_generic": -1.0,
    "smoothing_zero_mode_growth": 0.25,
}

SPATIAL_KINDS = (NormKind.SUP, NormKind.WEIGHTED_SUP, NormKind.WEIGHTED_DX_L2, NormKind.HK1_OF_PROFILE)
PROFILE_KINDS = (NormKind.SUP, NormKind.DK_L2, NormKind.HK1_OF_PROFILE)


def _t_fit_min(t_fit_min):
    return settings.SPECTRAL_LAB["EXPERIMENT"]["T_FIT_MIN"] if t_fit_min is None else float(t_fit_min)


def _checked_times(times) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(times, dtype=float))
    if ts.size == 0 or np.any(ts < 0) or np.any(np.diff(ts) <= 0):
        raise ContractError("Probe times must be non-negative and strictly increasing")
    return ts


def zero_mode(h_tilde, ks) -> complex:
    """h~(0) by midpoint interpolation between the two nodes at -dk/2 and dk/2."""
    mid = ks.size // 2
    return complex(0.5 * (h_tilde[mid - 1] + h_tilde[mid]))


def _spatial_norm(kind: str, phi, xs, dx: float, beta: float) -> float:
    if kind == NormKind.SUP:
        return float(np.max(np.abs(phi)))
    weight = japanese(xs) ** -beta
    if kind == NormKind.WEIGHTED_SUP:
        return float(np.max(weight * np.abs(phi)))
    return l2_norm(weight * spectral_derivative(phi, dx), dx)


def _profile_norm(kind: str, f, dk: float) -> float:
    if kind == NormKind.SUP:
        return float(np.max(np.abs(f)))
    derivative = l2_norm(centered_derivative(f, dk), dk)
    if kind == NormKind.DK_L2:
        return derivative
    return l2_norm(f, dk) + derivative


class DecayProbeService:
    """
    Decay rates of weighted norms along the linear flow, and empirical PDO bounds
    """

    @staticmethod
    def fit_decay_rate(series, norms=None, t_fit_min: float | None = None) -> tuple:
        """
        Least-squares slope of log(norm) against log(t)

        Args:
            series: DecaySeries, or the sample times when norms is given
            norms: Norm values paired with the times
            t_fit_min: Start of the fit window; defaults to the series' own window
                or EXPERIMENT.T_FIT_MIN

        Returns:
            (slope, ci) with ci = 1.96 times the standard error of the slope

        Raises:
            ContractError: With fewer than five samples in the window or a non-positive norm
        """
        if isinstance(series, DecaySeries):
            ts, values = series.ts, series.norms
            t_fit_min = series.t_fit_min if t_fit_min is None else t_fit_min
        else:
            ts, values = series, norms
        ts = np.asarray(ts, dtype=float)
        values = np.asarray(values, dtype=float)
        t_fit_min = _t_fit_min(t_fit_min)

        window = (ts >= t_fit_min) & (ts > 0)
        count = int(np.count_nonzero(window))
        if count < MIN_FIT_POINTS:
            raise ContractError(f"Need at least {MIN_FIT_POINTS} samples with t >= {t_fit_min:g} to fit a decay rate, got {count}")
        if not np.all(np.isfinite(values[window])) or np.any(values[window] <= 0):
            raise ContractError("Decay fit needs finite positive norms")

        fit = linregress(np.log(ts[window]), np.log(values[window]))
        return float(fit.slope), 1.96 * float(fit.stderr)

    @staticmethod
    def make_series(ts, norms, norm_kind: str, component: str = Component.FULL, beta: float = 0.0, t_fit_min=None) -> DecaySeries:
        """Wrap samples in a DecaySeries, fitted when the window holds enough positive samples."""
        ts = np.asarray(ts, dtype=float)
        norms = np.asarray(norms, dtype=float)
        t_fit_min = _t_fit_min(t_fit_min)
        slope, interval = float("nan"), (float("nan"), float("nan"))
        try:
            slope, ci = DecayProbeService.fit_decay_rate(ts, norms, t_fit_min)
            interval = (slope - ci, slope + ci)
        except ContractError as error:
            logger.info(f"No decay fit for {norm_kind} series: {error}")
        return DecaySeries(
            ts=ts,
            norms=norms,
            norm_kind=norm_kind,
            component=component,
            beta=float(beta),
            t_fit_min=t_fit_min,
            fitted_slope=slope,
            slope_ci=interval,
        )

    @staticmethod
    def check_zero_mode(basis: DistortedBasis, h_tilde):
        """
        Raises:
            ContractError: If |h~(0)| exceeds 1e-3 max|h~|
        """
        value = abs(zero_mode(h_tilde, basis.grid.ks))
        scale = float(np.max(np.abs(h_tilde)))
        if value > ZERO_MODE_FRACTION * scale:
            raise ContractError(
                f"This probe assumes h~(0) = 0, but |h~(0)| = {value:.3e} against max|h~| = {scale:.3e}; "
                f"use odd data for an even potential"
            )

    @staticmethod
    def _flow_norms(basis: DistortedBasis, h, ts, norm_kind: str, component: str, beta: float, require_zero_mode: bool) -> np.ndarray:
        if norm_kind not in SPATIAL_KINDS:
            raise ContractError(f"Norm kind must be one of {SPATIAL_KINDS}, got {norm_kind!r}")
        if component not in Component.CHOICES:
            raise ContractError(f"Component must be one of {Component.CHOICES}, got {component!r}")

        grid = basis.grid
        h = np.asarray(h, dtype=complex)
        h_tilde = DftService.forward(basis, h)
        if require_zero_mode:
            DecayProbeService.check_zero_mode(basis, h_tilde)

        norms = np.empty(ts.size)
        for n, t in enumerate(ts):
            g = np.exp(1j * t * grid.ks**2) * h_tilde
            if norm_kind == NormKind.HK1_OF_PROFILE:
                phi = DftService.component_project(basis, g, component)
                f = np.exp(-1j * t * grid.ks**2) * DftService.forward(basis, phi)
                norms[n] = _profile_norm(norm_kind, f, grid.dk)
                continue
            if t == 0 and component == Component.FULL:
                phi = h
            else:
                phi = DftService.component_project(basis, g, component)
            norms[n] = _spatial_norm(norm_kind, phi, grid.xs, grid.dx, beta)
        return norms

    @staticmethod
    def norm_series(
        basis: DistortedBasis,
        h,
        times,
        norm_kind: str,
        component: str = Component.FULL,
        beta: float = 1.0,
        require_zero_mode: bool = False,
        t_fit_min: float | None = None,
    ) -> DecaySeries:
        """
        Norms of the component phi_*(t) of e^{itH} h at each time

            sup             max |phi|
            weighted_sup    max <x>^{-beta} |phi|
            weighted_dx_L2  || <x>^{-beta} d_x phi ||_2
            Hk1_of_profile  ||f~||_2 + ||d_k f~||_2 of the component's own profile

        At t = 0 the full component is h itself, without a transform round trip.

        Args:
            basis: Distorted basis of the potential
            h: Data on the x-grid
            times: Strictly increasing, non-negative
            norm_kind: One of NormKind
            component: "0", "S" or "R"
            beta: Weight exponent (ignored by sup)
            require_zero_mode: Enforce h~(0) = 0 before evolving
            t_fit_min: Start of the fit window

        Returns:
            DecaySeries, fitted when five or more samples lie in the window

        Raises:
            ContractError: For bad times, an unknown kind or component, or h~(0) != 0 when required
        """
        ts = _checked_times(times)
        norms = DecayProbeService._flow_norms(basis, h, ts, norm_kind, component, beta, require_zero_mode)
        series = DecayProbeService.make_series(ts, norms, norm_kind, component, beta if norm_kind != NormKind.SUP else 0.0, t_fit_min)
        logger.info(f"{norm_kind} series ({component}) over {ts.size} times, slope {series.fitted_slope:.3f}")
        return series

    @staticmethod
    def smoothing_series(
        basis: DistortedBasis,
        h,
        times,
        beta: float = 1.0,
        component: str = Component.FULL,
        multiply_by_t: bool = False,
        require_zero_mode: bool = False,
        t_fit_min: float | None = None,
    ) -> DecaySeries:
        """|| <x>^{-beta} d_x (e^{itH} h)_* ||_2, times t when multiply_by_t is set."""
        ts = _checked_times(times)
        norms = DecayProbeService._flow_norms(basis, h, ts, NormKind.WEIGHTED_DX_L2, component, beta, require_zero_mode)
        if multiply_by_t:
            norms = ts * norms
        return DecayProbeService.make_series(ts, norms, NormKind.WEIGHTED_DX_L2, component, beta, t_fit_min)

    @staticmethod
    def component_defect(basis: DistortedBasis, h, t: float) -> float:
        """max |phi_S + phi_R - phi_0| / max |phi_0| at time t"""
        g = np.exp(1j * t * basis.grid.ks**2) * DftService.forward(basis, h)
        full = DftService.component_project(basis, g, Component.FULL)
        parts = DftService.component_project(basis, g, Component.SINGULAR) + DftService.component_project(basis, g, Component.REGULAR)
        scale = float(np.max(np.abs(full)))
        return float(np.max(np.abs(parts - full)) / scale) if scale > 0 else 0.0

    @staticmethod
    def profile_series(profile: Profile, norm_kind: str = NormKind.SUP, t_fit_min: float | None = None) -> DecaySeries:
        """
        ||f~(t)||_inf, ||d_k f~(t)||_2 or their H^1_k combination along a computed profile

        Raises:
            ContractError: For a kind other than sup, dk_L2 or Hk1_of_profile
        """
        if norm_kind not in PROFILE_KINDS:
            raise ContractError(f"Profile norm kind must be one of {PROFILE_KINDS}, got {norm_kind!r}")
        dk = float(profile.ks[1] - profile.ks[0])
        norms = np.array([_profile_norm(norm_kind, f, dk) for f in profile.f_tilde_snapshots])
        return DecayProbeService.make_series(profile.ts, norms, norm_kind, Component.FULL, 0.0, t_fit_min)

    @staticmethod
    def dispersive_constant(basis: DistortedBasis, h, times) -> float:
        """
        Smallest C with ||e^{itH} h||_inf <= C (t^{-1/2} ||h~||_inf + t^{-3/4} ||d_k h~||_2) at the given times

        Raises:
            ContractError: If a time is not positive
        """
        ts = _checked_times(times)
        if ts[0] <= 0:
            raise ContractError("Dispersive bound is probed at positive times only")
        grid = basis.grid
        h_tilde = DftService.forward(basis, np.asarray(h, dtype=complex))
        sup_part = float(np.max(np.abs(h_tilde)))
        dk_part = l2_norm(centered_derivative(h_tilde, grid.dk), grid.dk)
        if sup_part == 0:
            return 0.0

        ratios = []
        for t in ts:
            u = DftService.inverse(basis, np.exp(1j * t * grid.ks**2) * h_tilde)
            ratios.append(float(np.max(np.abs(u))) / (sup_part / np.sqrt(t) + dk_part / t**0.75))
        constant = max(ratios)
        logger.info(f"Dispersive constant {constant:.4f} over t in [{ts[0]:g}, {ts[-1]:g}]")
        return constant

    @staticmethod
    def pdo_matrix(symbol_kind: str, jost: JostField, beta: float = 1.0) -> np.ndarray:
        """
        Matrix of g -> 1_{x >= -1} <x>^beta int e^{i lam x} a(x, lam) g(lam) dlam from L^2_lam to L^2_x

        Rows are the nodes x >= -1, columns the k-grid; both quadrature weights are folded
        in as square roots so the spectral norm is the operator norm.

        Raises:
            ContractError: For an unknown symbol kind
        """
        grid = jost.grid
        if symbol_kind == SymbolKind.M_MINUS_1:
            symbol = jost.m_plus - 1.0
        elif symbol_kind == SymbolKind.DX_M:
            symbol = jost.dx_m_plus
        elif symbol_kind == SymbolKind.DK_M:
            symbol = jost.dk_m_plus
        elif symbol_kind == SymbolKind.DKDX_M:
            symbol = centered_derivative(jost.dx_m_plus, grid.dk)
            symbol = np.where(np.abs(grid.ks) <= DKDX_LAM_MAX, symbol, 0.0)
        else:
            raise ContractError(f"Symbol kind must be one of {SymbolKind.CHOICES}, got {symbol_kind!r}")

        rows = grid.xs >= -1.0
        xs = grid.xs[rows]
        weight = japanese(xs) ** beta * np.sqrt(grid.dx * grid.dk)
        return weight[:, None] * np.exp(1j * np.outer(xs, grid.ks)) * symbol[rows]

    @staticmethod
    def operator_norm(matrix: np.ndarray, max_steps: int = POWER_ITERATION_MAX_STEPS) -> float:
        """
        Largest singular value by power iteration on M^H M from the all-ones vector

        Raises:
            NumericalFailure: If the estimate has not settled to POWER_ITERATION after max_steps
        """
        tolerance = settings.SPECTRAL_LAB["TOLERANCES"]["POWER_ITERATION"]
        v = np.ones(matrix.shape[1], dtype=complex) / np.sqrt(matrix.shape[1])
        estimate, change = 0.0, np.inf
        for _ in range(max_steps):
            w = matrix @ v
            sigma = float(np.linalg.norm(w))
            if sigma == 0.0:
                return 0.0
            v = matrix.conj().T @ w
            v /= np.linalg.norm(v)
            change = abs(sigma - estimate) / sigma
            if change <= tolerance:
                return sigma
            estimate = sigma
        logger.error(f"Power iteration stalled after {max_steps} steps")
        raise NumericalFailure("Power iteration did not converge", metric=change)

    @staticmethod
    def pdo_norm_probe(symbol_kind: str, basis: DistortedBasis, refinements: int = 2, beta: float = 1.0, potential: Potential | None = None) -> np.ndarray:
        """
        Operator norms of one Jost-symbol PDO on the basis grid and `refinements` doublings of it

        Args:
            symbol_kind: One of SymbolKind
            basis: Supplies the base grid and Jost field
            refinements: Number of grid doublings after the base grid
            beta: Weight exponent
            potential: Overrides basis.potential for the refined solves

        Returns:
            Array of refinements + 1 norms

        Raises:
            ContractError: If refinements < 0 or there is no potential to resample
            NumericalFailure: If a power iteration does not converge
        """
        if refinements < 0:
            raise ContractError(f"refinements must be non-negative, got {refinements}")
        potential = potential or basis.potential
        if refinements and potential is None:
            raise ContractError("Refined PDO probes need the potential the basis was built from")

        jost, grid = basis.jost, basis.grid
        norms = []
        for level in range(refinements + 1):
            if level:
                grid = grid.refined()
                jost = JostService.solve_jost(PotentialService.resample(potential, grid), grid)
            norms.append(DecayProbeService.operator_norm(DecayProbeService.pdo_matrix(symbol_kind, jost, beta)))
            logger.info(f"{symbol_kind} operator norm on {grid.n_x}x{grid.n_k}: {norms[-1]:.6f}")
        return np.array(norms)

    @staticmethod
    def is_plateau(norms) -> bool:
        """Boundedness under refinement: the last norm is within 10% above the one before."""
        norms = np.asarray(norms, dtype=float)
        if norms.size < 2:
            return False
        return bool(norms[-1] <= PLATEAU_RATIO * norms[-2])

    @staticmethod
    def slope_within(series: DecaySeries, exponent: float) -> bool:
        return series.has_fit and series.fitted_slope <= exponent + SLOPE_SLACK
