import logging

import numpy as np
from django.conf import settings
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.interpolate import CubicSpline
from scipy.stats import linregress

from apps.core.exceptions import ContractError, NumericalFailure
from apps.core.grid import Grid
from apps.dft.models import DistortedBasis
from apps.dft.services import DftService
from apps.evolve.models import Profile, Trajectory
from .models import ModScatReport

logger = logging.getLogger(__name__)

SNAPSHOTS_PER_DECADE = 8
PHYSICAL_T_MIN = 10.0


def cutoff_bump(s):
    """Frozen even window psi(s) = e^{-s^2} / sqrt(2 pi), so psi(0) matches phi^(0)."""
    return np.exp(-(np.asarray(s, dtype=float) ** 2)) / np.sqrt(2.0 * np.pi)


def _alpha(alpha):
    return settings.SPECTRAL_LAB["EXPERIMENT"]["ALPHA"] if alpha is None else alpha


class AsymptoticsService:
    """
    Checks of the modified-scattering picture on a computed profile
    """

    @staticmethod
    def modified_profile(profile: Profile, ks_probe=None, alpha: float | None = None) -> ModScatReport:
        """
        Build w from the profile snapshots and collect the ODE residuals and Cauchy gaps

        The phase integral is a trapezoid sum over the snapshot times, so the snapshots
        should be dense in log t.

        Args:
            profile: Profile snapshots (t = 0 first when the run starts at 0)
            ks_probe: Frequencies to follow; nearest grid nodes are used. Defaults to all of ks
            alpha: Low-frequency exclusion exponent, |k| >= t^{-3 alpha}

        Returns:
            ModScatReport
        """
        ts = np.asarray(profile.ts, dtype=float)
        if ks_probe is None:
            index = np.arange(profile.ks.size)
        else:
            index = np.array([int(np.argmin(np.abs(profile.ks - k))) for k in np.atleast_1d(ks_probe)])
        snapshots = profile.f_tilde_snapshots[:, index]

        positive = ts[ts > 0]
        if positive.size > 1:
            decades = np.log10(positive[-1] / positive[0])
            if decades > 0 and (positive.size - 1) / decades < SNAPSHOTS_PER_DECADE:
                logger.warning(f"Only {(positive.size - 1) / decades:.1f} snapshots per decade; the phase integral is coarse")

        if ts.size > 1:
            phase = cumulative_trapezoid(np.abs(snapshots) ** 2 / (1.0 + ts[:, None]), ts, axis=0, initial=0.0)
        else:
            phase = np.zeros(snapshots.shape)
        w = np.exp(-0.5j * profile.sign * phase) * snapshots

        residual_times, residual_norms, excluded = [], [], 0
        for n in range(1, ts.size - 1):
            if ts[n] <= 0:
                continue
            residual = AsymptoticsService.ode_residual(profile, ts[n], alpha)[index]
            excluded = max(excluded, int(np.count_nonzero(np.isnan(residual))))
            if np.all(np.isnan(residual)):
                continue
            residual_times.append(ts[n])
            residual_norms.append(float(np.nanmax(residual)))
        residual_times, residual_norms = np.array(residual_times), np.array(residual_norms)

        fitted_rho = float("nan")
        window = (residual_times >= settings.SPECTRAL_LAB["EXPERIMENT"]["T_FIT_MIN"]) & (residual_norms > 0)
        if np.count_nonzero(window) >= 3:
            fit = linregress(np.log(residual_times[window]), np.log(residual_norms[window]))
            fitted_rho = float(-fit.slope - 1.0)

        gap_times, gaps = AsymptoticsService.cauchy_gaps(ts, w)
        logger.info(f"Modified profile over {ts.size} snapshots, {index.size} probe frequencies, rho ~ {fitted_rho:.3f}")
        return ModScatReport(
            ts=ts,
            ks_probe=profile.ks[index],
            w_snapshots=w,
            W_inf_estimate=w[-1].copy(),
            sign=profile.sign,
            residual_times=residual_times,
            ode_residual_norms=residual_norms,
            gap_times=gap_times,
            cauchy_gaps=gaps,
            fitted_rho=fitted_rho,
            excluded_low_k=excluded,
        )

    @staticmethod
    def ode_residual(profile: Profile, t: float, alpha: float | None = None) -> np.ndarray:
        """
        |i d_t f~ + (sigma / 2t) |f~|^2 f~| at the snapshot nearest t

        The time derivative is the centered difference over the neighbouring snapshots.
        Frequencies with |k| < t^{-3 alpha} are reported as NaN.

        Raises:
            ContractError: If the snapshot has no neighbour on either side or t <= 0
        """
        ts = np.asarray(profile.ts, dtype=float)
        n = int(np.argmin(np.abs(ts - t)))
        if n == 0 or n == ts.size - 1 or ts[n] <= 0:
            raise ContractError(f"ODE residual at t={t:g} needs a positive snapshot with neighbours on both sides")
        snapshots = profile.f_tilde_snapshots
        derivative = (snapshots[n + 1] - snapshots[n - 1]) / (ts[n + 1] - ts[n - 1])
        f = snapshots[n]
        residual = np.abs(1j * derivative + profile.sign / (2.0 * ts[n]) * np.abs(f) ** 2 * f)

        low = np.abs(profile.ks) < ts[n] ** (-3.0 * _alpha(alpha))
        if np.any(low):
            logger.debug(f"Excluding {np.count_nonzero(low)} frequencies below t^(-3 alpha) at t={ts[n]:g}")
        return np.where(low, np.nan, residual)

    @staticmethod
    def cauchy_gaps(ts, w, t_start: float | None = None) -> tuple:
        """
        Gaps max_k |w(t_{n+1}) - w(t_n)| over the dyadic times t_n = t_start 2^n

        Returns:
            (times, gaps) with times the snapshot times actually used
        """
        ts = np.asarray(ts, dtype=float)
        t_start = settings.SPECTRAL_LAB["EXPERIMENT"]["T_FIT_MIN"] if t_start is None else t_start
        if ts.size == 0 or ts[-1] < t_start:
            return np.zeros(0), np.zeros(0)
        dyadic = t_start * 2.0 ** np.arange(int(np.floor(np.log2(ts[-1] / t_start))) + 1)
        indices = sorted({int(np.argmin(np.abs(ts - target))) for target in dyadic})
        gaps = np.array([float(np.max(np.abs(w[b] - w[a]))) for a, b in zip(indices, indices[1:])])
        return ts[indices], gaps

    @staticmethod
    def physical_compare(profile: Profile, trajectory: Trajectory, grid: Grid, t: float, report: ModScatReport | None = None) -> dict:
        """
        Compare u(t) with its stationary-phase forms

            linear:    e^{-ix^2/4t} / sqrt(-2it) f~(t, -x/2t)
            modified:  the same with f~ replaced by exp(i sigma/2 |W|^2 log(1+t)) W

        Errors are sup norms multiplied by t^{1/2}. Profile values off the grid come from cubic
        splines of the real and imaginary parts; points with -x/2t outside the k-range are
        excluded and counted.

        Raises:
            ContractError: If t < 10
        """
        if t < PHYSICAL_T_MIN:
            raise ContractError(f"Physical-space asymptotics are compared for t >= {PHYSICAL_T_MIN:g}, got {t:g}")
        state = trajectory.at(t)
        t = state.t
        f = profile.at(t)
        xs = grid.xs
        ks = profile.ks
        targets = -xs / (2.0 * t)
        inside = (targets >= ks[0]) & (targets <= ks[-1])
        excluded = int(np.count_nonzero(~inside))
        prefactor = np.exp(-1j * xs[inside] ** 2 / (4.0 * t)) / np.sqrt(-2j * t)

        def spline(values, points):
            return CubicSpline(ks, values.real)(points) + 1j * CubicSpline(ks, values.imag)(points)

        u = state.u[inside]
        lin_err = float(np.max(np.abs(u - prefactor * spline(f, targets[inside])))) * np.sqrt(t)

        mod_err = float("nan")
        if report is not None:
            W = report.W_inf_estimate
            if report.ks_probe.size != ks.size:
                raise ContractError("The modified form needs W on the full frequency grid")
            modulated = np.exp(0.5j * report.sign * np.abs(W) ** 2 * np.log1p(t)) * W
            mod_err = float(np.max(np.abs(u - prefactor * spline(modulated, targets[inside])))) * np.sqrt(t)

        if excluded:
            logger.info(f"{excluded} x-points fall outside the frequency range at t={t:g}")
        return {"t": t, "lin_err": lin_err, "mod_err": mod_err, "excluded": excluded}

    @staticmethod
    def negative_time_map(basis: DistortedBasis, f) -> float:
        """
        Relative L^2 mismatch between F~[conj f] and the scattering-matrix formula

            k < 0:  T(k) conj f~(-k) + R_+(k) conj f~(k)
            k > 0:  T(-k) conj f~(-k) + R_-(-k) conj f~(k)
        """
        data = basis.scattering
        conj_transform = np.conj(DftService.forward(basis, f))
        mirrored = conj_transform[::-1]
        negative = basis.grid.ks < 0
        formula = np.where(
            negative,
            data.T * mirrored + data.R_plus * conj_transform,
            data.T[::-1] * mirrored + data.R_minus[::-1] * conj_transform,
        )
        direct = DftService.forward(basis, np.conj(np.asarray(f)))
        norm = np.linalg.norm(direct)
        if norm == 0:
            return 0.0
        return float(np.linalg.norm(direct - formula) / norm)

    @staticmethod
    def stationary_phase_oracle(g, t: float, K: float, alpha: float | None = None, reach: float = 8.0, rtol: float = 1e-9) -> tuple:
        """
        I(t, K) = e^{-itK^2} p.v. int e^{itq^2} g(q) psi(q - K) / (q - K) dq against its leading term

        The principal value is taken symmetrically, s -> +-s about q = K, on [0, reach] by
        composite Simpson with the node count doubled until the value settles.

        Args:
            g: Callable profile
            t: Time
            K: Frequency, |K| > t^{-3 alpha}

        Returns:
            (leading, quadrature) with leading = i pi psi(0) sign(tK) g(K) = i sqrt(pi/2) sign(tK) g(K)

        Raises:
            ContractError: If |K| <= t^{-3 alpha}
            NumericalFailure: If the quadrature does not settle
        """
        threshold = abs(t) ** (-3.0 * _alpha(alpha)) if t != 0 else np.inf
        if abs(K) <= threshold:
            raise ContractError(f"|K| = {abs(K):g} is inside the excluded band |K| <= t^(-3 alpha) = {threshold:g}")

        def integrand(s):
            plus = np.exp(1j * t * ((K + s) ** 2 - K**2)) * g(K + s)
            minus = np.exp(1j * t * ((K - s) ** 2 - K**2)) * g(K - s)
            values = np.empty(s.shape, dtype=complex)
            regular = s > 0
            values[regular] = (plus[regular] - minus[regular]) * cutoff_bump(s[regular]) / s[regular]
            # Limit at s = 0 is the derivative of the bracket, 2 d/ds at s = 0
            h = 1e-6
            values[~regular] = (
                np.exp(1j * t * ((K + h) ** 2 - K**2)) * g(K + h) - np.exp(1j * t * ((K - h) ** 2 - K**2)) * g(K - h)
            ) * cutoff_bump(0.0) / h
            return values

        nodes = 2**12 + 1
        previous = None
        while nodes <= 2**23 + 1:
            s = np.linspace(0.0, reach, nodes)
            value = simpson(integrand(s), x=s)
            if previous is not None and abs(value - previous) <= rtol * max(1.0, abs(value)):
                break
            previous = value
            nodes = 2 * nodes - 1
        else:
            logger.error(f"Stationary-phase quadrature did not settle at t={t:g}, K={K:g}")
            raise NumericalFailure("Principal-value quadrature did not converge", metric=abs(value - previous))

        leading = 1j * np.pi * cutoff_bump(0.0) * np.sign(t * K) * complex(g(np.array(K)))
        return complex(leading), complex(value)

    @staticmethod
    def profile_sup_bound(profile: Profile, eta: float) -> tuple:
        """(sup_t ||f~(t)||_inf, whether it stays below 3 eta)"""
        value = float(np.max(np.abs(profile.f_tilde_snapshots))) if profile.f_tilde_snapshots.size else 0.0
        return value, value <= 3.0 * eta

    @staticmethod
    def decay_bound_check(trajectory: Trajectory, eta: float, t_min: float = 1.0, t_max: float = 200.0) -> tuple:
        """(max over snapshots in [t_min, t_max] of ||u(t)||_inf (1+t)^{1/2}, whether it stays below 3 eta)"""
        values = [float(np.max(np.abs(state.u))) * np.sqrt(1.0 + state.t) for state in trajectory.states if t_min <= state.t <= t_max]
        value = max(values, default=0.0)
        if value > 3.0 * eta:
            logger.warning(f"Dispersive bound exceeded: {value:.3e} > 3 eta = {3.0 * eta:.3e}")
        return value, value <= 3.0 * eta
