import logging
from pathlib import Path

import numpy as np
from django.conf import settings
from scipy.integrate import solve_ivp

from apps.core.exceptions import ContractError, GuardError, NumericalFailure
from apps.core.grid import Grid
from apps.core.quadrature import japanese
from apps.potentials.models import Potential, PotentialKind
from apps.potentials.services import PotentialService
from .models import JostBoundReport, JostField

logger = logging.getLogger(__name__)

# Taylor coefficients of E1'(a) for E1(a) = (e^a - 1)/a, i.e. (n + 1)/(n + 2)!
_E1_PRIME_SERIES = np.array([1 / 2, 1 / 3, 1 / 8, 1 / 30, 1 / 144, 1 / 840, 1 / 5760, 1 / 45360, 1 / 403200])
# Taylor coefficients of d/dw sin(sqrt w)/sqrt w, i.e. (-1)^{n+1} (n + 1)/(2n + 3)!
_SIGMA_PRIME_SERIES = np.array([-1 / 6, 1 / 60, -1 / 1680, 1 / 90720, -1 / 7983360])


def _step_kernel(lams: np.ndarray, h: float):
    """
    Kernel values for one grid step h at every frequency

    Returns e^{2i lam h}, D_lam(h) = (e^{2i lam h} - 1)/(2i lam) and its lam-derivative,
    all evaluated through entire-function forms so lam = 0 needs no special case.
    """
    theta = lams * h
    step = np.exp(2j * theta)
    kernel = h * np.exp(1j * theta) * np.sinc(theta / np.pi)

    a = 2j * theta
    small = np.abs(theta) < 0.05
    e1_prime = np.empty_like(a)
    e1_prime[small] = np.polynomial.polynomial.polyval(a[small], _E1_PRIME_SERIES)
    large = a[~small]
    e1_prime[~small] = (large * np.exp(large) - np.exp(large) + 1.0) / large**2
    kernel_dlam = 2j * h**2 * e1_prime
    return step, kernel, kernel_dlam


def _backward_sweep(mu: np.ndarray, h: float, lams: np.ndarray):
    """
    Solve m(x_i) = 1 + sum_{j > i} D_lam(x_j - x_i) mu_j m(x_j) from the right

    The sums are carried by the step recursion
        Q_i = e^{2i lam h} Q_{i+1} + D_lam(h) S_i,  S_i = sum_{j > i} mu_j m_j,
    differentiated once in lam for d_lam m, and G_i = sum_{j > i} e^{2i lam (x_j - x_i)} mu_j m_j
    gives d_x m = -(G_i + mu_i m_i / 2).
    """
    n, width = mu.size, lams.size
    step, kernel, kernel_dlam = _step_kernel(lams, h)

    m = np.ones((n, width), dtype=complex)
    dlam = np.zeros((n, width), dtype=complex)
    dx = np.zeros((n, width), dtype=complex)

    q = np.zeros(width, dtype=complex)
    q_dlam = np.zeros(width, dtype=complex)
    s = np.zeros(width, dtype=complex)
    s_dlam = np.zeros(width, dtype=complex)
    g = np.zeros(width, dtype=complex)

    dx[n - 1] = -0.5 * mu[n - 1]
    for i in range(n - 2, -1, -1):
        weight = mu[i + 1]
        if weight != 0.0:
            s = s + weight * m[i + 1]
            s_dlam = s_dlam + weight * dlam[i + 1]
            g = step * (g + weight * m[i + 1])
        else:
            g = step * g
        q_dlam = step * (q_dlam + 2j * h * q) + kernel_dlam * s + kernel * s_dlam
        q = step * q + kernel * s

        m[i] = 1.0 + q
        dlam[i] = q_dlam
        dx[i] = -(g + 0.5 * mu[i] * m[i])
    return m, dlam, dx


def _strict_right_sums(values: np.ndarray) -> np.ndarray:
    """Row i holds the sum of rows j > i."""
    inclusive = np.cumsum(values[::-1], axis=0)[::-1]
    return inclusive - values


def _volterra_residual(mu: np.ndarray, xs: np.ndarray, lams: np.ndarray, m: np.ndarray) -> float:
    """Relative residual of the right Volterra equation rebuilt from separable sums."""
    weighted = mu[:, None] * m
    rebuilt = np.empty_like(m)

    nonzero = lams != 0
    phase = np.exp(2j * np.outer(xs, lams[nonzero]))
    tail_phase = _strict_right_sums(phase * weighted[:, nonzero])
    tail_plain = _strict_right_sums(weighted[:, nonzero])
    rebuilt[:, nonzero] = (np.conj(phase) * tail_phase - tail_plain) / (2j * lams[nonzero])

    if np.any(~nonzero):
        w0 = weighted[:, ~nonzero]
        rebuilt[:, ~nonzero] = _strict_right_sums(xs[:, None] * w0) - xs[:, None] * _strict_right_sums(w0)

    residual = np.max(np.abs(m - 1.0 - rebuilt))
    return float(residual / max(1.0, np.max(np.abs(m))))


def _sigma_prime(w: np.ndarray) -> np.ndarray:
    """d/dw of sin(sqrt w)/sqrt w, entire in w."""
    out = np.empty_like(w)
    small = np.abs(w) < 0.01
    out[small] = np.polynomial.polynomial.polyval(w[small], _SIGMA_PRIME_SERIES)
    root = np.sqrt(w[~small])
    out[~small] = (np.cos(root) - np.sinc(root / np.pi)) / (2.0 * w[~small])
    return out


def _carry(lams: np.ndarray, z: np.ndarray, s: np.ndarray, start):
    """
    Carry (psi, psi') and their lam-derivatives a signed distance s through constant V

    With z = lam^2 - V the propagator is [[cos(sqrt(z) s), S], [-z S, cos(sqrt(z) s)]],
    S = sin(sqrt(z) s)/sqrt(z); both entries are entire in z and dz/dlam = 2 lam.
    """
    psi0, dpsi0, psi0_lam, dpsi0_lam = (np.asarray(value)[None, :] for value in start)
    z = np.asarray(z, dtype=complex)[None, :]
    s = np.asarray(s, dtype=float)[:, None]

    root = np.sqrt(z) * s
    cos_term = np.cos(root)
    sin_term = s * np.sinc(root / np.pi)
    cos_dz = -0.5 * s * sin_term
    sin_dz = s**3 * _sigma_prime(z * s**2)
    two_lam = 2.0 * lams[None, :]

    psi = cos_term * psi0 + sin_term * dpsi0
    dpsi = -z * sin_term * psi0 + cos_term * dpsi0
    psi_lam = two_lam * (cos_dz * psi0 + sin_dz * dpsi0) + cos_term * psi0_lam + sin_term * dpsi0_lam
    dpsi_lam = two_lam * (-(sin_term + z * sin_dz) * psi0 + cos_dz * dpsi0) - z * sin_term * psi0_lam + cos_term * dpsi0_lam
    return psi, dpsi, psi_lam, dpsi_lam


def _barrier_field(height: float, half_width: float, xs: np.ndarray, lams: np.ndarray):
    """
    Exact m_+ of V = K 1_{[-L, L]} with its lam- and x-derivatives

    psi_+ = e^{i lam x} for x >= L; the state at x = L is carried across the barrier and
    then across the free region to its left, so no quadrature error enters.
    """
    m = np.ones((xs.size, lams.size), dtype=complex)
    dlam = np.zeros_like(m)
    dx = np.zeros_like(m)

    edge = np.exp(1j * lams * half_width)
    right = (edge, 1j * lams * edge, 1j * half_width * edge, (1j - lams * half_width) * edge)
    left = tuple(value[0] for value in _carry(lams, lams**2 - height, np.array([-2.0 * half_width]), right))

    regions = (
        ((xs >= -half_width) & (xs < half_width), lams**2 - height, half_width, right),
        (xs < -half_width, lams**2, -half_width, left),
    )
    for rows, z, origin, start in regions:
        if not np.any(rows):
            continue
        psi, dpsi, psi_lam, _ = _carry(lams, z, xs[rows] - origin, start)
        phase = np.exp(-1j * np.outer(xs[rows], lams))
        m[rows] = phase * psi
        dlam[rows] = phase * (psi_lam - 1j * xs[rows, None] * psi)
        dx[rows] = phase * (dpsi - 1j * lams[None, :] * psi)
    return m, dlam, dx


def _wronskian_residual(m: np.ndarray, dx: np.ndarray, lams: np.ndarray) -> float:
    """
    Relative defect of W[psi(lam), psi(-lam)] = -2i lam across x

    In terms of m: m conj(m') - m' conj(m) - 2i lam |m|^2.
    """
    lam = lams[None, :]
    wronskian = m * np.conj(dx) - dx * np.conj(m) - 2j * lam * np.abs(m) ** 2
    scale = max(1.0, float(np.max(2.0 * np.abs(lam) * np.abs(m) ** 2)))
    return float(np.max(np.abs(wronskian + 2j * lam)) / scale)


class JostService:
    """
    Jost solutions m_pm(x, k) of the Volterra equations with kernel D_lam

    The potential enters through its discrete measure, so the computed m_pm are the
    exact Jost functions of the measure and all scattering identities hold to roundoff.
    Square barriers skip the measure: they are piecewise constant, and the
    constant-potential propagator gives their Jost functions in closed form.
    """

    @staticmethod
    def solve_jost(potential: Potential, grid: Grid) -> JostField:
        """
        Solve for m_pm with their k- and x-derivatives

        Args:
            potential: Potential sampled on grid.xs
            grid: Grid providing the k nodes

        Returns:
            JostField including the k = 0 columns

        Raises:
            ContractError: If the potential is not sampled on grid
            GuardError: If V < 0 somewhere without the signed override
            NumericalFailure: If the rebuilt Volterra residual (the Wronskian defect for
                barriers) exceeds the Volterra tolerance
        """
        if not grid.matches_xs(potential.xs):
            raise ContractError(f"Potential {potential.describe()} is not sampled on {grid}")
        if not potential.allow_signed and np.any(potential.vs < 0):
            index = int(np.argmin(potential.vs))
            raise GuardError(min_value=float(potential.vs[index]), index=index)

        logger.info(f"Solving Jost equations for {potential.describe()} on {grid.n_x}x{grid.n_k} nodes")

        lams = np.append(grid.ks, 0.0)
        closed_form = potential.kind == PotentialKind.BARRIER and not potential.is_zero

        if closed_form:
            height, half_width = potential.params["height"], potential.params["half_width"]
            m_plus, dk_plus, dx_plus = _barrier_field(height, half_width, grid.xs, lams)
            # The barrier is even, so m_-(x) = m_+(-x)
            m_minus, dk_minus, rev_dx = _barrier_field(height, half_width, -grid.xs, lams)
            dx_minus = -rev_dx
            residual = max(_wronskian_residual(m_plus, dx_plus, lams), _wronskian_residual(m_minus, dx_minus, lams))
        else:
            mu = potential.measure
            h = grid.dx
            m_plus, dk_plus, dx_plus = _backward_sweep(mu, h, lams)
            # m_-(x; V) = m_+(-x; V(-.)) on the symmetric x-grid
            rev_m, rev_dk, rev_dx = _backward_sweep(mu[::-1], h, lams)
            m_minus, dk_minus, dx_minus = rev_m[::-1], rev_dk[::-1], -rev_dx[::-1]
            residual = max(
                _volterra_residual(mu, grid.xs, lams, m_plus),
                _volterra_residual(mu[::-1], grid.xs, lams, rev_m),
            )
        tolerance = settings.SPECTRAL_LAB["TOLERANCES"]["VOLTERRA_RESIDUAL"]
        if residual > tolerance:
            logger.error(f"Volterra residual {residual:.3e} exceeds {tolerance:.1e} for {potential.describe()}")
            raise NumericalFailure("Volterra sweep diverged", metric=residual)

        logger.info(f"Jost sweep done, residual {residual:.3e}")
        return JostField(
            grid=grid,
            m_plus=np.ascontiguousarray(m_plus[:, :-1]),
            m_minus=np.ascontiguousarray(m_minus[:, :-1]),
            dk_m_plus=np.ascontiguousarray(dk_plus[:, :-1]),
            dk_m_minus=np.ascontiguousarray(dk_minus[:, :-1]),
            dx_m_plus=np.ascontiguousarray(dx_plus[:, :-1]),
            dx_m_minus=np.ascontiguousarray(dx_minus[:, :-1]),
            m_plus_zero=m_plus[:, -1].copy(),
            m_minus_zero=m_minus[:, -1].copy(),
            max_residual=residual,
            closed_form=closed_form,
        )

    @staticmethod
    def eigenfunction(jost: JostField, side: str) -> np.ndarray:
        """psi_+ = e^{ikx} m_+, psi_- = e^{-ikx} m_-"""
        phase = np.exp(1j * np.outer(jost.grid.xs, jost.grid.ks))
        if side == "+":
            return phase * jost.m_plus
        if side == "-":
            return np.conj(phase) * jost.m_minus
        raise ContractError(f"side must be '+' or '-', got {side!r}")

    @staticmethod
    def eigenfunction_residual(jost: JostField, potential: Potential, side: str, k_max: float | None = None) -> float:
        """Max over interior nodes of |psi'' - (V - k^2) psi| by centered second differences."""
        psi = JostService.eigenfunction(jost, side)
        ks = jost.grid.ks
        columns = np.abs(ks) <= k_max if k_max is not None else np.ones(ks.size, dtype=bool)
        psi = psi[:, columns]
        second = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / jost.grid.dx**2
        rhs = (potential.vs[1:-1, None] - ks[columns] ** 2) * psi[1:-1]
        return float(np.max(np.abs(second - rhs)))

    @staticmethod
    def jost_bound_report(jost: JostField, potential: Potential) -> JostBoundReport:
        """
        Sup of |d_k^s (m_pm - 1)| <k> / W_pm^{s+1}(x) for s in {0, 1}

        m_+ is probed on x >= -1 and m_- on x <= 1; nodes where the tail weight
        vanishes are skipped and counted.
        """
        xs, ks = jost.grid.xs, jost.grid.ks
        bracket_k = japanese(ks)[None, :]
        fields = {
            ("+", 0): (jost.m_plus - 1.0, xs >= -1.0),
            ("+", 1): (jost.dk_m_plus, xs >= -1.0),
            ("-", 0): (jost.m_minus - 1.0, xs <= 1.0),
            ("-", 1): (jost.dk_m_minus, xs <= 1.0),
        }

        constants, skipped = {}, {}
        for (side, s), (values, region) in fields.items():
            tail = PotentialService.tail_weight(potential, s + 1, side).values
            scale = tail.max() if tail.size else 0.0
            usable = region & (tail > 1e-12 * scale) if scale > 0 else np.zeros_like(region)
            skipped[(side, s)] = int(np.count_nonzero(region & ~usable))
            if not np.any(usable):
                constants[(side, s)] = 0.0
                continue
            ratio = np.abs(values[usable]) * bracket_k / tail[usable, None]
            constants[(side, s)] = float(ratio.max())

        logger.info(f"Jost bound constants: {', '.join(f'{k[0]}{k[1]}={v:.3g}' for k, v in constants.items())}")
        return JostBoundReport(constants=constants, skipped_nodes=skipped)

    @staticmethod
    def shooting_oracle(potential: Potential, k: float, x: float) -> complex:
        """
        m_+(x, k) from direct integration of psi'' = (V - k^2) psi

        Independent of the Volterra code: starts from psi = e^{ikx} to the right of the
        support and integrates leftwards with solve_ivp, restarting at every jump of a barrier.
        """
        if potential.kind == PotentialKind.BARRIER:
            height, half_width = potential.params["height"], potential.params["half_width"]
            breaks = [half_width, -half_width]

            def potential_on(a, b):
                # Constant on each piece, so the jump is never sampled
                level = height if abs(0.5 * (a + b)) <= half_width else 0.0
                return lambda y: level

        else:
            breaks = []

            def potential_on(a, b):
                return lambda y: float(np.interp(y, potential.xs, potential.vs))

        start = max(float(potential.support_right), x) + 1.0
        state = np.array([np.exp(1j * k * start), 1j * k * np.exp(1j * k * start)], dtype=complex)
        position = start
        for stop in [b for b in breaks if x < b < position] + [x]:
            v_at = potential_on(position, stop)

            def rhs(y, state):
                return [state[1], (v_at(y) - k**2) * state[0]]

            solution = solve_ivp(rhs, (position, stop), state, method="DOP853", rtol=1e-12, atol=1e-14)
            if not solution.success:
                raise NumericalFailure(f"Shooting integration failed at x={stop}: {solution.message}")
            state, position = solution.y[:, -1], stop
        return complex(np.exp(-1j * k * x) * state[0])

    @staticmethod
    def export_csv(jost: JostField, directory) -> list:
        """Debug dump: one file per side, columns x then (re, im) per k."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        header = ",".join(["x"] + [f"{part}_{j}" for j in range(jost.grid.n_k) for part in ("re", "im")])
        paths = []
        for name, values in (("m_plus", jost.m_plus), ("m_minus", jost.m_minus)):
            interleaved = np.empty((values.shape[0], 2 * values.shape[1]))
            interleaved[:, 0::2], interleaved[:, 1::2] = values.real, values.imag
            path = directory / f"{name}.csv"
            np.savetxt(path, np.column_stack([jost.grid.xs, interleaved]), delimiter=",", header=header, comments="", fmt="%.17g")
            paths.append(path)
        return paths
