import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from django.conf import settings

from apps.asymptotics.serializers import ModScatReportSerializer
from apps.asymptotics.services import AsymptoticsService
from apps.core.exceptions import ContractError, LabError
from apps.core.grid import Grid
from apps.decay_probe.models import NormKind, SymbolKind
from apps.decay_probe.serializers import DecaySeriesSerializer, PdoProbeSerializer
from apps.decay_probe.services import DECAY_EXPONENTS, DecayProbeService
from apps.dft.services import DftDiagnostics, DftService
from apps.evolve.models import DataShape, Sign
from apps.evolve.services import EvolveService
from apps.jost.services import JostService
from apps.potentials.models import Potential
from apps.potentials.serializers import PotentialSummarySerializer
from apps.potentials.services import PotentialService
from apps.runstore.models import RunConfig
from apps.runstore.services import RunStoreService
from apps.scattering.services import ScatteringService
from apps.spectral_measure.models import BKind, Side, TrilinearSpec
from apps.spectral_measure.services import SpectralMeasureService, TrilinearForms
from .models import LabRun, Subcommand

logger = logging.getLogger(__name__)

MASS_DRIFT_MAX = 1e-6
ENERGY_DRIFT_MAX = 1e-4
COMPONENT_DEFECT_MAX = 1e-8
SPLITTING_WINDOW = 1.0
SPLITTING_ORDER_SLACK = 0.5
TIME_REVERSAL_MAX = 1e-8
MEASURE_PATH_TOLERANCE = 1e-3
COMMUTATOR_TOLERANCE = 1e-3
INVERSE_MAP_TOLERANCE = 1e-4
REGULAR_DECAY_GAP_MIN = 0.2
STATIONARY_PHASE_TOLERANCE = 0.15
NEGATIVE_TIME_TOLERANCE = 1e-3
MODULUS_TOLERANCE = 1e-12
MIN_RHO = 0.05
PROFILE_GROWTH_MAX = 0.1
PROFILE_FIT_MIN = 10.0
DELTA_BAND = (0.5, 4.0)
DELTA_FINAL_MAX = 0.05
LOW_FREQUENCY_MAX = 1e-3
ASYMPTOTIC_SNAPSHOTS_PER_DECADE = 16
PDO_SYMBOLS = (SymbolKind.M_MINUS_1, SymbolKind.DX_M, SymbolKind.DK_M)


def build_potential(config: RunConfig, grid: Grid | None = None) -> Potential:
    """
    Potential named by the config, sampled on grid (the run grid by default)

    Raises:
        GuardError: For a negative barrier height, or negative samples without allow_signed
    """
    spec, grid = config.potential, grid or config.grid
    if spec.kind == "barrier":
        return PotentialService.make_barrier(spec.height, spec.half_width, grid)
    if spec.kind == "gaussian":
        return PotentialService.make_gaussian(spec.amplitude, spec.width, grid)
    if spec.kind == "sampled":
        return PotentialService.read_csv(spec.path, grid, allow_signed=spec.allow_signed)
    return PotentialService.make_zero(grid)


def build_basis(potential: Potential, grid: Grid):
    jost = JostService.solve_jost(potential, grid)
    scattering = ScatteringService.coefficients(jost, potential)
    return DftService.build_basis(jost, scattering, grid, potential)


def load_coefficient(path: str, grid: Grid):
    """a(x) for the nonlinearity from an `x,a` CSV on the run grid; None when no path is set."""
    if not path:
        return None
    try:
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    except OSError as e:
        raise LabError(f"Cannot read nonlinearity coefficient from {path}: {e}") from e
    if not grid.matches_xs(data[:, 0]):
        raise ContractError(f"Coefficient samples in {path} do not lie on the run grid")
    return data[:, 1]


def _packets(ks):
    # Vanish at k = 0, where the singular coefficients jump
    return ks * np.exp(-((ks - 1.0) ** 2)), (1.0 + 0.5j) * ks * np.exp(-((ks + 0.5) ** 2)), ks * np.exp(-(ks**2))


def _gaussians(ks):
    return np.exp(-(ks**2)), np.exp(-((ks - 0.5) ** 2)), (1.0 + 0.5j) * np.exp(-((ks + 0.3) ** 2))


def _relative(a, b) -> float:
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(a)))


def _stationary_bump(q):
    return 0.5 * np.exp(-((q - 1.0) ** 2))


class LabRunner:
    """
    One method per `lab` subcommand; each returns a LabRun holding artifacts and checks
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.grid = config.grid
        self.tolerances = settings.SPECTRAL_LAB["TOLERANCES"]
        self.run = None

    @contextmanager
    def stage(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.run.timings[name] = time.perf_counter() - start

    def execute(self, command: str) -> LabRun:
        """
        Raises:
            ContractError: For an unknown subcommand
        """
        handlers = {
            Subcommand.SCATTER: self.scatter,
            Subcommand.DFT_CHECK: self.dft_check,
            Subcommand.SOLVE: self.solve,
            Subcommand.DECAY_FIT: self.decay_fit,
            Subcommand.MEASURE_CHECK: self.measure_check,
            Subcommand.ASYMPTOTICS: self.asymptotics,
            Subcommand.DELTA_LIMIT: self.delta_limit,
        }
        if command not in handlers:
            raise ContractError(f"Unknown subcommand {command!r}")
        self.run = LabRun(command=command)
        logger.info(f"Running {command} on {self.grid}")
        handlers[command]()
        for name in self.run.failed_checks:
            logger.warning(f"{command}: check {name} failed")
        return self.run

    def _basis(self):
        with self.stage("basis"):
            potential = build_potential(self.config)
            return potential, build_basis(potential, self.grid)

    def scatter(self):
        run = self.run
        with self.stage("scattering"):
            potential = build_potential(self.config)
            jost = JostService.solve_jost(potential, self.grid)
            data = ScatteringService.coefficients(jost, potential)
        identities = ScatteringService.identity_report(data)
        run.artifacts["scattering.csv"] = ScatteringService.table(data)
        run.metrics.update(identities)
        run.metrics["derivative_bound"] = ScatteringService.derivative_bound(data)
        run.metrics["weighted_l1_norm"] = PotentialService.weighted_l1_norm(potential, 1.0)
        run.checks["identities"] = max(identities.values()) < self.tolerances["SCATTERING_IDENTITY"]

        spec = self.config.potential
        # Negative k follow by conjugation
        candidates = np.flatnonzero(self.grid.ks > 0)
        if spec.kind == "barrier" and spec.height > 0 and candidates.size:
            picks = np.linspace(0, candidates.size - 1, self.config.experiment.oracle_points).astype(int)
            indices = candidates[np.unique(picks)]
            reference = ScatteringService.barrier_oracle(spec.height, spec.half_width, self.grid.ks[indices])
            run.metrics["barrier_oracle_error"] = ScatteringService.oracle_error(data, reference, indices)
            run.checks["barrier_oracle"] = run.metrics["barrier_oracle_error"] < self.tolerances["BARRIER_ORACLE"]
        run.artifacts["scattering.json"] = {
            "potential": PotentialSummarySerializer(potential).data,
            "generic": bool(data.generic),
            **run.metrics,
            "jost_bounds": JostService.jost_bound_report(jost, potential).as_rows(),
        }

    def dft_check(self):
        run = self.run
        potential, basis = self._basis()
        with self.stage("diagnostics"):
            report = DftDiagnostics.report(basis, potential)
        run.metrics.update(report)
        run.checks["plancherel"] = abs(report["plancherel_ratio"] - 1.0) < self.tolerances["PLANCHEREL"]
        run.checks["diagonalization"] = report["diagonalization_residual"] < self.tolerances["DIAGONALIZATION"]
        run.checks["split_identity"] = report["split_residual"] < self.tolerances["SPLIT_IDENTITY"]
        if basis.scattering.generic:
            run.checks["low_frequency"] = report["low_frequency_ratio"] < LOW_FREQUENCY_MAX

        refinements = self.config.experiment.pdo_refinements
        beta = self.config.experiment.beta
        with self.stage("pdo"):
            norms = {kind: DecayProbeService.pdo_norm_probe(kind, basis, refinements, beta) for kind in PDO_SYMBOLS}
        levels = np.arange(refinements + 1)
        run.artifacts["pdo_norms.csv"] = (["level", *PDO_SYMBOLS], np.column_stack([levels, *norms.values()]))
        probes = []
        for kind, values in norms.items():
            plateau = DecayProbeService.is_plateau(values)
            if refinements:
                run.checks[f"pdo_{kind}"] = plateau
            probes.append(PdoProbeSerializer({"symbol_kind": kind, "beta": beta, "norms": values, "plateau": plateau}).data)
        run.artifacts["dft_check.json"] = {**report, "pdo_norms": probes}

    def solve(self):
        run = self.run
        evolution = self.config.evolution
        _, basis = self._basis()
        u0 = EvolveService.initial_data(self.grid, evolution.data_shape, evolution.eta, evolution.data_width)
        coefficient = load_coefficient(evolution.a_coeff_path, self.grid)
        sign = Sign.parse(evolution.sign)
        with self.stage("evolve"):
            trajectory = EvolveService.nls_solve(basis, u0, evolution.t_end, evolution.dt, sign, coefficient, evolution.snapshots)

        header, columns = ["x"], [self.grid.xs]
        for state in trajectory.states:
            header += [f"re_u_{state.t:g}", f"im_u_{state.t:g}"]
            columns += [state.u.real, state.u.imag]
        run.artifacts["snapshots.csv"] = (header, np.column_stack(columns))
        run.artifacts["series.csv"] = (["t", "mass", "energy"], np.array(trajectory.series))

        drift = EvolveService.conservation_drift(trajectory)
        run.metrics.update({f"{name}_drift": value for name, value in drift.items()})
        run.metrics["boundary_mass_fraction"] = EvolveService.boundary_mass_fraction(trajectory.states[-1].u, self.grid)
        run.checks["mass_conservation"] = drift["mass"] < MASS_DRIFT_MAX
        run.checks["energy_conservation"] = drift["energy"] < ENERGY_DRIFT_MAX

        window = min(evolution.t_end, SPLITTING_WINDOW)
        with self.stage("splitting"):
            order = EvolveService.splitting_order(basis, u0, window, evolution.dt, sign, coefficient)
            reversal = EvolveService.time_reversal_error(basis, u0, window, evolution.dt, sign, coefficient)
        run.metrics["splitting_order"] = order
        run.metrics["splitting_window"] = window
        run.metrics["time_reversal_error"] = reversal
        # nan: the differences are at roundoff and the splitting is exact
        run.checks["splitting_order"] = bool(np.isnan(order) or abs(order - 2.0) <= SPLITTING_ORDER_SLACK)
        run.checks["time_reversal"] = reversal < TIME_REVERSAL_MAX
        run.artifacts["conservation.json"] = dict(run.metrics)

    def decay_fit(self):
        run = self.run
        evolution, experiment = self.config.evolution, self.config.experiment
        if evolution.t_end <= experiment.t_fit_min:
            raise ContractError(f"decay-fit needs t_end > t_fit_min = {experiment.t_fit_min:g}")
        _, basis = self._basis()
        times = np.geomspace(1.0, evolution.t_end, experiment.decay_points)
        even = EvolveService.initial_data(self.grid, DataShape.GAUSSIAN, evolution.eta, evolution.data_width)
        odd = EvolveService.initial_data(self.grid, DataShape.ODD_GAUSSIAN, evolution.eta, evolution.data_width)
        t_fit_min = experiment.t_fit_min

        probes = {}
        with self.stage("series"):
            probes["sup"] = (DecayProbeService.norm_series(basis, even, times, NormKind.SUP, t_fit_min=t_fit_min), DECAY_EXPONENTS["sup"])
            probes["weighted_sup_zero_mode"] = (
                DecayProbeService.norm_series(basis, odd, times, NormKind.WEIGHTED_SUP, beta=1.0, require_zero_mode=True, t_fit_min=t_fit_min),
                DECAY_EXPONENTS["weighted_sup_zero_mode"],
            )
            if basis.scattering.generic:
                probes["weighted_sup_generic"] = (
                    DecayProbeService.norm_series(basis, even, times, NormKind.WEIGHTED_SUP, beta=2.0, t_fit_min=t_fit_min),
                    DECAY_EXPONENTS["weighted_sup_generic"],
                )
                probes["smoothing_generic"] = (
                    DecayProbeService.smoothing_series(basis, even, times, beta=experiment.beta, t_fit_min=t_fit_min),
                    DECAY_EXPONENTS["smoothing_generic"],
                )
            else:
                probes["smoothing_zero_mode_growth"] = (
                    DecayProbeService.smoothing_series(
                        basis, odd, times, beta=experiment.beta, multiply_by_t=True, require_zero_mode=True, t_fit_min=t_fit_min
                    ),
                    DECAY_EXPONENTS["smoothing_zero_mode_growth"],
                )

        slopes = {}
        for name, (series, exponent) in probes.items():
            run.artifacts[f"{name}.csv"] = series
            run.checks[name] = DecayProbeService.slope_within(series, exponent)
            slopes[name] = {**DecaySeriesSerializer(series).data, "bound": exponent}
            slopes[name].pop("ts")
            slopes[name].pop("norms")
        with self.stage("dispersive"):
            run.metrics["dispersive_constant"] = DecayProbeService.dispersive_constant(basis, even, times)
            run.metrics["component_defect"] = max(DecayProbeService.component_defect(basis, even, t) for t in times)
        run.checks["component_split"] = run.metrics["component_defect"] < COMPONENT_DEFECT_MAX
        run.metrics["generic"] = bool(basis.scattering.generic)
        run.artifacts["slopes.json"] = {"slopes": slopes, **run.metrics}

    def measure_check(self):
        run = self.run
        _, basis = self._basis()
        t = self.config.experiment.measure_t
        g = _packets(self.grid.ks)
        with self.stage("decomposition"):
            direct = SpectralMeasureService.trilinear_direct(basis, *g, t)
            singular = {side: SpectralMeasureService.singular_action(basis, *g, t, side) for side in Side.CHOICES}
            regular = SpectralMeasureService.regular_action(basis, *g, t)
            for side in Side.CHOICES:
                physical = SpectralMeasureService.singular_action_physical(basis, *g, t, side)
                run.metrics[f"singular_{side}_paths"] = _relative(singular[side], physical)
        run.metrics["closure"] = _relative(singular[Side.PLUS] + singular[Side.MINUS] + regular, direct)
        run.checks["closure"] = run.metrics["closure"] < MEASURE_PATH_TOLERANCE
        for side in Side.CHOICES:
            run.checks[f"singular_{side}_paths"] = run.metrics[f"singular_{side}_paths"] < MEASURE_PATH_TOLERANCE

        with self.stage("decay_gap"):
            decay = SpectralMeasureService.regular_decay_gap(basis, *g)
        for key in ("direct_exponent", "regular_exponent"):
            run.metrics[key] = decay[key]
        run.metrics["regular_decay_gap"] = decay["gap"]
        run.checks["regular_decay_gap"] = bool(decay["gap"] >= REGULAR_DECAY_GAP_MIN)

        ks = self.grid.ks
        with self.stage("identities"):
            residuals = {}
            for epsilons in ((1, 1, 1), (-1, 1, -1), (1, -1, 1)):
                spec = TrilinearSpec(epsilons, BKind.GAUSSIAN, 1.0)
                residuals[str(epsilons)] = {
                    "commutator": TrilinearForms.commutator_residual(spec, ks, *_gaussians(ks)),
                    "inverse_map": TrilinearForms.inverse_fd_map(TrilinearSpec(epsilons, BKind.GAUSSIAN, t), ks, *_gaussians(ks)),
                }
        run.checks["commutator"] = max(r["commutator"] for r in residuals.values()) < COMMUTATOR_TOLERANCE
        run.checks["inverse_map"] = max(r["inverse_map"] for r in residuals.values()) < INVERSE_MAP_TOLERANCE
        run.artifacts["measure.json"] = {"t": t, **run.metrics, "identities": residuals}

    def asymptotics(self):
        run = self.run
        evolution, experiment = self.config.evolution, self.config.experiment
        _, basis = self._basis()
        u0 = EvolveService.initial_data(self.grid, evolution.data_shape, evolution.eta, evolution.data_width)
        coefficient = load_coefficient(evolution.a_coeff_path, self.grid)
        if evolution.t_end > 1.0:
            decades = np.log10(evolution.t_end)
            dense = np.geomspace(1.0, evolution.t_end, int(np.ceil(decades * ASYMPTOTIC_SNAPSHOTS_PER_DECADE)) + 1)
        else:
            dense = np.array([evolution.t_end])
        snapshots = sorted(set(evolution.snapshots) | set(np.round(dense / evolution.dt) * evolution.dt))
        with self.stage("evolve"):
            trajectory = EvolveService.nls_solve(basis, u0, evolution.t_end, evolution.dt, Sign.parse(evolution.sign), coefficient, snapshots)
            profile = EvolveService.extract_profile(basis, trajectory)

        with self.stage("profile"):
            report = AsymptoticsService.modified_profile(profile, alpha=experiment.alpha)
            growth = DecayProbeService.profile_series(profile, NormKind.DK_L2, t_fit_min=PROFILE_FIT_MIN)
            sup_value, sup_ok = AsymptoticsService.profile_sup_bound(profile, evolution.eta)
            decay_value, decay_ok = AsymptoticsService.decay_bound_check(trajectory, evolution.eta)
        modulus = float(np.max(np.abs(np.abs(report.w_snapshots) - np.abs(profile.f_tilde_snapshots))))
        run.metrics.update(
            {
                "fitted_rho": report.fitted_rho,
                "modulus_defect": modulus,
                "profile_sup": sup_value,
                "decay_bound": decay_value,
                "profile_dk_growth": growth.fitted_slope,
            }
        )
        # A run too short to fit fails these checks rather than skipping them
        run.checks["ode_residual_rate"] = bool(np.isfinite(report.fitted_rho) and report.fitted_rho >= MIN_RHO)
        run.checks["cauchy_gaps"] = bool(report.cauchy_gaps.size > 1 and np.all(np.diff(report.cauchy_gaps) < 0))
        run.checks["modulus"] = modulus < MODULUS_TOLERANCE
        run.checks["profile_sup"] = sup_ok
        run.checks["profile_dk_growth"] = bool(growth.has_fit and growth.fitted_slope <= PROFILE_GROWTH_MAX)
        run.checks["decay_bound"] = decay_ok

        with self.stage("oracles"):
            t_sp, k_sp = experiment.stationary_t, experiment.stationary_k
            discrepancies = []
            for t in (t_sp / 4.0, t_sp):
                leading, quadrature = AsymptoticsService.stationary_phase_oracle(_stationary_bump, t, k_sp, alpha=experiment.alpha)
                discrepancies.append(abs(quadrature - leading) / abs(leading))
            packet = np.exp(-((self.grid.xs - 1.0) ** 2) + 0.5j * self.grid.xs)
            negative = AsymptoticsService.negative_time_map(basis, packet)
        run.metrics["stationary_phase_discrepancy"] = discrepancies[-1]
        run.metrics["negative_time_mismatch"] = negative
        run.checks["stationary_phase"] = discrepancies[-1] < STATIONARY_PHASE_TOLERANCE and discrepancies[-1] < discrepancies[0]
        run.checks["negative_time"] = negative < NEGATIVE_TIME_TOLERANCE

        run.artifacts["modscat.json"] = RunStoreService.render_json(ModScatReportSerializer(report, context={"profile": profile}).data)
        run.artifacts["profile_dk.csv"] = growth
        run.artifacts["asymptotics.json"] = dict(run.metrics)

    def delta_limit(self):
        run = self.run
        experiment = self.config.experiment
        q = experiment.delta_q
        ks = self.grid.ks
        band = (np.abs(ks) >= DELTA_BAND[0]) & (np.abs(ks) <= DELTA_BAND[1])
        if not np.any(band):
            raise ContractError(f"The k-grid has no nodes with {DELTA_BAND[0]} <= |k| <= {DELTA_BAND[1]}")
        delta = ScatteringService.delta_closed_form(q, ks[band])

        epsilons = sorted(experiment.epsilons, reverse=True)
        errors = []
        with self.stage("sweep"):
            for epsilon in epsilons:
                # Height q / (2 eps) on [-eps, eps] keeps the integral of V equal to q
                potential = PotentialService.make_barrier(q / (2.0 * epsilon), epsilon, self.grid)
                data = ScatteringService.coefficients(JostService.solve_jost(potential, self.grid), potential)
                errors.append(float(np.max(np.abs(data.T[band] - delta.T))))
                logger.info(f"eps={epsilon:g}: sup |T_eps - T_delta| = {errors[-1]:.3e}")

        run.artifacts["delta_limit.csv"] = (["epsilon", "sup_error"], np.column_stack([epsilons, errors]))
        run.checks["monotone"] = all(a > b for a, b in zip(errors, errors[1:]))
        run.checks["final"] = errors[-1] < DELTA_FINAL_MAX
        run.metrics = {"q": q, "epsilons": epsilons, "errors": errors}
        run.artifacts["delta_limit.json"] = dict(run.metrics)
