from dataclasses import dataclass, field

from apps.core.grid import Grid


@dataclass(frozen=True)
class PotentialSpec:
    """Potential named in a run config; sampled potentials point at an `x,v` CSV."""

    kind: str = "barrier"
    height: float = 1.0
    half_width: float = 1.0
    amplitude: float = 1.0
    width: float = 1.0
    path: str = ""
    allow_signed: bool = False


@dataclass(frozen=True)
class EvolutionSpec:
    t_end: float
    dt: float
    sign: str
    eta: float
    data_shape: str
    data_width: float
    snapshots: tuple
    a_coeff_path: str = ""


@dataclass(frozen=True)
class ExperimentSpec:
    """Parameters of the individual lab subcommands"""

    alpha: float
    t_fit_min: float
    beta: float = 1.0
    decay_points: int = 40
    epsilons: tuple = (0.4, 0.2, 0.1, 0.05)
    delta_q: float = 2.0
    oracle_points: int = 64
    pdo_refinements: int = 2
    measure_t: float = 0.5
    stationary_t: float = 400.0
    stationary_k: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    potential: PotentialSpec
    grid: Grid
    evolution: EvolutionSpec
    experiment: ExperimentSpec


@dataclass
class RunManifest:
    """
    Written last into a run directory; its presence marks the run as complete.

    outputs maps file name -> sha256 hex digest. timings holds wall-clock seconds per stage.
    """

    version: str
    command: str = ""
    config: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    passed: bool | None = None
