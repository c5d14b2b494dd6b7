from dataclasses import dataclass, field


class Subcommand:
    SCATTER = "scatter"
    DFT_CHECK = "dft-check"
    SOLVE = "solve"
    DECAY_FIT = "decay-fit"
    MEASURE_CHECK = "measure-check"
    ASYMPTOTICS = "asymptotics"
    DELTA_LIMIT = "delta-limit"

    CHOICES = (SCATTER, DFT_CHECK, SOLVE, DECAY_FIT, MEASURE_CHECK, ASYMPTOTICS, DELTA_LIMIT)


@dataclass
class LabRun:
    """
    Outcome of one subcommand

    artifacts maps output file names to anything the run store can render.
    checks maps acceptance check names to pass/fail; the run passes iff all do.
    """

    command: str
    artifacts: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failed_checks(self) -> list:
        return [name for name, ok in self.checks.items() if not ok]
