"""
Error hierarchy shared by every laboratory app.

Each error carries the process exit code the `lab` command reports for it.
"""


class LabError(Exception):
    """Base class for all laboratory errors"""

    exit_code = 1


class ConfigError(LabError):
    """Invalid or unknown run configuration"""

    exit_code = 2

    def __init__(self, message, field_path=None):
        self.field_path = field_path
        prefix = f"{field_path}: " if field_path else ""
        super().__init__(f"{prefix}{message}")


class ContractError(LabError):
    """A precondition of an operation does not hold"""

    exit_code = 3


class GuardError(ContractError):
    """Potential violates the non-negativity guard (no bound states)"""

    def __init__(self, min_value, index):
        self.min_value = min_value
        self.index = index
        super().__init__(f"Potential is negative at index {index} (V = {min_value:.3e}); " f"pass allow_signed=True to assert there are no bound states")


class NumericalFailure(LabError):
    """A numerical procedure diverged or lost accuracy"""

    exit_code = 4

    def __init__(self, message, metric=None):
        self.metric = metric
        detail = f" (metric = {metric:.3e})" if metric is not None else ""
        super().__init__(f"{message}{detail}")
