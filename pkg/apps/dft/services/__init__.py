from .basis_service import DftService
from .diagnostics_service import DftDiagnostics

__all__ = ["DftService", "DftDiagnostics"]
