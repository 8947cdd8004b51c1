from typing import Optional, Sequence


class BoltzDGError(Exception):
    """Base class for every error raised by the solver library."""


class MeshValidationError(BoltzDGError, ValueError):
    """A spatial mesh failed to parse or violates a structural invariant."""


class ConfigurationError(BoltzDGError, ValueError):
    """A run configuration is inconsistent or incomplete.

    Attributes:
        issues: Every validation message collected for the configuration.
    """

    def __init__(self, issues: Sequence[str]) -> None:
        self.issues = list(issues)
        super().__init__("Invalid configuration:\n" + "\n".join(f"  - {i}" for i in self.issues))


class SolverError(BoltzDGError, RuntimeError):
    """Raised when the transport solve cannot produce a flux."""


class SingularOperatorError(SolverError):
    """Sparse factorization of a transport operator failed.

    Attributes:
        direction: Ordinate of the failing operator.
        energy: Energy node (keV) of the failing operator.
    """

    def __init__(self, direction: Sequence[float], energy: float, cause: Optional[Exception] = None) -> None:
        self.direction = tuple(float(c) for c in direction)
        self.energy = float(energy)
        self.cause = cause
        super().__init__(self._build_error_message())

    def _build_error_message(self) -> str:
        mu = ", ".join(f"{c:.6g}" for c in self.direction)
        details = f"Transport operator is singular for mu=({mu}), E={self.energy:.6g} keV"
        if self.cause is not None:
            details += f": {self.cause}"
        suggestions = [
            "Check that every element has at least one inflow face or a positive total cross section",
            "A zero total cross section on a closed streamline makes the upwind operator singular",
            "Look for degenerate (zero-measure) elements or faces in the spatial mesh",
        ]
        return details + "\n\nTroubleshooting suggestions:\n" + "\n".join(f"  - {s}" for s in suggestions)


class ConvergenceFailure(SolverError):
    """Source iteration hit its iteration limit without meeting the tolerance."""


class OracleError(BoltzDGError, RuntimeError):
    """A high-order reference quadrature did not reach its tolerance."""


class VerificationFailure(BoltzDGError):
    """One or more verification checks failed."""
