"""Exception types shared across the package.

The CLI maps :class:`PreconditionError` subclasses to exit code 2
(machine-readable refusal) and everything else to exit code 1.
"""


class DisspecError(Exception):
    """Base class for all package errors."""


class PreconditionError(DisspecError):
    """A documented precondition or regime guard was violated."""

    def payload(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class RegimeError(PreconditionError):
    """Parameters fall outside the regime required by the requested analysis."""


class UnsupportedRegimeError(RegimeError):
    """Parameter combination with no validated asymptotic table."""


class SchemaError(PreconditionError):
    """A run configuration failed strict schema validation."""


class TailMassError(PreconditionError):
    """Frequency grid too narrow: integrand tail at the edge is not negligible."""

    def __init__(self, message, edge_values=None):
        super().__init__(message)
        self.edge_values = edge_values

    def payload(self) -> dict:
        out = super().payload()
        if self.edge_values is not None:
            out["edge_values"] = list(map(float, self.edge_values))
        return out


class CertificateRefused(DisspecError):
    """A spectral-gap certificate was refused: a scanned frequency has an
    eigenvalue real part at (or above) zero."""

    def __init__(self, witness_xi, max_real_part):
        super().__init__(
            f"gap certificate refused: max Re lambda = {max_real_part:.3e} "
            f"at xi = {witness_xi:.6g}"
        )
        self.witness_xi = witness_xi
        self.max_real_part = max_real_part

    def payload(self) -> dict:
        return {
            "error": "CertificateRefused",
            "witness_xi": float(self.witness_xi),
            "max_real_part": float(self.max_real_part),
        }


class SolverError(DisspecError):
    """Numerical solver failure (root finding, integration)."""
