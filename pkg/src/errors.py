"""
Domain errors.

Every error carries a machine-readable code, a message and a context dict;
the CLI prints `to_dict()` and exits with status 1.
"""
from typing import Any

import numpy as np


def _plain(value: Any) -> Any:
    """Convert numpy values in an error context to JSON-friendly Python values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class InfoGeoError(Exception):
    """Base class for all domain errors."""

    code = "domain_error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = {k: _plain(v) for k, v in context.items()}

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "context": self.context}


class InvalidInput(InfoGeoError):
    code = "invalid_input"


class NotStronglyConnected(InfoGeoError):
    code = "not_strongly_connected"


class GraphMismatch(InfoGeoError):
    code = "graph_mismatch"


class NotPositive(InfoGeoError):
    code = "not_positive"


class ConvergenceFailure(InfoGeoError):
    code = "convergence_failure"


class Overflow(InfoGeoError):
    code = "overflow"


class NotShiftInvariant(InfoGeoError):
    code = "not_shift_invariant"


class ZeroRow(InfoGeoError):
    code = "zero_row"


class RankMismatch(InfoGeoError):
    code = "rank_mismatch"


class IdenticalKernels(InfoGeoError):
    code = "identical_kernels"


class NotMinimal(InfoGeoError):
    code = "not_minimal"


class NoConvergence(InfoGeoError):
    code = "no_convergence"


class NotInFamily(InfoGeoError):
    code = "not_in_family"


class UnsupportedTransition(InfoGeoError):
    code = "unsupported_transition"


class InvalidDocument(InfoGeoError):
    code = "invalid_document"
