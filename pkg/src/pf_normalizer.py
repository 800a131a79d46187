"""
Perron-Frobenius normalization.

gamma_normalize turns a positive edge function f into the unique kernel
w(y|x) = f(x, y) gamma(y) / (Z gamma(x)); delta_map composes it with exp.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config import settings
from .errors import ConvergenceFailure, GraphMismatch, NotPositive, Overflow
from .function_space import EdgeFunction, StatePotential, gauge_residual
from .kernel_graph import MarkovKernel, require_strongly_connected

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalizationResult:
    """Kernel w, psi = log Z and kappa = log gamma (gauge kappa(first state) = 0)."""
    kernel: MarkovKernel
    log_perron: float
    potential: StatePotential
    iterations: int = 0
    residual: float = 0.0

    @property
    def perron_root(self) -> float:
        return float(np.exp(self.log_perron))

    @property
    def gamma(self) -> np.ndarray:
        return np.exp(self.potential.values)


def _polish(matrix: np.ndarray, vector: np.ndarray, root: float) -> tuple[np.ndarray, float]:
    """Newton refinement of a simple eigenpair on the bordered system [(A - l I) v = 0, v[0] = 1]."""
    n = matrix.shape[0]
    for _ in range(settings.polish_steps):
        residual = matrix @ vector - root * vector
        if np.max(np.abs(residual)) <= np.finfo(float).eps * root * np.max(vector):
            break
        jacobian = np.zeros((n + 1, n + 1))
        jacobian[:n, :n] = matrix - root * np.eye(n)
        jacobian[:n, n] = -vector
        jacobian[n, 0] = 1.0
        rhs = -np.concatenate([residual, [vector[0] - 1.0]])
        try:
            delta = scipy.linalg.solve(jacobian, rhs)
        except (scipy.linalg.LinAlgError, ValueError):
            break
        vector = vector + delta[:n]
        root = root + delta[n]
    return vector, root


def perron_pair(matrix: np.ndarray) -> tuple[float, np.ndarray, int, float]:
    """
    Perron root and right Perron vector (first entry 1) of an irreducible nonnegative matrix.

    Shifted power iteration on A + cI with c = max row sum, which converges
    for periodic support patterns too, followed by a Newton polish.
    Returns (root, vector, iterations, relative residual).
    """
    shift = float(np.max(matrix.sum(axis=1)))
    shifted = matrix + shift * np.eye(matrix.shape[0])
    vector = np.ones(matrix.shape[0])

    iterations = 0
    for iterations in range(1, settings.max_iters + 1):
        update = shifted @ vector
        update /= np.max(update)
        change = float(np.max(np.abs(update - vector)))
        vector = update
        if change <= settings.power_tol:
            break
    else:
        logger.warning(f"Power iteration hit the cap of {settings.max_iters} iterations")

    vector = vector / vector[0]
    root = float(np.mean((matrix @ vector) / vector))
    vector, root = _polish(matrix, vector, root)

    residual = float(
        np.max(np.abs(matrix @ vector - root * vector)) / (abs(root) * np.max(np.abs(vector)))
    )
    if residual > settings.perron_residual_tol or root <= 0 or np.any(vector <= 0):
        raise ConvergenceFailure(
            "Perron eigen-iteration did not converge",
            iterations=iterations,
            residual=residual,
            tolerance=settings.perron_residual_tol,
        )
    logger.debug(f"Perron pair: root={root:.17g} iterations={iterations} residual={residual:.3g}")
    return root, vector, iterations, residual


def gamma_normalize(f: EdgeFunction) -> NormalizationResult:
    """Gamma: F+ -> W. Requires f > 0 on every edge."""
    graph = f.graph
    require_strongly_connected(graph)
    if np.any(f.values <= 0):
        bad = int(np.argmin(f.values))
        raise NotPositive(
            "gamma normalization needs a strictly positive edge function",
            edge=list(graph.edge_labels()[bad]),
            value=float(f.values[bad]),
        )

    root, gamma, iterations, residual = perron_pair(graph.to_dense(f.values))
    weights = f.values * gamma[graph.targets] / (root * gamma[graph.sources])
    # Rows already sum to 1 up to rounding; renormalize to keep the kernel invariant tight
    kernel = MarkovKernel.from_weights(graph, weights)

    return NormalizationResult(
        kernel=kernel,
        log_perron=float(np.log(root)),
        potential=StatePotential(graph, np.log(gamma)),
        iterations=iterations,
        residual=residual,
    )


def delta_map(f: EdgeFunction) -> NormalizationResult:
    """
    Delta = Gamma o exp, defined for every real edge function.

    log w(y|x) = f(x, y) + kappa(y) - kappa(x) - psi. max(f) is subtracted before
    exponentiating and added back to psi (exact by scale equivariance).
    """
    if not np.all(np.isfinite(f.values)):
        raise Overflow("edge function has non-finite values")
    offset = float(np.max(f.values))
    scaled = np.exp(f.values - offset)
    if np.any(scaled <= 0) or not np.all(np.isfinite(scaled)):
        raise Overflow(
            "exp(f) is not representable; rescale f",
            spread=float(offset - np.min(f.values)),
        )
    result = gamma_normalize(EdgeFunction(f.graph, scaled))
    return NormalizationResult(
        kernel=result.kernel,
        log_perron=result.log_perron + offset,
        potential=result.potential,
        iterations=result.iterations,
        residual=result.residual,
    )


def quotient_equal(f1: EdgeFunction, f2: EdgeFunction) -> bool:
    """True iff f1 - f2 lies in F_A + constants, i.e. Delta(f1) = Delta(f2)."""
    if f1.graph != f2.graph:
        raise GraphMismatch("edge functions live on different graphs")
    residual = gauge_residual(f1 - f2)
    return bool(np.max(np.abs(residual.values)) <= settings.quotient_tol)
