"""
Dual geometry of an exponential family of kernels.

Fisher metric (score form and Hessian of psi), expectation coordinates eta,
Legendre duality with phi = theta . eta - psi, Newton inversion eta -> theta,
and e/m connection coefficients. All derivatives are central finite
differences with steps scaled by 1 + |coordinate|.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .config import settings
from .errors import (
    ConvergenceFailure, InvalidInput, NoConvergence, NotInFamily, NotMinimal, NotPositive, Overflow,
)
from .exp_family import ExponentialFamily, NaturalParameter, effective_dimension, in_family, kernel_at
from .kernel_graph import MarkovKernel, edge_measure

logger = logging.getLogger(__name__)

# eta = (eta_i), length d
ExpectationParameter = npt.NDArray[np.float64]


@dataclass(frozen=True)
class FisherMatrix:
    g: np.ndarray

    @property
    def min_eigenvalue(self) -> float:
        if self.g.size == 0:
            return 0.0
        return float(np.min(np.linalg.eigvalsh(self.g)))

    @property
    def is_positive_definite(self) -> bool:
        return self.g.size > 0 and self.min_eigenvalue > 0

    @property
    def is_degenerate(self) -> bool:
        scale = max(float(np.max(np.abs(self.g))), 1.0) if self.g.size else 1.0
        return self.min_eigenvalue <= settings.rank_tol * scale

    def inverse(self) -> np.ndarray:
        if self.is_degenerate:
            raise NotMinimal("Fisher matrix is singular; the family is not minimal")
        return np.linalg.inv(self.g)


@dataclass(frozen=True)
class ConnectionCoefficients:
    """Gamma_{ij,k}, symmetric in (i, j)."""
    coeffs: np.ndarray
    which: str
    coordinates: str

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0


@dataclass(frozen=True)
class NewtonResult:
    theta: NaturalParameter
    iterations: int
    residual: float


def _steps(point: np.ndarray, relative: float) -> np.ndarray:
    return relative * (1.0 + np.abs(point))


def _second_differences(fn: Callable[[np.ndarray], float], x: np.ndarray, h: np.ndarray) -> np.ndarray:
    d = x.size
    f0 = fn(x)
    hessian = np.zeros((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        hessian[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            value = (
                fn(x + ei + ej) - fn(x + ei - ej) - fn(x - ei + ej) + fn(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            hessian[i, j] = hessian[j, i] = value
    return hessian


def richardson_hessian(fn: Callable[[np.ndarray], float], x, relative_step: float) -> np.ndarray:
    """Central second differences at steps h and h/2 combined by one Richardson level."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, relative_step)
    coarse = _second_differences(fn, x, h)
    fine = _second_differences(fn, x, h / 2.0)
    return (4.0 * fine - coarse) / 3.0


def central_jacobian(fn: Callable[[np.ndarray], np.ndarray], x, relative_step: float) -> np.ndarray:
    """Columns are central-difference derivatives of a vector-valued fn."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, relative_step)
    columns = []
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h[k]
        columns.append((fn(x + e) - fn(x - e)) / (2.0 * h[k]))
    return np.column_stack(columns) if columns else np.zeros((0, 0))


def require_minimal(family: ExponentialFamily) -> None:
    rank = effective_dimension(family)
    if rank < family.dim:
        raise NotMinimal(
            "basis images in F / (F_A + R) are linearly dependent",
            dimension=family.dim,
            effective_dimension=rank,
        )


def _log_kernel(family: ExponentialFamily, theta: np.ndarray) -> np.ndarray:
    return kernel_at(family, theta).kernel.log_probs


def score_matrix(family: ExponentialFamily, theta) -> np.ndarray:
    """|E| x d matrix of d log w_theta(y|x) / d theta^i."""
    theta = family.check_theta(theta)
    return central_jacobian(lambda t: _log_kernel(family, t), theta, settings.gradient_step)


def fisher_direct(family: ExponentialFamily, theta) -> FisherMatrix:
    """g_ij = sum_E p_theta(x, y) d_i log w_theta(y|x) d_j log w_theta(y|x)."""
    theta = family.check_theta(theta)
    if family.dim == 0:
        return FisherMatrix(np.zeros((0, 0)))
    p2 = edge_measure(kernel_at(family, theta).kernel).probs
    scores = score_matrix(family, theta)
    g = scores.T @ (p2[:, None] * scores)
    return FisherMatrix((g + g.T) / 2.0)


def fisher_hessian(family: ExponentialFamily, theta) -> FisherMatrix:
    """g_ij = d_i d_j psi(theta) by Richardson-extrapolated second differences."""
    theta = family.check_theta(theta)
    g = richardson_hessian(lambda t: kernel_at(family, t).psi, theta, settings.hessian_step)
    return FisherMatrix((g + g.T) / 2.0)


def expectation_param(family: ExponentialFamily, theta) -> ExpectationParameter:
    """eta_i(theta) = sum_E p^(2)_{w_theta}(x, y) F_i(x, y)."""
    point = kernel_at(family, theta)
    return edge_measure(point.kernel).probs @ family.basis_matrix


def dual_potential(family: ExponentialFamily, theta) -> float:
    """phi(theta) = sum_i theta^i eta_i(theta) - psi(theta)."""
    theta = family.check_theta(theta)
    point = kernel_at(family, theta)
    eta = edge_measure(point.kernel).probs @ family.basis_matrix
    return float(theta @ eta - point.psi)


def fisher_dual(family: ExponentialFamily, theta) -> FisherMatrix:
    """g^{ij}: the metric in eta-coordinates, the inverse of g_ij."""
    return FisherMatrix(fisher_direct(family, theta).inverse())


def _search_direction(family: ExponentialFamily, theta: np.ndarray, residual: np.ndarray) -> tuple[np.ndarray, bool]:
    """Newton direction -G^-1 r, or steepest descent -r where G cannot be factored (flag False)."""
    try:
        g = fisher_direct(family, theta).g
        step = scipy.linalg.solve(g, -residual, assume_a="pos")
        if np.all(np.isfinite(step)) and float(residual @ step) < 0:
            return step, True
    except (ConvergenceFailure, Overflow, NotPositive, scipy.linalg.LinAlgError, ValueError):
        pass
    logger.debug(f"Fisher matrix unusable at theta = {theta}; taking a gradient step")
    return -residual, False


def _legendre_point(
    family: ExponentialFamily,
    theta: np.ndarray,
    target: np.ndarray
) -> Optional[tuple[float, np.ndarray]]:
    """(psi(theta) - theta . eta, eta(theta) - eta), or None where the kernel is not representable."""
    try:
        point = kernel_at(family, theta)
        residual = edge_measure(point.kernel).probs @ family.basis_matrix - target
    except (ConvergenceFailure, Overflow, NotPositive):
        return None
    return float(point.psi - theta @ target), residual


def _line_search(
    family: ExponentialFamily,
    theta: np.ndarray,
    objective: float,
    residual: np.ndarray,
    step: np.ndarray,
    target: np.ndarray
):
    """Backtracking with the Armijo rule on the convex objective psi(theta) - theta . eta."""
    length = float(np.max(np.abs(step)))
    if length > settings.newton_max_step:
        step = step * (settings.newton_max_step / length)
    slope = float(step @ residual)
    scale = 1.0
    for _ in range(settings.newton_max_halvings + 1):
        candidate = theta + scale * step
        state = _legendre_point(family, candidate, target)
        if state is not None and state[0] <= objective + settings.newton_armijo * scale * slope:
            return (candidate, *state), scale
        scale *= 0.5
    return None, scale


def solve_theta(
    family: ExponentialFamily,
    eta,
    theta0=None,
    tol: Optional[float] = None
) -> NewtonResult:
    """
    Damped Newton iteration theta <- theta + G(theta)^-1 (eta - eta(theta)).

    The iteration minimizes the strictly convex psi(theta) - theta . eta, whose
    gradient is the moment residual. Far from the solution, steps are capped at
    newton_max_step and backtracked with the Armijo rule; once the Newton
    decrement drops below newton_local_decrement, full steps are taken while
    the residual shrinks. tol=0 iterates until the residual stops decreasing;
    the result is accepted if it is below newton_tol.
    """
    require_minimal(family)
    target = np.atleast_1d(np.asarray(eta, dtype=float))
    if target.shape != (family.dim,) or not np.all(np.isfinite(target)):
        raise InvalidInput(f"expectation parameter must be a finite vector of length {family.dim}")
    tol = settings.newton_tol if tol is None else tol

    theta = np.zeros(family.dim) if theta0 is None else family.check_theta(theta0)
    state = _legendre_point(family, theta, target)
    if state is None:
        raise NoConvergence("eigensolver failed at the initial guess", theta=theta)
    objective, residual = state

    iterations = 0
    polishing = 0
    while iterations < settings.newton_max_iters:
        error = float(np.max(np.abs(residual)))
        converged = error <= tol
        if converged:
            # Two extra undamped steps take the residual down to rounding
            if polishing >= 2:
                break
            polishing += 1
        step, is_newton = _search_direction(family, theta, residual)
        decrement = -float(residual @ step)

        accepted, scale = None, 1.0
        if is_newton and (converged or decrement <= settings.newton_local_decrement):
            state = _legendre_point(family, theta + step, target)
            if state is not None and np.linalg.norm(state[1]) < np.linalg.norm(residual):
                accepted = (theta + step, *state)
            elif converged or error <= settings.newton_tol:
                break
        if accepted is None:
            accepted, scale = _line_search(family, theta, objective, residual, step, target)
        if accepted is None:
            break
        theta, objective, residual = accepted
        iterations += 1
        logger.debug(
            f"Newton iteration {iterations}: step scale {scale:.3g}, "
            f"residual {np.max(np.abs(residual)):.3g}"
        )

    error = float(np.max(np.abs(residual)))
    if error > max(tol, settings.newton_tol):
        raise NoConvergence(
            "Newton inversion did not reach the requested moments; "
            "eta may lie outside the realizable moment set",
            theta=theta,
            residual=error,
            iterations=iterations,
        )
    return NewtonResult(theta=theta, iterations=iterations, residual=error)


def theta_from_eta(family: ExponentialFamily, eta, theta0=None, tol: Optional[float] = None) -> NaturalParameter:
    """Natural parameter whose expectation parameter is eta (default initial guess 0)."""
    return solve_theta(family, eta, theta0=theta0, tol=tol).theta


def natural_coordinates(family: ExponentialFamily, w: MarkovKernel, theta0=None) -> NaturalParameter:
    """theta of a member kernel, recovered from its edge-measure moments."""
    if not in_family(family, w):
        raise NotInFamily("kernel is not a member of the family")
    eta = edge_measure(w).probs @ family.basis_matrix
    return theta_from_eta(family, eta, theta0=theta0)


def _connection_fields(
    family: ExponentialFamily,
    theta: np.ndarray,
    coordinates: str
) -> tuple[np.ndarray, Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]]:
    """Base point in the chosen coordinates and the map point -> (log w, p^(2))."""
    if coordinates == "theta":
        def to_theta(xi):
            return xi
        base = theta
    elif coordinates == "eta":
        base = expectation_param(family, theta)

        def to_theta(xi):
            return solve_theta(family, xi, theta0=theta, tol=0.0).theta
    else:
        raise InvalidInput("coordinates must be 'theta' or 'eta'", coordinates=coordinates)

    def fields(xi):
        kernel = kernel_at(family, to_theta(xi)).kernel
        return kernel.log_probs, edge_measure(kernel).probs

    return base, fields


def connection_coefficients(
    family: ExponentialFamily,
    theta,
    which: Literal["e", "m"] = "e",
    coordinates: Literal["theta", "eta"] = "theta"
) -> ConnectionCoefficients:
    """
    e: Gamma_{ij,k} = sum_E d_i d_j log w_theta(y|x) d_k p_theta(x, y)
    m: Gamma_{ij,k} = sum_E d_i d_j p_theta(x, y) d_k log w_theta(y|x)
    with derivatives taken in theta- or eta-coordinates.
    """
    if which not in ("e", "m"):
        raise InvalidInput("which must be 'e' or 'm'", which=which)
    theta = family.check_theta(theta)
    require_minimal(family)
    base, fields = _connection_fields(family, theta, coordinates)

    d = family.dim
    h = _steps(base, settings.connection_step)
    log0, p0 = fields(base)
    n_edges = log0.size

    first_log = np.zeros((n_edges, d))
    first_p = np.zeros((n_edges, d))
    second_log = np.zeros((n_edges, d, d))
    second_p = np.zeros((n_edges, d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        log_plus, p_plus = fields(base + ei)
        log_minus, p_minus = fields(base - ei)
        first_log[:, i] = (log_plus - log_minus) / (2.0 * h[i])
        first_p[:, i] = (p_plus - p_minus) / (2.0 * h[i])
        second_log[:, i, i] = (log_plus - 2.0 * log0 + log_minus) / h[i] ** 2
        second_p[:, i, i] = (p_plus - 2.0 * p0 + p_minus) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            corners = [fields(base + si * ei + sj * ej) for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
            denominator = 4.0 * h[i] * h[j]
            mixed_log = (corners[0][0] - corners[1][0] - corners[2][0] + corners[3][0]) / denominator
            mixed_p = (corners[0][1] - corners[1][1] - corners[2][1] + corners[3][1]) / denominator
            second_log[:, i, j] = second_log[:, j, i] = mixed_log
            second_p[:, i, j] = second_p[:, j, i] = mixed_p

    if which == "e":
        coeffs = np.einsum("eij,ek->ijk", second_log, first_p)
    else:
        coeffs = np.einsum("eij,ek->ijk", second_p, first_log)
    return ConnectionCoefficients(coeffs=coeffs, which=which, coordinates=coordinates)
