# src/models/controllers.py

"""
Feedback-linearizing, CLF-QP and sampled-data CLF-QCQP controllers.

All three return the minimum-norm input that enforces their stability
condition; the QCQP solver handles one convex quadratic constraint
u^T Lambda u + 2 lambda^T u + l <= 0 via its scalar secular equation.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from src.core.exceptions import BadParameter, InconsistentLinearization, IterationLimit, SingularMatrix
from src.models.clf import ClfDesign, QcqpCoefficients, grad_v_eta, qcqp_coefficients
from src.models.system import NormalFormSystem
from src.utils.linalg import solve_linear

logger = logging.getLogger(__name__)

MATCH_RTOL = 1e-8
SINGULAR_CURVATURE = 1e-14
DEGENERATE_DIRECTION = 1e-12
BISECTION_RTOL = 1e-12
MAX_ITERATIONS = 200


class SolverStatus(str, Enum):
    INTERIOR = "interior"
    ACTIVE = "active"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class ControlResult:
    u: np.ndarray
    constraint_residual: float
    status: SolverStatus

    @property
    def feasible(self) -> bool:
        return self.status is not SolverStatus.INFEASIBLE


# (h, xi) -> ControlResult
ControllerFamily = Callable[[float, np.ndarray], ControlResult]


def fbl_controller(design: ClfDesign, sys: NormalFormSystem, xi: np.ndarray) -> np.ndarray:
    """
    Input matching g_eta(xi) u = A eta - B K eta - f_eta(xi), so the Euler
    output map becomes (I + h A_cl) eta.
    """
    result = fbl_control_result(design, sys, xi)
    return result.u


def fbl_control_result(design: ClfDesign, sys: NormalFormSystem, xi: np.ndarray) -> ControlResult:
    xi = sys.guard(xi)
    eta, _ = sys.split(xi)
    g = sys.input_gain(xi)
    rhs = design.A_cl @ eta - np.asarray(sys.f_eta(xi), dtype=float)

    try:
        u = solve_linear(g, rhs) if g.shape[0] == g.shape[1] else None
    except SingularMatrix:
        u = None
    if u is None:
        # minimum-norm least squares; exact whenever the match is consistent
        u = np.linalg.lstsq(g, rhs, rcond=None)[0]

    residual = float(np.linalg.norm(g @ u - rhs, np.inf))
    if residual > MATCH_RTOL * (1.0 + np.linalg.norm(rhs, np.inf)):
        raise InconsistentLinearization(
            f"no input matches the linearized output dynamics at xi (residual {residual:.3e})"
        )
    return ControlResult(u=u, constraint_residual=residual, status=SolverStatus.ACTIVE)


def _min_norm_halfspace(a: np.ndarray, b: float) -> ControlResult:
    """argmin ||u||^2 subject to a^T u <= b."""
    if b >= 0:
        return ControlResult(u=np.zeros_like(a), constraint_residual=-b, status=SolverStatus.INTERIOR)
    a_sq = float(a @ a)
    if math.sqrt(a_sq) <= DEGENERATE_DIRECTION:
        return ControlResult(u=np.zeros_like(a), constraint_residual=-b, status=SolverStatus.INFEASIBLE)
    u = (b / a_sq) * a
    return ControlResult(u=u, constraint_residual=float(a @ u - b), status=SolverStatus.ACTIVE)


def clf_qp_controller(design: ClfDesign, sys: NormalFormSystem, xi: np.ndarray) -> ControlResult:
    """Continuous-time CLF-QP: grad V^T (f + g u) <= -lambda_min(Q) ||eta||^2."""
    xi = sys.guard(xi)
    eta, _ = sys.split(xi)
    grad = grad_v_eta(design, eta)
    a = sys.input_gain(xi).T @ grad
    b = -design.lambda_min_Q * float(eta @ eta) - float(grad @ np.asarray(sys.f_eta(xi), dtype=float))
    result = _min_norm_halfspace(a, b)
    if not result.feasible:
        logger.warning("CLF-QP infeasible: input has no authority along grad V_eta")
    return result


def _result(coeffs: QcqpCoefficients, u: np.ndarray, status: SolverStatus) -> ControlResult:
    return ControlResult(u=u, constraint_residual=coeffs.evaluate(u), status=status)


def _infeasible(coeffs: QcqpCoefficients) -> ControlResult:
    m = coeffs.lambda_vec.size
    return ControlResult(u=np.zeros(m), constraint_residual=coeffs.l, status=SolverStatus.INFEASIBLE)


def _solve_scalar_qcqp(coeffs: QcqpCoefficients) -> ControlResult:
    Lam = float(coeffs.Lambda[0, 0])
    lam = float(coeffs.lambda_vec[0])
    l = coeffs.l

    if Lam <= SINGULAR_CURVATURE:
        # affine constraint 2 lam u + l <= 0
        if abs(lam) <= SINGULAR_CURVATURE:
            return _infeasible(coeffs)
        return _result(coeffs, np.array([-l / (2.0 * lam)]), SolverStatus.ACTIVE)

    disc = lam * lam - Lam * l
    if disc < 0:
        return _infeasible(coeffs)

    # l > 0 here, so both roots share the sign of -lam
    q = -(lam + math.copysign(math.sqrt(disc), lam))
    roots = sorted([q / Lam, l / q], key=lambda r: (abs(r), r))
    first, second = roots
    if abs(abs(first) - abs(second)) <= SINGULAR_CURVATURE:
        first = min(first, second)
    return _result(coeffs, np.array([first]), SolverStatus.ACTIVE)


def _solve_secular_qcqp(coeffs: QcqpCoefficients) -> ControlResult:
    """
    KKT: (I + mu Lambda) u = -mu lambda with mu > 0 making the constraint active.
    In the eigenbasis of Lambda the constraint along u(mu) is

        phi(mu) = l - sum_i lt_i^2 mu (2 + mu d_i) / (1 + mu d_i)^2,

    strictly decreasing in mu, so the root is bracketed by doubling and bisected.
    """
    d, V = np.linalg.eigh(coeffs.Lambda)
    d = np.clip(d, 0.0, None)
    lt = V.T @ coeffs.lambda_vec
    l = coeffs.l

    flat = d <= SINGULAR_CURVATURE * max(1.0, float(d.max()))
    unbounded = np.any(flat & (np.abs(lt) > SINGULAR_CURVATURE * max(1.0, float(np.abs(lt).max()))))
    if not unbounded:
        infimum = l - float(np.sum(lt[~flat] ** 2 / d[~flat]))
        if infimum > 0:
            return _infeasible(coeffs)
        if infimum >= -SINGULAR_CURVATURE * max(1.0, abs(l)):
            # the unconstrained minimizer of the constraint sits on the boundary
            ut = np.zeros_like(lt)
            ut[~flat] = -lt[~flat] / d[~flat]
            return _result(coeffs, V @ ut, SolverStatus.ACTIVE)

    def u_of(mu: float) -> np.ndarray:
        return V @ (-mu * lt / (1.0 + mu * d))

    def phi(mu: float) -> float:
        return l - float(np.sum(lt ** 2 * mu * (2.0 + mu * d) / (1.0 + mu * d) ** 2))

    lo, hi = 0.0, 1.0
    for _ in range(MAX_ITERATIONS):
        if phi(hi) <= 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise IterationLimit("could not bracket the QCQP multiplier")

    for _ in range(MAX_ITERATIONS):
        if hi - lo <= BISECTION_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0:
            lo = mid
        else:
            hi = mid
    else:
        raise IterationLimit(f"multiplier bisection did not converge (bracket [{lo:.6g}, {hi:.6g}])")

    # hi is on the feasible side of the root
    return _result(coeffs, u_of(hi), SolverStatus.ACTIVE)


def solve_min_norm_qcqp(coeffs: QcqpCoefficients) -> ControlResult:
    """Unique minimizer of ||u||^2 subject to u^T Lambda u + 2 lambda^T u + l <= 0."""
    m = coeffs.lambda_vec.size
    if coeffs.Lambda.shape != (m, m):
        raise BadParameter(f"Lambda must be {m}x{m}, got {coeffs.Lambda.shape}")
    if coeffs.l <= 0:
        return _result(coeffs, np.zeros(m), SolverStatus.INTERIOR)
    if m == 1:
        return _solve_scalar_qcqp(coeffs)
    return _solve_secular_qcqp(coeffs)


def clf_qcqp_controller(
    design: ClfDesign, sys: NormalFormSystem, xi: np.ndarray, h: float
) -> ControlResult:
    """Sampled-data CLF-QCQP on the Euler model of the output dynamics."""
    result = solve_min_norm_qcqp(qcqp_coefficients(design, sys, xi, h))
    if not result.feasible:
        logger.warning(f"CLF-QCQP infeasible at h = {h:g} (l = {result.constraint_residual:.6g})")
    return result


# =============================================================================
# Controller families for closed-loop simulation
# =============================================================================

CONTROLLERS = ("fbl", "clf-qp", "clf-qcqp")


def make_controller_family(name: str, design: ClfDesign, sys: NormalFormSystem) -> ControllerFamily:
    """(h, xi) -> ControlResult; only the QCQP controller depends on h."""
    if name == "fbl":
        return lambda h, xi: fbl_control_result(design, sys, xi)
    if name == "clf-qp":
        return lambda h, xi: clf_qp_controller(design, sys, xi)
    if name == "clf-qcqp":
        return lambda h, xi: clf_qcqp_controller(design, sys, xi, h)
    raise BadParameter(f"unknown controller '{name}', expected one of {list(CONTROLLERS)}")
