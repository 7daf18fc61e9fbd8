# src/models/clf.py

"""
Lyapunov constructions for sampled-data design.

* Output CLF V_eta(eta) = eta^T P_eta eta with the sample-period bound
  h*_eta = (1 - c) lambda_min(Q_eta) / lambda_max(A_cl^T P_eta A_cl).
* Zero-dynamics Lyapunov function from the linearization of q at the origin.
* Composite certificate V = sigma V_eta + V_z with the 2x2 matrix Omega_sigma(h).
* Coefficients (Lambda_h, lambda_h, l_h) of the sampled decrease constraint
  u^T Lambda u + 2 lambda^T u + l <= 0.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional

import numpy as np

from src.core.exceptions import (
    BadParameter,
    CertificateFailed,
    NotHurwitz,
    NotPositiveDefinite,
    SingularMatrix,
)
from src.models.system import NormalFormSystem, jacobian_zero_dynamics
from src.utils.linalg import solve_continuous_lyapunov, sym_eig_extremes

logger = logging.getLogger(__name__)

SIGMA_MARGIN = 1.01
CERTIFICATE_INTERIOR_SAMPLES = 10


@dataclass(frozen=True)
class ClfDesign:
    K: np.ndarray
    A_cl: np.ndarray
    P_eta: np.ndarray
    Q_eta: np.ndarray
    c: float
    h_star_eta: float
    lambda_min_Q: float

    @property
    def gamma(self) -> int:
        return self.P_eta.shape[0]


@dataclass(frozen=True)
class ZeroDynamicsClf:
    P_z: np.ndarray
    Q_z: np.ndarray
    d: float
    decay: float
    h_star_z: float
    jacobian: np.ndarray


@dataclass(frozen=True)
class CompositeLyapunov:
    P_z: np.ndarray
    Q_z: np.ndarray
    d: float
    L_q: float
    sigma: float
    h2_star: float
    sigma_lower_bound: float
    omega_cross: float
    output_margin: float  # c * lambda_min(Q_eta)
    zero_margin: float    # d * lambda_min(Q_z)
    decay_rate: float     # min over sampled h in [0, h2_star] of lambda_min(Omega_sigma(h))
    mu: float             # max(sigma lambda_max(P_eta), lambda_max(P_z))

    def omega(self, h: float) -> np.ndarray:
        """Omega_sigma(h), affine in h."""
        return np.array([
            [self.sigma * self.output_margin - h * self.omega_cross, -self.omega_cross],
            [-self.omega_cross, self.zero_margin - h * self.omega_cross],
        ])

    def lipschitz_constant(self, radius: float) -> float:
        """Lipschitz bound of V on the ball of the given radius: 4 mu radius."""
        return 4.0 * self.mu * radius


@dataclass(frozen=True)
class QcqpCoefficients:
    Lambda: np.ndarray
    lambda_vec: np.ndarray
    l: float

    def evaluate(self, u: np.ndarray) -> float:
        """u^T Lambda u + 2 lambda^T u + l."""
        u = np.asarray(u, dtype=float)
        return float(u @ self.Lambda @ u + 2.0 * self.lambda_vec @ u + self.l)


def _spd_extremes(M: np.ndarray, name: str):
    lambda_min, lambda_max = sym_eig_extremes(M)
    if lambda_min <= 0:
        raise BadParameter(f"{name} must be positive-definite (lambda_min = {lambda_min:.3e})")
    return lambda_min, lambda_max


def design_output_clf(sys: NormalFormSystem, K: np.ndarray, Q_eta: np.ndarray, c: float) -> ClfDesign:
    if not 0.0 < c < 1.0:
        raise BadParameter(f"c must lie in (0, 1), got {c}")
    K = np.array(K, dtype=float, ndmin=2)
    Q_eta = np.array(Q_eta, dtype=float, ndmin=2)
    if K.shape != (sys.k, sys.gamma):
        raise BadParameter(f"K must be {sys.k}x{sys.gamma}, got {K.shape}")
    if Q_eta.shape != (sys.gamma, sys.gamma):
        raise BadParameter(f"Q_eta must be {sys.gamma}x{sys.gamma}, got {Q_eta.shape}")
    lambda_min_Q, _ = _spd_extremes(Q_eta, "Q_eta")

    A_cl = sys.A - sys.B @ K
    try:
        P_eta = solve_continuous_lyapunov(A_cl, Q_eta)
    except (SingularMatrix, NotPositiveDefinite) as e:
        raise NotHurwitz(f"A - BK is not Hurwitz: {e}") from e

    _, curvature = sym_eig_extremes(A_cl.T @ P_eta @ A_cl)
    h_star_eta = (1.0 - c) * lambda_min_Q / curvature
    logger.info(f"Output CLF designed: h*_eta = {h_star_eta:.6f} (c = {c})")
    return ClfDesign(
        K=K,
        A_cl=A_cl,
        P_eta=P_eta,
        Q_eta=Q_eta,
        c=float(c),
        h_star_eta=float(h_star_eta),
        lambda_min_Q=float(lambda_min_Q),
    )


def v_eta(design: ClfDesign, eta: np.ndarray) -> float:
    eta = np.asarray(eta, dtype=float)
    return float(eta @ design.P_eta @ eta)


def grad_v_eta(design: ClfDesign, eta: np.ndarray) -> np.ndarray:
    return 2.0 * design.P_eta @ np.asarray(eta, dtype=float)


def qcqp_coefficients(
    design: ClfDesign, sys: NormalFormSystem, xi: np.ndarray, h: float
) -> QcqpCoefficients:
    if h <= 0:
        raise BadParameter(f"sample period must be positive, got h={h}")
    if h > design.h_star_eta:
        logger.warning(
            f"h = {h:g} exceeds h*_eta = {design.h_star_eta:.6g}; feasibility is not guaranteed"
        )
    xi = sys.guard(xi)
    eta, _ = sys.split(xi)
    f = np.asarray(sys.f_eta(xi), dtype=float)
    g = sys.input_gain(xi)
    P = design.P_eta

    Lambda = h * g.T @ P @ g
    lambda_vec = g.T @ P @ (eta + h * f)
    l = f @ P @ (2.0 * eta + h * f) + design.c * design.lambda_min_Q * float(eta @ eta)
    return QcqpCoefficients(Lambda=0.5 * (Lambda + Lambda.T), lambda_vec=lambda_vec, l=float(l))


def design_zero_clf(sys: NormalFormSystem, Q_z: np.ndarray, d: float) -> ZeroDynamicsClf:
    if sys.gamma == sys.n:
        raise BadParameter("system is full-state linearizable; there are no zero-dynamics")
    if not 0.0 < d < 1.0:
        raise BadParameter(f"d must lie in (0, 1), got {d}")
    dim = sys.n - sys.gamma
    Q_z = np.array(Q_z, dtype=float, ndmin=2)
    if Q_z.shape != (dim, dim):
        raise BadParameter(f"Q_z must be {dim}x{dim}, got {Q_z.shape}")
    lambda_min_Qz, _ = _spd_extremes(Q_z, "Q_z")

    J = jacobian_zero_dynamics(sys, np.zeros(dim))
    try:
        P_z = solve_continuous_lyapunov(J, Q_z)
    except (SingularMatrix, NotPositiveDefinite) as e:
        raise NotHurwitz(f"zero-dynamics linearization is not Hurwitz: {e}") from e

    _, curvature = sym_eig_extremes(J.T @ P_z @ J)
    h_star_z = (1.0 - d) * lambda_min_Qz / curvature if curvature > 0 else float("inf")
    decay = d * lambda_min_Qz
    logger.info(f"Zero-dynamics Lyapunov function designed: decay = {decay:.6g}, h*_z = {h_star_z:.6g}")
    return ZeroDynamicsClf(
        P_z=P_z, Q_z=Q_z, d=float(d), decay=float(decay), h_star_z=float(h_star_z), jacobian=J
    )


def compose_lyapunov(
    design: ClfDesign, zero: ZeroDynamicsClf, L_q: float, h2_star: float
) -> CompositeLyapunov:
    if L_q <= 0:
        raise BadParameter(f"L_q must be positive, got {L_q}")
    if h2_star <= 0:
        raise BadParameter(f"h2_star must be positive, got {h2_star}")

    _, p_z_max = sym_eig_extremes(zero.P_z)
    lambda_min_Qz, _ = sym_eig_extremes(zero.Q_z)
    omega_cross = p_z_max * L_q
    zero_margin = zero.d * lambda_min_Qz
    h2_bound = zero_margin / omega_cross
    if h2_star >= h2_bound:
        raise BadParameter(f"h2_star = {h2_star:g} must be below d lambda_min(Q_z) / omega_x = {h2_bound:.6g}")

    h1_star = min(design.h_star_eta, zero.h_star_z)
    if h2_star > h1_star:
        logger.warning(f"h2_star = {h2_star:g} exceeds h*_1 = {h1_star:.6g}")

    output_margin = design.c * design.lambda_min_Q
    omega_z = zero_margin - h2_star * omega_cross
    sigma_lower = (omega_cross ** 2 / omega_z + h2_star * omega_cross) / output_margin
    sigma = SIGMA_MARGIN * sigma_lower

    _, p_eta_max = sym_eig_extremes(design.P_eta)
    draft = CompositeLyapunov(
        P_z=zero.P_z,
        Q_z=zero.Q_z,
        d=zero.d,
        L_q=float(L_q),
        sigma=float(sigma),
        h2_star=float(h2_star),
        sigma_lower_bound=float(sigma_lower),
        omega_cross=float(omega_cross),
        output_margin=float(output_margin),
        zero_margin=float(zero_margin),
        decay_rate=0.0,
        mu=float(max(sigma * p_eta_max, p_z_max)),
    )

    # Omega is affine in h: endpoints plus interior samples
    samples = np.linspace(0.0, h2_star, CERTIFICATE_INTERIOR_SAMPLES + 2)
    eigenvalues = [sym_eig_extremes(draft.omega(h))[0] for h in samples]
    worst = int(np.argmin(eigenvalues))
    if eigenvalues[worst] <= 0:
        raise CertificateFailed(
            f"Omega_sigma(h) not positive-definite at h = {samples[worst]:.6g} "
            f"(lambda_min = {eigenvalues[worst]:.3e})"
        )

    logger.info(
        f"Composite certificate: sigma = {sigma:.6g} (lower bound {sigma_lower:.6g}), "
        f"min lambda_min(Omega) = {eigenvalues[worst]:.6g}"
    )
    return replace(draft, decay_rate=float(eigenvalues[worst]))


def v_composite(comp: CompositeLyapunov, design: ClfDesign, xi: np.ndarray) -> float:
    """sigma eta^T P_eta eta + z^T P_z z."""
    xi = np.asarray(xi, dtype=float)
    eta, z = xi[: design.gamma], xi[design.gamma:]
    return comp.sigma * v_eta(design, eta) + float(z @ comp.P_z @ z)


def design_summary(
    design: ClfDesign,
    zero: Optional[ZeroDynamicsClf] = None,
    comp: Optional[CompositeLyapunov] = None,
    defaults_used=(),
    certification_radius: Optional[float] = None,
) -> Dict[str, Any]:
    """JSON-ready summary of a design.

    With a certification radius the Lipschitz bound of the composite V on that
    ball is reported as ``lipschitz_V``.
    """
    summary: Dict[str, Any] = {
        "K": design.K.tolist(),
        "P_eta": design.P_eta.tolist(),
        "Q_eta": design.Q_eta.tolist(),
        "c": design.c,
        "h_star_eta": design.h_star_eta,
        "sigma": None,
        "P_z": None,
        "L_q": None,
    }
    if zero is not None:
        summary.update({"P_z": zero.P_z.tolist(), "Q_z": zero.Q_z.tolist(), "d": zero.d, "h_star_z": zero.h_star_z})
    if comp is not None:
        summary.update({
            "sigma": comp.sigma,
            "sigma_lower_bound": comp.sigma_lower_bound,
            "L_q": comp.L_q,
            "h2_star": comp.h2_star,
            "decay_rate": comp.decay_rate,
        })
        if certification_radius is not None:
            summary["certification_radius"] = certification_radius
            summary["lipschitz_V"] = comp.lipschitz_constant(certification_radius)
    summary["defaults_used"] = sorted(defaults_used)
    return summary
