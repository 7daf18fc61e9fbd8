# src/models/system.py

"""
Control-affine systems supplied in normal form.

State convention: xi = (eta, z) with eta the first ``gamma`` entries (output
block) and z the remaining ``n - gamma`` entries (zero-coordinates). Callbacks
follow the last-axis convention: they receive xi with shape ``(..., n)`` and
return ``f_eta`` as ``(..., gamma)``, ``g_eta`` as ``(..., gamma, m)`` and ``q``
as ``(..., n - gamma)``. Single-state evaluation only needs shape ``(n,)``;
systems flagged ``vectorized`` also accept stacked states.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from src.core.config import settings
from src.core.exceptions import BadParameter, DomainViolation
from src.utils.linalg import controllability_rank

logger = logging.getLogger(__name__)

StateMap = Callable[[np.ndarray], np.ndarray]

CONTROLLABILITY_TOL = 1e-9
LIPSCHITZ_SAFETY_FACTOR = 1.5


@dataclass(frozen=True)
class NormalFormSystem:
    n: int
    gamma: int
    m: int
    k: int
    f_eta: StateMap
    g_eta: StateMap
    q: StateMap
    A: np.ndarray
    B: np.ndarray
    domain_radius: float = field(default_factory=lambda: settings.domain_radius)
    name: str = "custom"
    vectorized: bool = False

    def __post_init__(self):
        if not 1 <= self.gamma <= self.n:
            raise BadParameter(f"need 1 <= gamma <= n, got gamma={self.gamma}, n={self.n}")
        if not 1 <= self.k <= self.m:
            raise BadParameter(f"need 1 <= k <= m, got k={self.k}, m={self.m}")
        if self.domain_radius <= 0:
            raise BadParameter(f"domain_radius must be positive, got {self.domain_radius}")

        A = np.array(self.A, dtype=float, ndmin=2)
        B = np.array(self.B, dtype=float, ndmin=2)
        if A.shape != (self.gamma, self.gamma):
            raise BadParameter(f"A must be {self.gamma}x{self.gamma}, got {A.shape}")
        if B.shape != (self.gamma, self.k):
            raise BadParameter(f"B must be {self.gamma}x{self.k}, got {B.shape}")
        rank = controllability_rank(A, B, tol=CONTROLLABILITY_TOL)
        if rank < self.gamma:
            raise BadParameter(f"(A, B) is not controllable: rank {rank} < {self.gamma}")

        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def split(self, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Partition a normal state into (eta, z)."""
        xi = np.asarray(xi, dtype=float)
        return xi[..., : self.gamma], xi[..., self.gamma:]

    def join(self, eta: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(eta, dtype=float), np.asarray(z, dtype=float)], axis=-1)

    def guard(self, xi: np.ndarray) -> np.ndarray:
        """Return xi as a float array, raising DomainViolation outside the norm ball."""
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1] != self.n:
            raise BadParameter(f"state must have {self.n} entries, got shape {xi.shape}")
        norms = np.linalg.norm(xi, axis=-1)
        if not np.all(np.isfinite(norms)) or np.any(norms > self.domain_radius):
            raise DomainViolation(
                f"state norm {np.max(norms):.6g} outside guard radius {self.domain_radius:g}"
            )
        return xi

    def input_gain(self, xi: np.ndarray) -> np.ndarray:
        """g_eta(xi) with the trailing (gamma, m) shape enforced."""
        g = np.asarray(self.g_eta(xi), dtype=float)
        return g.reshape(np.shape(xi)[:-1] + (self.gamma, self.m))


def _require_finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise DomainViolation(f"{what} returned non-finite values")
    return values


def eval_dynamics(sys: NormalFormSystem, xi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Normal-form vector field [f_eta + g_eta u ; q] under input u."""
    xi = sys.guard(xi)
    u = np.asarray(u, dtype=float)
    f = np.asarray(sys.f_eta(xi), dtype=float)
    g = sys.input_gain(xi)
    eta_dot = f + np.einsum("...ij,...j->...i", g, np.broadcast_to(u, xi.shape[:-1] + (sys.m,)))
    z_dot = np.asarray(sys.q(xi), dtype=float).reshape(xi.shape[:-1] + (sys.n - sys.gamma,))
    return _require_finite(np.concatenate([eta_dot, z_dot], axis=-1), "dynamics")


def eval_zero_dynamics(sys: NormalFormSystem, z: np.ndarray) -> np.ndarray:
    """q(0_gamma, z)."""
    z = np.asarray(z, dtype=float)
    xi = sys.guard(sys.join(np.zeros(z.shape[:-1] + (sys.gamma,)), z))
    return _require_finite(np.asarray(sys.q(xi), dtype=float).reshape(z.shape), "zero dynamics")


def jacobian_zero_dynamics(sys: NormalFormSystem, z0: np.ndarray) -> np.ndarray:
    """Central finite-difference Jacobian of z -> q(0, z) at z0."""
    z0 = np.asarray(z0, dtype=float).reshape(sys.n - sys.gamma)
    eps = 1e-6 * max(1.0, float(np.max(np.abs(z0), initial=0.0)))
    dim = z0.size
    J = np.empty((dim, dim))
    for j in range(dim):
        step = np.zeros(dim)
        step[j] = eps
        J[:, j] = (eval_zero_dynamics(sys, z0 + step) - eval_zero_dynamics(sys, z0 - step)) / (2 * eps)
    return J


def estimate_lipschitz_q(sys: NormalFormSystem, radius: float, points: int = 11) -> float:
    """
    Sampled estimate of the Lipschitz constant of q with respect to eta on the
    ball of the given radius, inflated by a 1.5 safety factor.
    """
    if sys.gamma == sys.n:
        raise BadParameter("system has no zero-dynamics block")
    axis = np.linspace(-radius, radius, points)
    best = 0.0
    for xi in itertools.product(axis, repeat=sys.n):
        xi = np.asarray(xi)
        eta, z = sys.split(xi)
        eta_norm = np.linalg.norm(eta)
        if eta_norm == 0.0 or np.linalg.norm(xi) > radius:
            continue
        pinned = sys.join(np.zeros(sys.gamma), z)
        ratio = np.linalg.norm(np.asarray(sys.q(xi)) - np.asarray(sys.q(pinned))) / eta_norm
        best = max(best, float(ratio))
    estimate = LIPSCHITZ_SAFETY_FACTOR * best
    logger.info(f"Estimated L_q on radius {radius:g}: {estimate:.6g} ({points} points per axis)")
    return estimate


# =============================================================================
# Shipped systems
# =============================================================================

def make_benchmark(domain_radius: Optional[float] = None) -> NormalFormSystem:
    """eta1' = eta2, eta2' = 10 sin(eta1) + u, z' = eta1^2 - z."""

    def f_eta(xi):
        return np.stack([xi[..., 1], 10.0 * np.sin(xi[..., 0])], axis=-1)

    def g_eta(xi):
        return np.broadcast_to(np.array([[0.0], [1.0]]), np.shape(xi)[:-1] + (2, 1))

    def q(xi):
        return (xi[..., 0] ** 2 - xi[..., 2])[..., np.newaxis]

    return NormalFormSystem(
        n=3,
        gamma=2,
        m=1,
        k=1,
        f_eta=f_eta,
        g_eta=g_eta,
        q=q,
        A=np.array([[0.0, 1.0], [0.0, 0.0]]),
        B=np.array([[0.0], [1.0]]),
        domain_radius=settings.domain_radius if domain_radius is None else domain_radius,
        name="benchmark",
        vectorized=True,
    )


def make_stable_linear(domain_radius: Optional[float] = None) -> NormalFormSystem:
    """xi' = -xi with one output coordinate, one zero-coordinate and one input."""
    return NormalFormSystem(
        n=2,
        gamma=1,
        m=1,
        k=1,
        f_eta=lambda xi: -xi[..., :1],
        g_eta=lambda xi: np.ones(np.shape(xi)[:-1] + (1, 1)),
        q=lambda xi: -xi[..., 1:],
        A=np.array([[0.0]]),
        B=np.array([[1.0]]),
        domain_radius=settings.domain_radius if domain_radius is None else domain_radius,
        name="linear",
        vectorized=True,
    )


SYSTEMS = {
    "benchmark": make_benchmark,
    "linear": make_stable_linear,
}


def build_system(name: str) -> NormalFormSystem:
    try:
        return SYSTEMS[name]()
    except KeyError:
        raise BadParameter(f"unknown system '{name}', expected one of {sorted(SYSTEMS)}") from None
