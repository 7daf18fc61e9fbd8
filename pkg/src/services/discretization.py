# src/services/discretization.py

"""
Discrete maps of the zero-order-hold system: the Euler approximation used
for synthesis, a fixed-substep RK4 stand-in for the exact map, and the
empirical one-step-consistency check between them.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.core.config import settings
from src.core.exceptions import BadParameter, DegenerateData
from src.models.system import NormalFormSystem, eval_dynamics

logger = logging.getLogger(__name__)

InputMap = Callable[[np.ndarray], np.ndarray]

DEGENERATE_ERROR = 1e-14


@dataclass(frozen=True)
class StepConfig:
    h: float
    substeps: int = field(default_factory=lambda: settings.default_substeps)

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise BadParameter(f"sample period must be positive, got h={self.h}")
        if self.substeps < 1:
            raise BadParameter(f"substeps must be >= 1, got {self.substeps}")


@dataclass(frozen=True)
class ConsistencyReport:
    slope: float
    hs: List[float]
    errors: List[float]
    # levels whose worst error was at round-off and left out of the fit
    dropped: List[float] = field(default_factory=list)


def euler_step(sys: NormalFormSystem, xi: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """xi + h (f_xi(xi) + g_xi(xi) u)."""
    xi = np.asarray(xi, dtype=float)
    return xi + h * eval_dynamics(sys, xi, u)


def exact_step(sys: NormalFormSystem, xi: np.ndarray, u: np.ndarray, cfg: StepConfig) -> np.ndarray:
    """Flow over one sample period with u held, by classical RK4 on equal substeps.

    Every stage evaluation passes through the domain guard, so a trajectory
    leaving the admissible ball mid-period raises DomainViolation.
    """
    x = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=float)
    dt = cfg.h / cfg.substeps
    for _ in range(cfg.substeps):
        k1 = eval_dynamics(sys, x, u)
        k2 = eval_dynamics(sys, x + 0.5 * dt * k1, u)
        k3 = eval_dynamics(sys, x + 0.5 * dt * k2, u)
        k4 = eval_dynamics(sys, x + dt * k3, u)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return sys.guard(x)


def one_step_error(
    sys: NormalFormSystem, controller: InputMap, xi: np.ndarray, cfg: StepConfig
) -> np.ndarray:
    """Euclidean gap between the exact and Euler maps under u = controller(xi).

    For stacked states (vectorized systems) returns one error per state.
    """
    u = controller(xi)
    gap = exact_step(sys, xi, u, cfg) - euler_step(sys, xi, u, cfg.h)
    return np.linalg.norm(gap, axis=-1)


def zero_input(sys: NormalFormSystem) -> InputMap:
    """u = 0, shaped for single or stacked states."""
    return lambda xi: np.zeros(np.shape(xi)[:-1] + (sys.m,))


def estimate_consistency_order(
    sys: NormalFormSystem,
    controller: InputMap,
    states: Sequence[np.ndarray],
    h0: float,
    levels: int,
    substeps: Optional[int] = None,
    batch: Optional[bool] = None,
) -> ConsistencyReport:
    """
    Max-over-states one-step error at h0, h0/2, ..., h0/2^(levels-1) and the
    least-squares slope of log(error) against log(h).

    The controller is called once per state. With ``batch`` (default: the
    system's ``vectorized`` flag) the held inputs are stacked and all states
    are stepped together.
    """
    if levels < 2:
        raise BadParameter(f"need at least 2 levels, got {levels}")
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] == 0:
        raise BadParameter("no states supplied")
    batch = sys.vectorized if batch is None else batch
    substeps = settings.default_substeps if substeps is None else substeps
    inputs = np.stack([np.asarray(controller(xi), dtype=float).reshape(sys.m) for xi in states])

    hs = [h0 / 2 ** level for level in range(levels)]
    errors = []
    for h in hs:
        cfg = StepConfig(h=h, substeps=substeps)
        if batch:
            gap = exact_step(sys, states, inputs, cfg) - euler_step(sys, states, inputs, h)
            worst = float(np.max(np.linalg.norm(gap, axis=-1)))
        else:
            worst = max(
                float(np.linalg.norm(exact_step(sys, xi, u, cfg) - euler_step(sys, xi, u, h)))
                for xi, u in zip(states, inputs)
            )
        errors.append(worst)
        logger.debug(f"consistency h={h:.6g}: max one-step error {worst:.6e}")

    usable = [(h, e) for h, e in zip(hs, errors) if e > DEGENERATE_ERROR]
    dropped = [h for h, e in zip(hs, errors) if e <= DEGENERATE_ERROR]
    if len(usable) < 2:
        raise DegenerateData("one-step errors vanish; consistency order is undefined")
    if dropped:
        logger.warning(f"Consistency fit skips {len(dropped)} level(s) at round-off: h = {dropped}")
    log_h, log_e = np.log(np.array(usable)).T
    slope = float(np.polyfit(log_h, log_e, 1)[0])
    logger.info(f"Estimated one-step consistency order {slope:.4f} over {len(states)} states")
    return ConsistencyReport(slope=slope, hs=hs, errors=errors, dropped=dropped)


def state_lattice(n: int, points: int, half_width: float = 1.0) -> np.ndarray:
    """Deterministic lattice of ``points`` per axis over [-half_width, half_width]^n."""
    axis = np.linspace(-half_width, half_width, points)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)
