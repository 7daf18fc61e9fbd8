# src/services/simulation.py

"""
Zero-order-hold closed loops, practical-stability sweeps over sample
periods, and trajectory/summary export.
"""

import csv
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from src.core.config import settings
from src.core.exceptions import BadParameter, SampledClfError
from src.models.clf import ClfDesign, CompositeLyapunov, v_composite, v_eta
from src.models.controllers import ControlResult, ControllerFamily
from src.models.system import NormalFormSystem
from src.services.discretization import StepConfig, euler_step, exact_step

logger = logging.getLogger(__name__)

Controller = Callable[[np.ndarray], ControlResult]
PathLike = Union[str, Path]

MODELS = ("exact", "euler")

# a run counts as settled when it stays within R_target over the final quarter of the horizon
SETTLE_FRACTION = 0.75


@dataclass
class Trajectory:
    h: float
    times: np.ndarray
    states: np.ndarray                      # (steps + 1, n)
    inputs: np.ndarray                      # (steps, m)
    v_eta: np.ndarray                       # (steps + 1,)
    residuals: np.ndarray                   # (steps,)
    statuses: List[str] = field(default_factory=list)
    v_composite: Optional[np.ndarray] = None
    terminated_early: bool = False
    reason: Optional[str] = None

    @property
    def steps(self) -> int:
        return len(self.inputs)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


class SweepRecord(BaseModel):
    h: float
    terminal_norm: float
    peak_norm: float
    settled_time: Optional[float]
    settled: bool = False
    R_target: float
    terminated_early: bool = False
    reason: Optional[str] = None


class SweepSummary(BaseModel):
    records: List[SweepRecord]


def run_closed_loop(
    sys: NormalFormSystem,
    controller: Controller,
    xi0: np.ndarray,
    h: float,
    T: float,
    cfg: Optional[StepConfig] = None,
    *,
    design: ClfDesign,
    composite: Optional[CompositeLyapunov] = None,
    model: str = "exact",
) -> Trajectory:
    """
    Run round(T / h) sample periods: evaluate the controller at xi_k, hold the
    input, advance with the exact map (or the Euler map with ``model="euler"``).

    Domain violations, infeasible controls and other toolkit errors end the
    run early and are recorded on the trajectory instead of raised.
    """
    if not np.isfinite(h) or h <= 0:
        raise BadParameter(f"sample period must be positive, got h={h}")
    if T < h:
        raise BadParameter(f"horizon T={T} shorter than one sample period h={h}")
    if model not in MODELS:
        raise BadParameter(f"unknown model '{model}', expected one of {list(MODELS)}")
    step_cfg = StepConfig(h=h, substeps=cfg.substeps if cfg else settings.default_substeps)
    steps = int(round(T / h))

    xi = sys.guard(xi0).copy()
    states, inputs, residuals, statuses = [xi], [], [], []
    reason = None
    for k in range(steps):
        try:
            result = controller(xi)
            if not result.feasible:
                reason = f"infeasible control at step {k}"
                break
            u = np.asarray(result.u, dtype=float)
            if model == "exact":
                xi_next = exact_step(sys, xi, u, step_cfg)
            else:
                xi_next = sys.guard(euler_step(sys, xi, u, h))
        except SampledClfError as e:
            reason = f"{type(e).__name__} at step {k}: {e}"
            break
        inputs.append(u)
        residuals.append(result.constraint_residual)
        statuses.append(result.status.value)
        states.append(xi_next)
        xi = xi_next
        logger.debug(f"step {k}: |xi| = {np.linalg.norm(xi):.6g}, u = {u}")

    if reason:
        logger.warning(f"Closed loop (h = {h:g}) terminated early: {reason}")

    states = np.array(states)
    gamma = design.gamma
    return Trajectory(
        h=h,
        times=h * np.arange(len(states)),
        states=states,
        inputs=np.array(inputs).reshape(len(inputs), sys.m),
        v_eta=np.array([v_eta(design, s[:gamma]) for s in states]),
        residuals=np.array(residuals, dtype=float),
        statuses=statuses,
        v_composite=(
            np.array([v_composite(composite, design, s) for s in states]) if composite else None
        ),
        terminated_early=reason is not None,
        reason=reason,
    )


def settled_time(traj: Trajectory, R_target: float) -> Optional[float]:
    """First sample time after which every recorded state stays within R_target."""
    if traj.terminated_early:
        return None
    outside = np.nonzero(traj.norms > R_target)[0]
    if outside.size == 0:
        return float(traj.times[0])
    first_inside = outside[-1] + 1
    if first_inside >= len(traj.times):
        return None
    return float(traj.times[first_inside])


def is_settled(traj: Trajectory, R_target: float) -> bool:
    settle = settled_time(traj, R_target)
    return settle is not None and settle <= SETTLE_FRACTION * float(traj.times[-1]) + 1e-9


def sweep_record(traj: Trajectory, R_target: float) -> SweepRecord:
    norms = traj.norms
    return SweepRecord(
        h=traj.h,
        terminal_norm=float(norms[-1]),
        peak_norm=float(norms.max()),
        settled_time=settled_time(traj, R_target),
        settled=is_settled(traj, R_target),
        R_target=R_target,
        terminated_early=traj.terminated_early,
        reason=traj.reason,
    )


def sweep_trajectories(
    sys: NormalFormSystem,
    controller_family: ControllerFamily,
    xi0: np.ndarray,
    hs: Sequence[float],
    T: float,
    cfg: Optional[StepConfig] = None,
    *,
    design: ClfDesign,
    composite: Optional[CompositeLyapunov] = None,
    workers: Optional[int] = None,
) -> List[Tuple[float, Trajectory]]:
    """One closed loop per requested sample period, run on a thread pool.

    Returns ``(h, trajectory)`` pairs sorted by h descending. Repeated periods
    keep one pair each, in request order.
    """
    hs = [float(h) for h in hs]
    if not hs:
        raise BadParameter("sweep needs at least one sample period")
    if any(not np.isfinite(h) or h <= 0 for h in hs):
        raise BadParameter(f"sample periods must be positive, got {hs}")

    def run(h: float) -> Trajectory:
        return run_closed_loop(
            sys, partial(controller_family, h), xi0, h, T, cfg, design=design, composite=composite
        )

    with ThreadPoolExecutor(max_workers=workers or settings.WORKERS) as pool:
        trajectories = list(pool.map(run, hs))
    return sorted(zip(hs, trajectories), key=lambda item: -item[0])


def summarize_sweep(trajectories: Sequence[Tuple[float, Trajectory]], R_target: float) -> SweepSummary:
    records = [sweep_record(traj, R_target) for _, traj in trajectories]
    return SweepSummary(records=sorted(records, key=lambda r: -r.h))


def practical_stability_sweep(
    sys: NormalFormSystem,
    controller_family: ControllerFamily,
    xi0: np.ndarray,
    hs: Sequence[float],
    T: float,
    R_target: float,
    cfg: Optional[StepConfig] = None,
    *,
    design: ClfDesign,
    composite: Optional[CompositeLyapunov] = None,
) -> SweepSummary:
    trajectories = sweep_trajectories(
        sys, controller_family, xi0, hs, T, cfg, design=design, composite=composite
    )
    summary = summarize_sweep(trajectories, R_target)
    for record in summary.records:
        logger.info(
            f"sweep h = {record.h:g}: terminal {record.terminal_norm:.3e}, "
            f"peak {record.peak_norm:.3g}, settled at {record.settled_time}"
        )
    return summary


def terminal_trend_holds(summary: SweepSummary, slack: float = 1.5) -> bool:
    """Each terminal norm is at most ``slack`` times the one at the next larger h."""
    records = summary.records
    return all(
        smaller.terminal_norm <= slack * larger.terminal_norm
        for larger, smaller in zip(records, records[1:])
    )


# =============================================================================
# Export
# =============================================================================

def _atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = None
    try:
        with tempfile.NamedTemporaryFile(
            mode="w", dir=path.parent, suffix=".tmp", delete=False, newline="", encoding="utf-8"
        ) as tmp:
            tmp.write(text)
            temp_path = tmp.name
        os.replace(temp_path, path)
        temp_path = None
    finally:
        if temp_path and os.path.exists(temp_path):
            os.remove(temp_path)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def trajectory_csv(traj: Trajectory) -> str:
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["t"] + [f"xi_{i + 1}" for i in range(n)] + [f"u_{j + 1}" for j in range(m)] + ["V_eta", "residual"]
    )
    for k, (t, state) in enumerate(zip(traj.times, traj.states)):
        if k < traj.steps:
            held = [_fmt(v) for v in traj.inputs[k]]
            residual = _fmt(traj.residuals[k])
        else:
            held = [""] * m
            residual = ""
        writer.writerow([_fmt(t)] + [_fmt(v) for v in state] + held + [_fmt(traj.v_eta[k]), residual])
    return buffer.getvalue()


def export_trajectory(traj: Trajectory, path: PathLike) -> None:
    """Write the trajectory as CSV (17 significant digits), atomically."""
    _atomic_write_text(path, trajectory_csv(traj))
    logger.info(f"Trajectory written to {path} ({len(traj.states)} samples)")


def write_json(payload, path: PathLike) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def write_sweep_summary(summary: SweepSummary, path: PathLike) -> None:
    write_json([record.model_dump() for record in summary.records], path)
