# src/services/workflows.py

"""
Design / simulate / sweep / consistency workflows driven by a RunConfig.
Shared by the command line and the HTTP API.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.api.schemas import ConsistencySummary, RunConfig, SimulationSummary
from src.core.config import settings
from src.core.exceptions import SampledClfError
from src.models.clf import (
    ClfDesign,
    CompositeLyapunov,
    ZeroDynamicsClf,
    compose_lyapunov,
    design_output_clf,
    design_summary,
    design_zero_clf,
)
from src.models.controllers import make_controller_family
from src.models.system import NormalFormSystem, build_system, estimate_lipschitz_q
from src.services.discretization import (
    StepConfig,
    estimate_consistency_order,
    state_lattice,
    zero_input,
)
from src.services.simulation import (
    SweepSummary,
    Trajectory,
    export_trajectory,
    is_settled,
    run_closed_loop,
    settled_time,
    summarize_sweep,
    sweep_trajectories,
    write_json,
    write_sweep_summary,
)

logger = logging.getLogger(__name__)

CONSISTENCY_SLOPE_RANGE = (1.9, 2.1)

# values with no published counterpart; flagged in design outputs when not overridden
UNPUBLISHED_DEFAULTS = ("d", "Q_z")


class ControlWorkflow:
    """A designed controller for one RunConfig, ready to simulate and verify."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.system: NormalFormSystem = build_system(cfg.system)
        self.xi0 = self.system.guard(np.asarray(cfg.x0, dtype=float))
        self.design: ClfDesign = design_output_clf(self.system, cfg.K, cfg.Q_eta, cfg.c)

        self.zero: Optional[ZeroDynamicsClf] = None
        self.composite: Optional[CompositeLyapunov] = None
        self.L_q_estimated = False
        if self.system.gamma < self.system.n:
            L_q = cfg.L_q
            if L_q is None:
                L_q = estimate_lipschitz_q(self.system, settings.certification_radius)
                self.L_q_estimated = True
            self.zero = design_zero_clf(self.system, cfg.Q_z, cfg.d)
            self.composite = compose_lyapunov(self.design, self.zero, L_q, cfg.h2_star)

        self.family = make_controller_family(cfg.controller, self.design, self.system)
        self.step_cfg = StepConfig(h=cfg.h, substeps=cfg.substeps)
        logger.info(
            f"Workflow ready: system={cfg.system}, controller={cfg.controller}, "
            f"h={cfg.h:g}, h*_eta={self.design.h_star_eta:.6f}"
        )

    @property
    def output_dir(self) -> Path:
        return Path(self.cfg.output_path)

    # ------------------------------------------------------------------
    # Design
    # ------------------------------------------------------------------
    def design_report(self) -> Dict[str, Any]:
        defaults = [name for name in UNPUBLISHED_DEFAULTS if name not in self.cfg.model_fields_set]
        summary = design_summary(
            self.design,
            self.zero,
            self.composite,
            defaults_used=defaults,
            certification_radius=settings.certification_radius,
        )
        summary["L_q_estimated"] = self.L_q_estimated
        return summary

    # ------------------------------------------------------------------
    # Simulation
    # ------------------------------------------------------------------
    def simulate(self, h: Optional[float] = None) -> Tuple[Trajectory, SimulationSummary]:
        h = self.cfg.h if h is None else h
        traj = run_closed_loop(
            self.system,
            lambda xi: self.family(h, xi),
            self.xi0,
            h,
            self.cfg.T,
            self.step_cfg,
            design=self.design,
            composite=self.composite,
        )
        return traj, self.summarize(traj)

    def summarize(self, traj: Trajectory) -> SimulationSummary:
        norms = traj.norms
        settle = settled_time(traj, self.cfg.R_target)
        return SimulationSummary(
            settled=is_settled(traj, self.cfg.R_target),
            terminal_norm=float(norms[-1]),
            peak_norm=float(norms.max()),
            h_star_eta=self.design.h_star_eta,
            settled_time=settle,
            R_target=self.cfg.R_target,
            steps=traj.steps,
            terminated_early=traj.terminated_early,
            reason=traj.reason,
        )

    def sweep(self, hs: Sequence[float]) -> Tuple[List[Tuple[float, Trajectory]], SweepSummary]:
        trajectories = sweep_trajectories(
            self.system,
            self.family,
            self.xi0,
            hs,
            self.cfg.T,
            self.step_cfg,
            design=self.design,
            composite=self.composite,
        )
        return trajectories, summarize_sweep(trajectories, self.cfg.R_target)

    # ------------------------------------------------------------------
    # One-step consistency
    # ------------------------------------------------------------------
    def consistency(self, h0: float, levels: int, lattice_points: Optional[int] = None) -> ConsistencySummary:
        points = lattice_points or settings.consistency_lattice_points
        states = state_lattice(self.system.n, points)
        report = estimate_consistency_order(
            self.system, zero_input(self.system), states, h0, levels, substeps=self.cfg.substeps
        )
        low, high = CONSISTENCY_SLOPE_RANGE
        return ConsistencySummary(
            slope=report.slope,
            hs=report.hs,
            errors_per_level=report.errors,
            dropped_levels=report.dropped,
            passed=low <= report.slope <= high,
        )

    # ------------------------------------------------------------------
    # File outputs
    # ------------------------------------------------------------------
    def write_design(self) -> Path:
        path = self.output_dir / "design.json"
        write_json(self.design_report(), path)
        return path

    def write_simulation(self) -> SimulationSummary:
        traj, summary = self.simulate()
        export_trajectory(traj, self.output_dir / "trajectory.csv")
        write_json(summary.model_dump(), self.output_dir / "summary.json")
        return summary

    def write_sweep(self, hs: Sequence[float]) -> SweepSummary:
        trajectories, summary = self.sweep(hs)
        for name, (_, traj) in zip(sweep_file_names([h for h, _ in trajectories]), trajectories):
            export_trajectory(traj, self.output_dir / name)
        write_sweep_summary(summary, self.output_dir / "sweep.json")
        return summary

    def write_consistency(self, h0: float, levels: int, lattice_points: Optional[int] = None) -> ConsistencySummary:
        summary = self.consistency(h0, levels, lattice_points)
        write_json(summary.model_dump(), self.output_dir / "consistency.json")
        return summary


def sweep_file_names(hs: Sequence[float]) -> List[str]:
    """trajectory_h<h>.csv per period; repeats get a _2, _3, ... suffix."""
    seen: Dict[str, int] = {}
    names = []
    for h in hs:
        stem = f"trajectory_h{h:g}"
        seen[stem] = seen.get(stem, 0) + 1
        names.append(f"{stem}.csv" if seen[stem] == 1 else f"{stem}_{seen[stem]}.csv")
    return names


def create_workflow(cfg: RunConfig) -> ControlWorkflow:
    try:
        return ControlWorkflow(cfg)
    except SampledClfError:
        # reported by the caller (CLI exit code or HTTP 422)
        raise
    except Exception as e:
        logger.error(f"Failed to build workflow: {e}", exc_info=True)
        raise
