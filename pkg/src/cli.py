"""
Command-line entry point: design, simulate, sweep and consistency workflows.

Exit codes: 0 success, 1 check failed, 2 configuration error, 3 I/O error.
Results are written as files under ``--output``; nothing is printed to stdout.
"""

import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from src.api.schemas import ConsistencyRequest, RunConfig, SweepRequest
from src.core.exceptions import ConfigError, DegenerateData, SampledClfError
from src.services.workflows import create_workflow
from src.utils.logging import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


# =============================================================================
# Flag parsing
# =============================================================================

def _float_list(text: str) -> List[float]:
    """'1,0,1' -> [1.0, 0.0, 1.0]; an empty string gives an empty list."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _matrix(text: str) -> List[List[float]]:
    """'a,b;c,d' -> [[a, b], [c, d]]."""
    rows = [_float_list(row) for row in text.split(";")]
    if not rows or any(not row for row in rows):
        raise argparse.ArgumentTypeError(f"expected rows 'a,b;c,d', got '{text}'")
    return rows


def _lipschitz(text: str):
    """A positive number, or 'auto' to estimate L_q from the system."""
    if text.strip().lower() == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got '{text}'") from None


def _run_flags() -> argparse.ArgumentParser:
    """Flags shared by every subcommand; each maps onto a RunConfig field."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON file with RunConfig fields")
    common.add_argument("--system", help="system name (benchmark, linear)")
    common.add_argument("--controller", choices=["fbl", "clf-qp", "clf-qcqp"])
    common.add_argument("--h", type=float, help="sample period")
    common.add_argument("--T", type=float, help="simulation horizon")
    common.add_argument("--x0", type=_float_list, help="initial state, e.g. 1,0,1")
    common.add_argument("--K", type=_matrix, help="gain matrix, rows separated by ';'")
    common.add_argument("--Q-eta", type=_matrix)
    common.add_argument("--c", type=float)
    common.add_argument("--d", type=float)
    common.add_argument("--Q-z", type=_matrix)
    common.add_argument("--L-q", type=_lipschitz, help="Lipschitz bound of q in eta, or 'auto'")
    common.add_argument("--h2-star", type=float)
    common.add_argument("--substeps", type=int, help="RK4 substeps per sample period")
    common.add_argument("--R-target", type=float)
    common.add_argument("--output", dest="output_path", help="output directory")
    common.add_argument("--log-level", default=None)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _run_flags()
    parser = argparse.ArgumentParser(
        prog="sampled-clf",
        description="Sampled-data CLF controller synthesis and verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("design", parents=[common], help="write the CLF design summary")
    sub.add_parser("simulate", parents=[common], help="simulate one closed loop")

    sweep = sub.add_parser("sweep", parents=[common], help="closed loops over several sample periods")
    sweep.add_argument("--hs", type=_float_list, default=None, help="sample periods, e.g. 0.2,0.1")

    consistency = sub.add_parser("consistency", parents=[common], help="estimate the one-step consistency order")
    consistency.add_argument("--h0", type=float, default=None)
    consistency.add_argument("--levels", type=int, default=None)
    consistency.add_argument("--lattice-points", type=int, default=None)
    return parser


# =============================================================================
# Config assembly
# =============================================================================

def load_config_file(path: Optional[Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File values first, then every flag that was given on top."""
    data = load_config_file(args.config)
    for name in RunConfig.model_fields:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return RunConfig.model_validate(data)


def _given(args: argparse.Namespace, *names: str) -> Dict[str, Any]:
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


# =============================================================================
# Subcommands
# =============================================================================

def cmd_design(cfg: RunConfig) -> int:
    path = create_workflow(cfg).write_design()
    logger.info(f"Design summary written to {path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    summary = create_workflow(cfg).write_simulation()
    logger.info(
        f"Simulation finished: settled={summary.settled}, terminal |xi| = {summary.terminal_norm:.3e}"
    )
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args: argparse.Namespace) -> int:
    request = SweepRequest(config=cfg, **_given(args, "hs"))
    summary = create_workflow(cfg).write_sweep(request.hs)
    logger.info(f"Sweep finished: {len(summary.records)} sample periods")
    return EXIT_OK


def cmd_consistency(cfg: RunConfig, args: argparse.Namespace) -> int:
    request = ConsistencyRequest(config=cfg, **_given(args, "h0", "levels", "lattice_points"))
    summary = create_workflow(cfg).write_consistency(request.h0, request.levels, request.lattice_points)
    logger.info(f"Consistency slope {summary.slope:.4f} ({'pass' if summary.passed else 'FAIL'})")
    return EXIT_OK if summary.passed else EXIT_CHECK_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse reports malformed flags with status 2
        return EXIT_CONFIG if e.code else EXIT_OK

    setup_logging(args.log_level)
    try:
        cfg = resolve_config(args)
        if args.command == "design":
            return cmd_design(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args)
        return cmd_consistency(cfg, args)
    except ValidationError as e:
        logger.error(f"Invalid configuration:\n{e}")
        return EXIT_CONFIG
    except DegenerateData as e:
        logger.error(f"Check could not be evaluated: {e}")
        return EXIT_CHECK_FAILED
    except SampledClfError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
