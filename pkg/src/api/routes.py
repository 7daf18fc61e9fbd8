from typing import Any, Dict, List

from fastapi import APIRouter
from starlette.concurrency import run_in_threadpool

from src.core.config import settings
from src.services.simulation import SweepRecord
from src.services.workflows import create_workflow
from src.utils.logging import logger

from .schemas import (
    ConsistencyRequest,
    ConsistencySummary,
    HealthCheckResponse,
    RunConfig,
    SimulationSummary,
    SweepRequest,
)

router = APIRouter()


@router.get("/health", response_model=HealthCheckResponse, tags=["Health"])
async def health_check():
    """Checks if the API is operational."""
    return HealthCheckResponse(status="healthy", version=settings.app_version)


@router.post("/design", tags=["Design"])
async def design(config: RunConfig) -> Dict[str, Any]:
    """Output CLF, zero-dynamics Lyapunov function and composite certificate."""
    logger.info(f"Design request for system '{config.system}'")
    workflow = await run_in_threadpool(create_workflow, config)
    return workflow.design_report()


@router.post("/simulate", response_model=SimulationSummary, tags=["Simulation"])
async def simulate(config: RunConfig):
    logger.info(f"Simulation request: controller={config.controller}, h={config.h:g}")

    def run() -> SimulationSummary:
        _, summary = create_workflow(config).simulate()
        return summary

    return await run_in_threadpool(run)


@router.post("/sweep", response_model=List[SweepRecord], tags=["Simulation"])
async def sweep(request: SweepRequest):
    logger.info(f"Sweep request over {len(request.hs)} sample periods")

    def run() -> List[SweepRecord]:
        _, summary = create_workflow(request.config).sweep(request.hs)
        return summary.records

    return await run_in_threadpool(run)


@router.post("/consistency", response_model=ConsistencySummary, tags=["Verification"])
async def consistency(request: ConsistencyRequest):
    logger.info(f"Consistency request: h0={request.h0:g}, levels={request.levels}")

    def run() -> ConsistencySummary:
        workflow = create_workflow(request.config)
        return workflow.consistency(request.h0, request.levels, request.lattice_points)

    return await run_in_threadpool(run)
