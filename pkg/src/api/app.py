from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from src.core.config import settings
from src.core.exceptions import SampledClfError
from src.utils.logging import logger

from .routes import router


def create_app() -> FastAPI:
    app = FastAPI(
        title=settings.app_name,
        version=settings.app_version,
        description=settings.app_description,
        docs_url="/docs" if settings.DEBUG else None,
        redoc_url="/redoc" if settings.DEBUG else None,
    )

    @app.exception_handler(SampledClfError)
    async def toolkit_exception_handler(request: Request, exc: SampledClfError):
        logger.warning(f"{type(exc).__name__} on {request.url}: {exc}")
        return JSONResponse(
            status_code=422,
            content={"success": False, "error": type(exc).__name__, "message": str(exc)},
        )

    @app.exception_handler(Exception)
    async def global_exception_handler(request: Request, exc: Exception):
        logger.error(f"Unhandled exception on {request.url}: {exc}", exc_info=True)
        return JSONResponse(
            status_code=500, content={"success": False, "message": "Internal server error"}
        )

    app.include_router(router, prefix=settings.API_PREFIX)
    return app
