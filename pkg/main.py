#!/usr/bin/env python3
"""
Sampled-CLF
Sampled-data controller synthesis with control Lyapunov functions
------------------------------------------------------------------
python main.py design|simulate|sweep|consistency [flags]   command line
python main.py serve                                       HTTP API (uvicorn)
"""

import os
import sys

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import uvicorn

from src.api.app import create_app
from src.cli import main as cli_main
from src.core.config import settings
from src.utils.logging import logger, setup_logging

app = create_app()


def serve() -> None:
    setup_logging()
    host, port = settings.HOST, settings.PORT
    logger.info(f"{settings.app_name} {settings.app_version} on http://{host}:{port}{settings.API_PREFIX}")
    uvicorn.run("main:app", host=host, port=port, reload=False)


if __name__ == "__main__":
    if sys.argv[1:2] == ["serve"]:
        serve()
    else:
        sys.exit(cli_main(sys.argv[1:]))
