import logging
from typing import Optional

from src.core.config import settings

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger("src")


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> logging.Logger:
    """Configure root logging: stderr stream plus an optional file.

    Defaults come from settings (``SAMPLED_CLF_LOG_LEVEL``, ``SAMPLED_CLF_LOG_FILE``).
    """
    level = (level or settings.log_level).upper()
    log_file = log_file or settings.log_file

    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)
    return logger
