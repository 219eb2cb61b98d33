"""
Logging setup and the progress channel used by the runner, CLI and API
"""

import logging
import os
from typing import Optional

_configured = False

logger = logging.getLogger('boundlda')


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """
    Configures the root logger once.

    Args:
        level: Level name (default LOG_LEVEL env or INFO)
        log_file: Optional file that receives a copy of every record (default LOG_FILE env)
    """
    global _configured
    if _configured:
        return

    level = (level or os.getenv('LOG_LEVEL', 'INFO')).upper()
    log_file = log_file or os.getenv('LOG_FILE')

    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        handlers=handlers,
    )
    _configured = True


def log_event(message: str, level: int = logging.INFO) -> None:
    """Send a progress message to the boundlda logger"""
    logger.log(level, message)
