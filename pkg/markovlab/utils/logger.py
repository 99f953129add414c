import logging
import sys

from markovlab.config import settings

LOGGER_NAME = "markovlab"

def get_logger(name: str = LOGGER_NAME):
    if name != LOGGER_NAME and not name.startswith(LOGGER_NAME + "."):
        name = f"{LOGGER_NAME}.{name}"
    root = logging.getLogger(LOGGER_NAME)
    if not root.handlers:
        root.setLevel(settings.LOG_LEVEL.upper())
        # stdout is reserved for `solve` output
        handler = logging.StreamHandler(sys.stderr)
        formatter = logging.Formatter(
            "%(asctime)s | %(levelname)s | %(name)s | %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        handler.setFormatter(formatter)
        root.addHandler(handler)
    return logging.getLogger(name)
