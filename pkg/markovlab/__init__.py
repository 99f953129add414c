__version__ = "0.1.0"

from .app import main, parse_and_dispatch  # noqa: E402
