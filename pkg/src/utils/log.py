from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

from src.utils.config import get_log_level

_stderr = Console(stderr=True)


def configure_logging(verbose: bool = False) -> None:
    """Route all ``src.*`` loggers to a rich handler on stderr."""
    level = "DEBUG" if verbose else get_log_level()
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(console=_stderr, show_path=verbose, rich_tracebacks=verbose)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
    root.setLevel(level)
