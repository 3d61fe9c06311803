"""
Logging setup for the command line
"""

import logging
import sys


LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


def configure_logging(level: str = 'INFO') -> None:
    """
    Install a single stderr handler on the root logger

    Stdout stays reserved for command output.
    """
    name = str(level).upper()
    if name not in LEVELS:
        raise ValueError(f"Invalid log level '{level}'. Valid levels: {', '.join(LEVELS)}")

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, '_insightgen', False):
            root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._insightgen = True
    root.addHandler(handler)
    root.setLevel(getattr(logging, name))

    # httpx logs every request at INFO
    logging.getLogger('httpx').setLevel(logging.WARNING)
