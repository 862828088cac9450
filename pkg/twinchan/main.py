import logging

"""
Logger Config Brief

level: Sets the minimum severity to be logged.
       Order: DEBUG < INFO < WARNING < ERROR < CRITICAL

format: A string defining the log's layout using placeholders:
    %(asctime)s: Timestamp
    %(name)s: Logger name (the twinchan module)
    %(levelname)s: Severity level (e.g., "INFO", "ERROR")
    %(message)s: The actual log message

Library modules only create loggers; the command line calls
configure_logging() once.
"""

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def configure_logging(level="INFO") -> None:
    if isinstance(level, str):
        level = getattr(logging, level.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,  # message format
        force=True,
    )
    # logs go to stderr so stdout stays machine-readable
    logger.debug("Logger configuration has been set.")
