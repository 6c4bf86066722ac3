"""Training split-conformal predictors by minimizing observed fuzziness or prediction error.

Importing the package attaches one handler to the ``pyconformaltrain`` logger,
chosen by the environment variable PYCONFORMALTRAIN_LOG_HANDLER.
"""
import logging
import os

from .log_handlers import JsonStreamLoggingHandler, StreamLoggingHandler

__version__ = "0.1.0"

LOG_HANDLER_ENV = "PYCONFORMALTRAIN_LOG_HANDLER"


def get_logging_handler():
    """Get the logging handler based on the environment variable PYCONFORMALTRAIN_LOG_HANDLER."""
    handlers = {
        "json": JsonStreamLoggingHandler,
        "stream": StreamLoggingHandler,  # Default handler
    }
    handler_type = os.getenv(LOG_HANDLER_ENV, "stream").lower()
    return handlers.get(handler_type, StreamLoggingHandler)()


def setup_logging():
    """Set up the logging handler for the package logger."""
    package_logger = logging.getLogger(__name__)
    for handler in list(package_logger.handlers):
        if isinstance(handler, StreamLoggingHandler):
            package_logger.removeHandler(handler)
    package_logger.addHandler(get_logging_handler())
    if package_logger.level == logging.NOTSET:
        package_logger.setLevel(logging.INFO)


setup_logging()
