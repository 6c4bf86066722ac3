"""
Async Logging Module

An asynchronous logger for the experiment runner's event loop. Context bound
to a logger (for example the digit, n_size and replication of an experiment
cell) travels with every record it creates.

Classes:
    AsyncLogger: A logger whose logging methods are coroutines.

Functions:
    getLogger: Get or create an AsyncLogger under the package logger.
"""
import json
import logging
import sys
from logging import Logger, LogRecord
from types import TracebackType
from typing import Mapping, TypeAlias

from pyconformaltrain.json_tools import CustomJSONEncoder

_ArgsType: TypeAlias = tuple[object, ...] | Mapping[str, object]
_SysExcInfoType: TypeAlias = (
    tuple[type[BaseException], BaseException, TracebackType | None] | tuple[None, None, None]
)

PACKAGE_LOGGER = "pyconformaltrain"


class AsyncLogger(Logger):
    """
    A logger class that supports asynchronous logging operations.

    Records propagate to the ``pyconformaltrain`` package logger, whose handler
    is chosen at import time.

    Attributes:
        context (dict): Context merged into the extra fields of every record.
    """

    _loggers: dict[str, "AsyncLogger"] = {}

    def __init__(self, name, level=logging.NOTSET, context=None):
        """Initializes the AsyncLogger.

        Args:
            name (str): The name of the logger.
            level (int): The logging level.
            context (dict, optional): Additional context for log messages.
        """
        super().__init__(name, level)
        self.context = dict(context or {})
        self.parent = logging.getLogger(PACKAGE_LOGGER)

    def bind(self, **new_context) -> "AsyncLogger":
        """
        A child logger with ``new_context`` merged over this logger's context.

        The child shares this logger's level and handlers; this logger is
        left unchanged.
        """
        child = AsyncLogger(self.name, self.level, {**self.context, **new_context})
        child.handlers = self.handlers
        child.parent = self.parent
        child.propagate = self.propagate
        return child

    def isEnabledFor(self, level):
        """
        Whether records at ``level`` pass this logger.

        AsyncLoggers live outside the logging manager, whose level changes only
        reset the caches of registered loggers, so the effective level is
        looked up on every call.
        """
        if self.disabled or self.manager.disable >= level:
            return False
        return level >= self.getEffectiveLevel()

    def makeRecord(
        self,
        name: str,
        level: int,
        fn: str,
        lno: int,
        msg: object,
        args: _ArgsType,
        exc_info: _SysExcInfoType | None,
        func: str | None = None,
        extra: Mapping[str, object] | None = None,
        sinfo: str | None = None,
    ) -> LogRecord:
        """
        Creates a log record carrying the bound context.

        The merged context (bound context, then ``extra``) is stored on the
        record as ``record.context``.

        Raises:
            ValueError: If values in 'extra' are not JSON serializable with
                json_tools.CustomJSONEncoder.
        """
        context = {**self.context, **dict(extra or {})}
        try:
            json.dumps(context, cls=CustomJSONEncoder)
        except (TypeError, ValueError) as e:
            raise ValueError("Non-serializable data provided in 'extra'") from e
        return super().makeRecord(
            name=name,
            level=level,
            fn=fn,
            lno=lno,
            msg=msg,
            args=args,
            exc_info=exc_info,
            func=func,
            extra={"context": context},
            sinfo=sinfo,
        )

    async def _log_async(self, level, msg, *args, **kwargs):
        """
        Asynchronously logs a message at a specified level.

        Note:
            This method should not be called directly; use the specific logging
            methods like debug(), info(), etc.
        """
        if self.isEnabledFor(level):
            exc_info = kwargs.get("exc_info")
            if exc_info is True:
                exc_info = sys.exc_info()
            record = self.makeRecord(
                name=self.name,
                level=level,
                fn=kwargs.get("fn", ""),
                lno=kwargs.get("lno", 0),
                msg=msg,
                args=args,
                exc_info=exc_info,
                extra=kwargs.get("extra"),
                sinfo=kwargs.get("sinfo"),
            )
            await self.handle(record)

    async def handle(self, record):  # pylint: disable=invalid-overridden-method
        """
        Asynchronously handles a log record.

        Dispatches the record to this logger's handlers and, while propagating,
        to its ancestors'.
        """
        if not self.disabled and self.filter(record):
            self.callHandlers(record)

    async def _safe_log(self, level, msg, *args, **kwargs):
        try:
            await self._log_async(level, msg, *args, **kwargs)
        except Exception as e:  # pylint: disable=broad-except
            # I am using print here because the logger itself is not working
            name = logging.getLevelName(level)
            print(f"{name}: An error occurred while logging:\n{e}", file=sys.stderr)
            print(f"{name}: Message that failed to log:\n{msg}", file=sys.stderr)

    async def debug(self, msg, *args, **kwargs):  # pylint: disable=invalid-overridden-method
        """
        Asynchronously logs a debug message.

        Example:
            await logger.debug("grid point %d done", index)
        """
        await self._safe_log(logging.DEBUG, msg, *args, **kwargs)

    async def info(self, msg, *args, **kwargs):  # pylint: disable=invalid-overridden-method
        """Asynchronously logs an info message."""
        await self._safe_log(logging.INFO, msg, *args, **kwargs)

    async def warning(self, msg, *args, **kwargs):  # pylint: disable=invalid-overridden-method
        """Asynchronously logs a warning message."""
        await self._safe_log(logging.WARNING, msg, *args, **kwargs)

    async def error(self, msg, *args, **kwargs):  # pylint: disable=invalid-overridden-method
        """
        Asynchronously logs an error message.

        Example:
            await logger.bind(digit=3).error("cell failed: %s", exc)
        """
        await self._safe_log(logging.ERROR, msg, *args, **kwargs)

    async def critical(self, msg, *args, **kwargs):  # pylint: disable=invalid-overridden-method
        """Asynchronously logs a critical message."""
        await self._safe_log(logging.CRITICAL, msg, *args, **kwargs)

    @classmethod
    def get_logger(cls, name, level=logging.NOTSET, context=None):
        """
        Gets or creates an AsyncLogger instance.

        Args:
            name (str): The name of the logger.
            level (int): The logging level.
            context (dict, optional): Additional context for log messages.

        Returns:
            AsyncLogger: An instance of AsyncLogger.
        """
        if name not in cls._loggers:
            cls._loggers[name] = cls(name, level, context)
        return cls._loggers[name]


def getLogger(name, level=logging.NOTSET, context=None):  # pylint: disable=invalid-name
    """Gets or creates an AsyncLogger instance."""
    return AsyncLogger.get_logger(name, level, context)


async def drain_handlers(name: str = PACKAGE_LOGGER):
    """Wait for every asynchronous handler on ``name`` to finish its pending writes."""
    for handler in logging.getLogger(name).handlers:
        drain = getattr(handler, "drain", None)
        if drain is not None:
            await drain()
