"""Asynchronous logging handlers writing plain text or JSON lines to a stream"""
import asyncio
import datetime
import json
import logging
import sys
from abc import ABC, abstractmethod
from typing import TextIO

from pyconformaltrain.json_tools import CustomJSONEncoder


def record_context(record: logging.LogRecord) -> dict:
    """The bound context carried by a record, or an empty dict."""
    return dict(getattr(record, "context", None) or {})


class ContextFormatter(logging.Formatter):
    """Plain-text formatter appending the bound context as ``key=value`` pairs."""

    def __init__(self, fmt="%(asctime)s %(levelname)s %(name)s: %(message)s"):
        super().__init__(fmt)

    def format(self, record: logging.LogRecord) -> str:
        message = super().format(record)
        context = record_context(record)
        if context:
            pairs = " ".join(f"{key}={value}" for key, value in context.items())
            message = f"{message} [{pairs}]"
        return message


class JsonFormatter(logging.Formatter):
    """One JSON object per record; context fields are merged in at the top level."""

    def format(self, record: logging.LogRecord) -> str:
        body = {
            "time": datetime.datetime.fromtimestamp(record.created, datetime.timezone.utc),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        body.update(record_context(record))
        if record.exc_info:
            body["exception"] = self.formatException(record.exc_info)
        return json.dumps(body, cls=CustomJSONEncoder)


class AsyncLoggingHandler(logging.Handler, ABC):
    """
    An abstract base class for asynchronous logging handlers.

    Inside a running event loop, ``emit`` schedules ``async_emit`` as a task;
    call ``drain`` before the loop closes to wait for the scheduled writes.
    Without a running loop (worker threads and processes) records are written
    synchronously.
    """

    def __init__(self):
        super().__init__()
        self._pending: set[asyncio.Task] = set()

    def emit(self, record: logging.LogRecord):
        """
        Emit a logging record.

        Args:
            record (logging.LogRecord): The log record to be emitted.
        """
        try:
            loop = asyncio.get_running_loop()
        except RuntimeError:
            self.write(self.format(record))
            return
        task = loop.create_task(self.async_emit(record))
        self._pending.add(task)
        task.add_done_callback(self._pending.discard)

    async def async_emit(self, record: logging.LogRecord):
        """
        Asynchronously emit a logging record.

        Args:
            record (logging.LogRecord): The log record to be emitted.
        """
        self.write(self.format(record))

    async def drain(self):
        """Wait until every scheduled record has been written."""
        while self._pending:
            await asyncio.gather(*list(self._pending))

    @abstractmethod
    def write(self, message: str):
        """Write one formatted record."""


class StreamLoggingHandler(AsyncLoggingHandler):
    """A handler that writes to a stream, stderr unless told otherwise."""

    terminator: str

    def __init__(self, stream: TextIO | None = None, terminator="\n"):
        super().__init__()
        self.stream = stream
        self.terminator = terminator
        self.setFormatter(ContextFormatter())

    def write(self, message: str):
        # resolved per write so redirected stderr is honoured
        stream = self.stream if self.stream is not None else sys.stderr
        stream.write(message)
        stream.write(self.terminator)
        stream.flush()


class JsonStreamLoggingHandler(StreamLoggingHandler):
    """A stream handler emitting JSON lines."""

    def __init__(self, stream: TextIO | None = None, terminator="\n"):
        super().__init__(stream, terminator)
        self.setFormatter(JsonFormatter())
