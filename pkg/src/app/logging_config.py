import logging
import json
import sys
from datetime import datetime, timezone
from typing import Any, Dict

import numpy as np

# LogRecord attributes that are not user context
STANDARD_ATTRS = frozenset({
    "name", "msg", "args", "levelname", "levelno", "pathname", "filename",
    "module", "exc_info", "exc_text", "stack_info", "lineno", "funcName",
    "created", "msecs", "relativeCreated", "thread", "threadName",
    "processName", "process", "taskName",
})


def _jsonable(value: Any) -> Any:
    """Numerical context (complex values, numpy scalars and arrays, pair tuples) as JSON types."""
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


class JSONFormatter(logging.Formatter):
    """
    One JSON object per line.

    Context passed through ``extra`` (p, l, k, routine, lambda ...) becomes
    top-level keys, so a failing run can be traced back to the momentum or
    coupling that caused it.
    """

    def format(self, record: logging.LogRecord) -> str:
        log_record: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "message": record.getMessage(),
            "logger": record.name,
            "module": record.module,
            "function": record.funcName,
            "line": record.lineno,
        }

        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)

        for key, value in record.__dict__.items():
            if key not in STANDARD_ATTRS and not key.startswith("_"):
                log_record[key] = _jsonable(value)

        return json.dumps(log_record, default=str)


def setup_logging(level_name: str = "INFO") -> None:
    """
    Configure the root logger to use JSON formatting on stderr; stdout
    carries CSV output when no --out path is given.
    """
    logger = logging.getLogger()
    level = getattr(logging, level_name.upper(), logging.INFO)
    logger.setLevel(level)

    # Remove existing handlers to avoid duplication
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JSONFormatter())
    logger.addHandler(handler)
