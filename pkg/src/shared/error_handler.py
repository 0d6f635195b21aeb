#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Simulator Errors
Typed failures with stable codes and process exit codes, plus fleet bookkeeping
"""

import traceback
from typing import Any, Dict, List, Optional

from loguru import logger

# ========== ERROR CODES ==========

# code -> (exit code, default message)
ERROR_CODES = {
    "VAL_001": (1, "Invalid input data"),
    "VAL_002": (1, "Network failed validation"),
    "RES_001": (1, "Unknown agent or good"),
    "FILE_001": (1, "Unreadable file"),
    "SIM_001": (1, "Precondition not met"),
    "SIM_002": (2, "Event cap exceeded"),
    "SIM_003": (1, "No solution exists"),
}

# ========== ERROR MODELS ==========


class SimulationError(Exception):
    """Base simulator error"""

    error_code = "VAL_001"

    def __init__(self, message: Optional[str] = None, **details):
        exit_code, default = ERROR_CODES[self.error_code]
        self.message = message or default
        self.exit_code = exit_code
        self.details = {k: v for k, v in details.items() if v is not None}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": type(self).__name__,
            "code": self.error_code,
            "message": self.message,
            "details": self.details,
        }


class ValidationError(SimulationError):
    """A parameter or value outside its domain"""

    def __init__(self, message: str, field: str = None):
        super().__init__(message, field=field)


class NetworkInvalidError(SimulationError):
    error_code = "VAL_002"

    def __init__(self, violations: list):
        super().__init__(f"{len(violations)} violation(s) in network", violations=[str(v) for v in violations])
        self.violations = violations


class NotFoundError(SimulationError):
    error_code = "RES_001"

    def __init__(self, resource: str):
        super().__init__(f"{resource} not found", resource=resource)


class FormatError(SimulationError):
    """Unparseable network, certificate, script or config file"""

    error_code = "FILE_001"

    def __init__(self, message: str, path: str = None):
        super().__init__(message, path=str(path) if path else None)


class PreconditionError(SimulationError):
    error_code = "SIM_001"


class EventCapExceeded(SimulationError):
    """Run did not reach quiescence within the event cap"""

    error_code = "SIM_002"

    def __init__(self, cap: int, events: int):
        super().__init__(f"Event cap {cap} exceeded after {events} events", cap=cap, events=events)


class NoSolutionError(SimulationError):
    error_code = "SIM_003"


# ========== FLEET RESULTS ==========


class BatchOperationResult:
    """Per-instance outcomes of an experiment fleet

    Failure ids are the instance index, or "index:protocol" when a single
    protocol run failed and the rest of the instance survived.
    """

    def __init__(self):
        self.successful: List[Dict[str, Any]] = []
        self.failed: List[Dict[str, Any]] = []

    def add_success(self, item_id: Any, protocols: List[str]):
        self.successful.append({"id": item_id, "protocols": protocols})

    def add_failure(self, item_id: Any, error_code: str, error_msg: str):
        self.failed.append({"id": item_id, "code": error_code, "error": error_msg})

    def to_response(self) -> Dict:
        return {
            "success": not self.failed,
            "summary": {
                "total": len(self.successful) + len(self.failed),
                "successful": len(self.successful),
                "failed": len(self.failed),
            },
            "results": self.successful,
            "errors": [{"id": f["id"], "error": f["error"]} for f in self.failed],
        }


# ========== ERROR LOGGING ==========


def log_error(error: Exception, context: Optional[Dict] = None):
    """Log an error with its code and details; the traceback goes to debug"""
    if isinstance(error, SimulationError):
        info = error.to_dict()
    else:
        info = {"type": type(error).__name__, "message": str(error)}
    if context:
        info["context"] = context
    logger.error(f"{info['type']}: {info['message']} | {info}")
    logger.debug(f"Traceback:\n{traceback.format_exc()}")
