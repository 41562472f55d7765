from __future__ import annotations

from typing import Any, Dict, Optional


# ============================================================
# 예외 계층
# ============================================================
class JeanieError(Exception):
    """Base error carrying a short machine-readable reason plus a message."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason
        self.message = message


class InvalidArgument(JeanieError, ValueError):
    def __init__(self, message: str, reason: str = 'invalid_argument'):
        super().__init__(reason, message)


class DegenerateGeometry(JeanieError):
    def __init__(self, message: str):
        super().__init__('degenerate_geometry', message)


class MissingParameter(JeanieError):
    def __init__(self, message: str):
        super().__init__('missing_parameter', message)


class DegenerateInput(JeanieError):
    def __init__(self, message: str):
        super().__init__('degenerate_input', message)


class SkelJsonError(JeanieError):
    """SKEL-JSON schema violation; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__('parse_error', f"{field}: {message}")
        self.field = field


class StructuralError(JeanieError):
    def __init__(self, message: str):
        super().__init__('structural_error', message)


class InvalidState(JeanieError):
    def __init__(self, message: str):
        super().__init__('invalid_state', message)


class ResourceLimit(JeanieError):
    def __init__(self, message: str):
        super().__init__('resource_limit', message)


class ProtocolViolation(InvalidArgument):
    def __init__(self, message: str):
        super().__init__(message, reason='protocol_violation')


class DataFileError(JeanieError):
    """An input or output file could not be read, parsed or written."""

    def __init__(self, path: str, cause: Exception):
        super().__init__('data_file', f"{path}: {cause}")
        self.path = path
        self.cause = cause


class TrainingDiverged(JeanieError):
    def __init__(self, message: str, state: Optional[Dict[str, Any]] = None):
        super().__init__('training_diverged', message)
        self.state = dict(state or {})


DATA_ERRORS = (SkelJsonError, StructuralError, DataFileError)


__all__ = [
    "DATA_ERRORS",
    "DataFileError",
    "DegenerateGeometry",
    "DegenerateInput",
    "InvalidArgument",
    "InvalidState",
    "JeanieError",
    "MissingParameter",
    "ProtocolViolation",
    "ResourceLimit",
    "SkelJsonError",
    "StructuralError",
    "TrainingDiverged",
]
