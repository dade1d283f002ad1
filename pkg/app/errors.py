"""Exception hierarchy shared by the numerical library and the CLI."""

import json
from typing import Any, Dict, Optional


class ToolkitError(Exception):
    """Base class for every error the toolkit raises on purpose."""

    exit_code = 3
    error_type = "toolkit_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_payload(self) -> Dict[str, Any]:
        """Error payload in the same shape the CLI prints on failure."""
        return {
            "error": self.error_type,
            "message": self.message,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_payload(), default=str)


class ConfigError(ToolkitError):
    """Invalid configuration file, flag or argument range."""

    exit_code = 2
    error_type = "config_error"


class DimensionError(ToolkitError, ValueError):
    """Grid shapes or domains do not match."""

    exit_code = 2
    error_type = "dimension_error"


class ParityError(ToolkitError, ValueError):
    """A field carries the wrong vertical parity for the operation."""

    error_type = "parity_error"


class SingularModeError(ToolkitError):
    """An inverse was requested on a mode where the symbol vanishes."""

    error_type = "singular_mode_error"


class ContractError(ToolkitError):
    """A documented precondition (divergence, ordering, sign) is violated."""

    error_type = "contract_error"


class StepSizeError(ToolkitError):
    """The advective CFL bound is exceeded."""

    error_type = "step_size_error"


class BlowUpError(ToolkitError):
    """Non-finite coefficients appeared during time stepping."""

    error_type = "blow_up_error"

    def __init__(self, message: str, last_state: Any = None,
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.last_state = last_state


class InsufficientDataError(ToolkitError):
    """Too few samples for a rate fit."""

    error_type = "insufficient_data_error"


class CorruptionError(ToolkitError):
    """Checkpoint payload or header failed validation."""

    exit_code = 4
    error_type = "corruption_error"
