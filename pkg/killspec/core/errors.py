"""
Lab exceptions and exit codes
"""

from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for every failure the lab reports to the user"""

    exit_code = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(LabError):
    """Malformed or invalid run configuration"""

    exit_code = 2

    def __init__(self, message: str, pointer: str = ''):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer


class ModelError(ConfigError):
    """Model violates a stationary-spacetime invariant"""


class NumericalError(LabError):
    """A numerical stage could not produce a trustworthy result"""

    exit_code = 1

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ArtifactError(LabError):
    """Requested artifact is missing from the result store"""

    exit_code = 1


class VerificationFailed(LabError):
    """One or more acceptance checks failed"""

    exit_code = 3
