from typing import Any, Dict, Optional


class SpectralToolkitError(Exception):
    """Base error for every failure raised by the toolkit."""

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = dict(context or {})

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.message} ({details})"


class ConfigurationError(SpectralToolkitError):
    pass


class DispersionError(SpectralToolkitError):
    pass


class PotentialError(SpectralToolkitError):
    pass


class QuadratureError(SpectralToolkitError):
    pass


class AssemblyError(SpectralToolkitError):
    pass


class SolverError(SpectralToolkitError):
    pass


class FeshbachError(SpectralToolkitError):
    pass


class KernelError(SpectralToolkitError):
    pass
