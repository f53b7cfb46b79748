"""
Exception hierarchy for anwave

Library code raises these; only the command-line layer turns them into
exit codes.
"""

from typing import Any, Optional


class AnWaveError(Exception):
    """Base class for all anwave errors"""


class InvalidArgumentError(AnWaveError, ValueError):
    """An argument is outside the documented domain of an operation"""


class InvalidStateError(AnWaveError):
    """A field state violates the invariants of its formulation"""


class IllDefinedDegreeError(AnWaveError):
    """psi(r_max) is too far from a multiple of pi to assign a degree"""

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        super().__init__(message)


class NoConvergenceError(AnWaveError):
    """Successive approximations failed to contract"""


class IntegrationFailure(AnWaveError):
    """The ODE integrator gave up; the samples computed so far are attached"""

    def __init__(self, message: str, partial_profile: Any = None):
        self.partial_profile = partial_profile
        super().__init__(message)
