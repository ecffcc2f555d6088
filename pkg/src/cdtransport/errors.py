"""Exception types raised across the package."""

from __future__ import annotations


class CDTransportError(Exception):
    """Base class for all package errors."""


class SingularTriangle(CDTransportError, ValueError):
    """Leader positions do not span the x-y plane."""


class OutOfSchedule(CDTransportError, ValueError):
    """A time query falls outside the waypoint schedule span."""


class GimbalLock(CDTransportError, ArithmeticError):
    """Pitch angle too close to +/- pi/2 for the 3-2-1 Euler chain."""


class CoincidentEndpoints(CDTransportError, ValueError):
    """A cable has (numerically) zero length."""


class ZeroLoad(CDTransportError, ValueError):
    """The payload load vector m_p (g K + a_p) vanishes."""


class DegenerateGeometry(CDTransportError, ValueError):
    """A cable is nearly orthogonal to the load direction."""


class DegenerateForce(CDTransportError, ValueError):
    """The required thrust vector vanishes."""


class AttitudeOutOfRange(CDTransportError, ValueError):
    """The roll extraction argument falls outside [-1, 1]."""


class NotStabilizable(CDTransportError, ArithmeticError):
    """The Hamiltonian has eigenvalues on (or too near) the imaginary axis."""


class NonConvergence(CDTransportError, ArithmeticError):
    """An iterative solver hit its iteration cap."""


class ConfigError(CDTransportError, ValueError):
    """A scenario file could not be parsed or violates an invariant."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = violations or [message]


class SimulationAbort(CDTransportError, RuntimeError):
    """Wraps a numerical failure raised inside the simulation loop."""

    def __init__(self, cause: Exception, agent: int | None, time: float, snapshot):
        where = f"agent {agent}" if agent is not None else "fleet"
        super().__init__(f"{type(cause).__name__} at t={time:.2f} s ({where}): {cause}")
        self.cause = cause
        self.agent = agent
        self.time = time
        self.snapshot = snapshot
