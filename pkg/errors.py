"""
Exceptions raised by the simulator and the exit codes the CLI maps them to
"""
from typing import Optional


class UecnError(Exception):
    """Base class for every simulator error."""
    exit_code = 1


class InvalidConfig(UecnError):
    exit_code = 2


class FormatVersionMismatch(UecnError):
    exit_code = 2


class StageInputMissing(UecnError):
    exit_code = 3


class StageError(UecnError):
    """A stage failed; wraps the underlying error with the stage name."""
    exit_code = 4

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class OutOfBeam(UecnError):
    """Receiver lies outside the optical divergence cone."""


class Infeasible(UecnError):
    """Required transmit power exceeds the link's maximum."""


class AllInfeasible(UecnError):
    """No link type closes within its power bounds."""


class EmptyRelaySet(UecnError):
    pass


class DivergedParameters(UecnError):
    """A Q-network parameter became non-finite."""


class DepthExceeded(UecnError):
    pass


class ZeroVelocity(UecnError):
    pass


class InfeasibleLink(UecnError):
    """Some cluster member closes no link to its AUV."""


class EnergyExhausted(UecnError):
    """The AUV energy budget cannot be met."""

    def __init__(self, message: str, velocity: Optional[float] = None):
        super().__init__(message)
        self.velocity = velocity


class InsufficientCapacity(UecnError):
    pass
