"""Exception types shared across the package."""


class CrystalError(Exception):
    """Base class for all package errors."""


class InvalidEventError(CrystalError):
    """A jump event whose sites are not adjacent on the ring."""


class RateOverflowError(CrystalError):
    """A rate exponent exceeded the numerical guard.

    Carries the offending exponent so callers can report how far past the
    guard the configuration drifted.
    """

    def __init__(self, exponent, guard):
        self.exponent = float(exponent)
        self.guard = float(guard)
        super().__init__(
            f"rate exponent {self.exponent:.6g} exceeds guard +-{self.guard:.6g}"
        )


class TruncationError(CrystalError):
    """A lattice sum could not reach the requested tail tolerance."""


class RunawaySimulationError(CrystalError):
    """The event-count safety cap was exceeded before reaching t_end."""

    def __init__(self, message, n_events, clock, t_end):
        self.n_events = int(n_events)
        self.clock = float(clock)
        self.t_end = float(t_end)
        super().__init__(
            f"{message} (events={self.n_events}, clock={self.clock:.6g}, "
            f"t_end={self.t_end:.6g})"
        )


class StiffnessError(CrystalError):
    """The stiff integrator failed; the last good state is attached."""

    def __init__(self, message, last_state=None):
        self.last_state = last_state
        super().__init__(message)


class ConvergenceError(CrystalError):
    """An iterative solver hit its iteration cap without converging."""


class ConfigError(CrystalError):
    """An experiment configuration failed schema validation."""
