"""Crystal surface relaxation: jump-process simulation and its PDE limit."""

__version__ = "0.1.0"

from .lattice import (
    JumpEvent,
    MicroState,
    apply_jump,
    delta_energy,
    jump_rate,
    local_current,
    negate,
)

__all__ = [
    "JumpEvent",
    "MicroState",
    "apply_jump",
    "delta_energy",
    "jump_rate",
    "local_current",
    "negate",
    "__version__",
]
