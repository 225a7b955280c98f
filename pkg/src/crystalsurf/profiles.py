"""Named initial height profiles on the unit torus."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

KINDS = ("sine", "two_bump", "compact_bump", "tabulated")


def bump(x):
    """Smooth bump 0.1 exp(8 - 1/x - 1/(1/2 - x)) supported on (0, 1/2).

    All derivatives vanish at the support edges, which keeps the lattice
    initialization and the PDE stencils smooth across them.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 0.5)
    xi = x[inside]
    out[inside] = 0.1 * np.exp(8.0 - 1.0 / xi - 1.0 / (0.5 - xi))
    return out


def centered_bump(x):
    """Bump exp(8 - 1/|x| - 1/(1/2 - |x|)) for 0 < |x| < 1/2, wrapped.

    Positions are reduced to [-1/2, 1/2); the profile vanishes (with all
    derivatives) at x = 0 and |x| = 1/2, leaving two symmetric lobes.
    """
    x = np.asarray(x, dtype=float)
    xw = x - np.round(x)  # wrap to [-1/2, 1/2)
    a = np.abs(xw)
    out = np.zeros_like(a)
    inside = (a > 0) & (a < 0.5)
    ai = a[inside]
    out[inside] = np.exp(8.0 - 1.0 / ai - 1.0 / (0.5 - ai))
    return out


@dataclass
class InitialProfile:
    """Declarative initial datum: kind plus amplitude/shift parameters."""

    kind: str = "sine"
    amplitude: float = 0.1
    shift: float = 0.0
    table: np.ndarray | None = None  # (x, h) rows for kind="tabulated"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}; "
                              f"choose one of {KINDS}")
        if self.kind == "tabulated":
            if self.table is None:
                raise ConfigError("tabulated profile needs (x, h) rows")
            self.table = np.asarray(self.table, dtype=float)
            if self.table.ndim != 2 or self.table.shape[1] != 2:
                raise ConfigError("tabulated profile table must be (n, 2)")

    def __call__(self, x):
        return make_profile(self, x)


def make_profile(spec: InitialProfile, x):
    """Evaluate the named profile at positions x in [0, 1)."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "sine":
        return spec.amplitude * np.sin(2.0 * np.pi * (x - spec.shift))
    if spec.kind == "two_bump":
        xs = x - spec.shift
        return spec.amplitude * (bump(np.mod(xs, 1.0)) + bump(np.mod(xs + 0.2, 1.0)))
    if spec.kind == "compact_bump":
        return spec.amplitude * centered_bump(x - spec.shift)
    if spec.kind == "tabulated":
        xt = spec.table[:, 0]
        ht = spec.table[:, 1]
        order = np.argsort(xt)
        xt, ht = xt[order], ht[order]
        # periodic linear interpolation
        xp = np.concatenate([xt, [xt[0] + 1.0]])
        hp = np.concatenate([ht, [ht[0]]])
        return spec.amplitude * np.interp(np.mod(x - spec.shift, 1.0), xp, hp)
    raise ConfigError(f"unknown profile kind {spec.kind!r}")
