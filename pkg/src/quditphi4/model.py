"""Hamiltonian couplings and adiabatic time grids."""
from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["ModelParams", "Schedule"]


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the lattice Hamiltonian

    ``sum_j [Pi_j^2/2 + (mu2 + 2d) phi_j^2 / 2 + g phi_j^4 / 4!] - f sum_j phi_j phi_{j+1}``.

    ``f = 1`` is the plain nearest-neighbour gradient term.
    """

    mu2: float
    g: float = 0.0
    f: float = 0.0
    d: int = 1
    sites: int = 1

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"spatial dimension d must be a positive integer, got {self.d}")
        if int(self.sites) != self.sites or self.sites < 1:
            raise ValueError(f"sites must be a positive integer, got {self.sites}")
        if self.g < 0:
            raise ValueError(f"quartic coupling g must be non-negative, got {self.g}")
        if not all(math.isfinite(v) for v in (self.mu2, self.g, self.f)):
            raise ValueError("couplings must be finite")
        if self.harmonic_coeff <= 0:
            raise ValueError(
                f"mu2 + 2d = {self.harmonic_coeff} must be positive for a harmonic basis"
            )

    @property
    def harmonic_coeff(self) -> float:
        return self.mu2 + 2 * self.d

    @property
    def default_mass(self) -> float:
        """Free single-site frequency ``sqrt(mu2 + 2d)``."""
        return math.sqrt(self.harmonic_coeff)


@dataclass(frozen=True)
class Schedule:
    """``steps`` Trotter steps of length ``dt`` covering ``total_time``.

    A zero-length schedule (``total_time == 0``, no steps) is allowed and
    means "do nothing".
    """

    total_time: float
    dt: float
    steps: int

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.total_time < 0:
            raise ValueError("total_time must be non-negative")
        if int(self.steps) != self.steps or self.steps < 0:
            raise ValueError("steps must be a non-negative integer")
        if self.steps == 0 and self.total_time != 0:
            raise ValueError("a non-empty schedule needs at least one step")
        if abs(self.steps * self.dt - self.total_time) > 1e-12:
            raise ValueError(
                f"steps * dt = {self.steps * self.dt!r} does not match total_time {self.total_time!r}"
            )

    @classmethod
    def from_time(cls, total_time: float, dt: float) -> Schedule:
        steps = int(round(total_time / dt))
        return cls(total_time, dt, steps)

    @classmethod
    def from_steps(cls, steps: int, dt: float) -> Schedule:
        return cls(steps * dt, dt, steps)
