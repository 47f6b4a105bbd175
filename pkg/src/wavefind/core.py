"""Grid, field, and configuration types shared across the package.

Fields and wavefields are plain float64 numpy arrays: a field is a vector of
length ``grid.nx`` (one value per spatial node), a wavefield is an
``(nt, nx)`` matrix whose rows are time snapshots. ``validate_field`` and
``validate_wavefield`` enforce the shape/finiteness contracts at construction
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "SourceSpec",
    "Dirichlet",
    "Neumann",
    "Mtf",
    "BoundarySpec",
    "MediumSpec",
    "validate_field",
    "validate_wavefield",
    "ricker_profile",
    "cfl_margin",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform space-time grid, endpoints included.

    dx = length/(nx-1) and dt = duration/(nt-1); the point counts are
    config inputs, not derived from a CFL formula.
    """

    length: float
    nx: int
    duration: float
    nt: int

    def __post_init__(self):
        if self.nx < 5:
            raise ValueError(f"nx must be >= 5 (stencil width), got {self.nx}")
        if self.nt < 3:
            raise ValueError(f"nt must be >= 3, got {self.nt}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")

    @property
    def dx(self):
        return self.length / (self.nx - 1)

    @property
    def dt(self):
        return self.duration / (self.nt - 1)

    def x(self):
        """Spatial node coordinates, shape (nx,)."""
        return np.linspace(0.0, self.length, self.nx)

    def t(self):
        """Temporal node coordinates, shape (nt,)."""
        return np.linspace(0.0, self.duration, self.nt)


@dataclass(frozen=True)
class SourceSpec:
    """Ricker source profile parameters."""

    f0: float

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError(f"central frequency f0 must be positive, got {self.f0}")


@dataclass(frozen=True)
class Dirichlet:
    """u = 0 at the boundary node, ghost points filled with 0."""


@dataclass(frozen=True)
class Neumann:
    """u_x = 0 at the boundary node, ghost points mirror the interior."""


@dataclass(frozen=True)
class Mtf:
    """Multi-transmitting absorbing boundary.

    c_a is the artificial wave velocity; None means "resolve to the local
    physical wave speed at this boundary" (done by the simulator against its
    medium; a rollout of a discovered equation needs a concrete value).

    stabilization splits the transmitting formula's repeated characteristic
    root: the binomial error operator (1-L)^N becomes prod_k (1 - gamma^k L),
    which still transmits constants exactly but removes the marginal drift
    mode that the pure formula sustains (a spatially uniform, linearly
    growing solution that transit errors otherwise excite). 1.0 recovers the
    plain binomial coefficients.
    """

    order: int = 2
    c_a: float | None = None
    stabilization: float = 0.4

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"MTF order must be 1, 2 or 3, got {self.order}")
        if self.c_a is not None and not self.c_a > 0:
            raise ValueError(f"MTF artificial velocity must be positive, got {self.c_a}")
        if not 0.0 < self.stabilization <= 1.0:
            raise ValueError(f"stabilization must be in (0, 1], got {self.stabilization}")


@dataclass(frozen=True)
class BoundarySpec:
    left: Dirichlet | Neumann | Mtf
    right: Dirichlet | Neumann | Mtf


@dataclass(frozen=True)
class MediumSpec:
    """Spatially varying coefficients of the wave equation.

    csq is the coefficient of the u_xx term (the squared wave speed), eta the
    coefficient of the u_t damping term.
    """

    csq: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        csq = np.asarray(self.csq, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        object.__setattr__(self, "csq", csq)
        object.__setattr__(self, "eta", eta)
        if csq.ndim != 1 or eta.shape != csq.shape:
            raise ValueError("csq and eta must be 1-D arrays of equal length")
        if not np.all(np.isfinite(csq)) or not np.all(np.isfinite(eta)):
            raise ValueError("medium coefficients must be finite")
        if not np.all(csq > 0):
            raise ValueError("csq must be positive everywhere")

    @classmethod
    def uniform(cls, c, eta, nx):
        """Constant-coefficient medium with wave speed c and viscous factor eta."""
        return cls(csq=np.full(nx, float(c) ** 2), eta=np.full(nx, float(eta)))

    @classmethod
    def linear_speed(cls, c_start, c_end, eta, nx):
        """Wave speed varying linearly across the domain, constant eta."""
        c = np.linspace(float(c_start), float(c_end), nx)
        return cls(csq=c**2, eta=np.full(nx, float(eta)))


def validate_field(grid, values, name="field"):
    """Check a field against its grid; returns the array as float64."""
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.nx,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({grid.nx},)")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def validate_wavefield(grid, values, name="wavefield"):
    """Check an (nt, nx) wavefield against its grid; returns float64."""
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.nt, grid.nx):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({grid.nt}, {grid.nx})")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def ricker_profile(grid, src):
    """Ricker wavelet sampled on the grid, peak centred at x = 1/f0.

    R(x) = (2(pi f0 (x - 1/f0))^2 - 1) * exp(-(pi f0 (x - 1/f0))^2)
    """
    tau = np.pi * src.f0 * (grid.x() - 1.0 / src.f0)
    return (2.0 * tau**2 - 1.0) * np.exp(-(tau**2))


def cfl_margin(grid, medium):
    """dt * max(c) / dx; values above 1.0 are unstable for the explicit scheme."""
    csq = np.asarray(medium.csq, dtype=float)
    if not np.all(csq > 0):
        raise ValueError("csq must be positive everywhere")
    return grid.dt * float(np.sqrt(csq.max())) / grid.dx
