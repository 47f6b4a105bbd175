"""Candidate-term dictionary and evaluation of the regression system.

The dictionary is the product of polynomial powers {1, u, u^2, u^3} with the
15 monomials of total degree <= 2 over {u_x, u_xx, u_xxx, u_t}, 60 terms in
all. The enumeration order is fixed: polynomial power major, derivative
factor minor, factors in the order listed in _DERIV_FACTORS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stencil

__all__ = [
    "TermDescriptor",
    "enumerate_terms",
    "TERMS",
    "VISCOUS_INDEX",
    "RegressionProblem",
    "build_system",
]

_FACTOR_NAMES = ("u_x", "u_xx", "u_xxx", "u_t")

# Exponents of (u_x, u_xx, u_xxx, u_t): the empty monomial, the four singles,
# the four squares, then the six cross products.
_DERIV_FACTORS = (
    (0, 0, 0, 0),
    (1, 0, 0, 0),
    (0, 1, 0, 0),
    (0, 0, 1, 0),
    (0, 0, 0, 1),
    (2, 0, 0, 0),
    (0, 2, 0, 0),
    (0, 0, 2, 0),
    (0, 0, 0, 2),
    (1, 1, 0, 0),
    (1, 0, 1, 0),
    (1, 0, 0, 1),
    (0, 1, 1, 0),
    (0, 1, 0, 1),
    (0, 0, 1, 1),
)


@dataclass(frozen=True)
class TermDescriptor:
    """One candidate RHS term: u**poly_power times a derivative monomial."""

    poly_power: int
    deriv_powers: tuple

    def __post_init__(self):
        if self.poly_power not in (0, 1, 2, 3):
            raise ValueError(f"poly_power must be in 0..3, got {self.poly_power}")
        if len(self.deriv_powers) != 4 or sum(self.deriv_powers) > 2:
            raise ValueError(f"invalid derivative powers {self.deriv_powers}")

    @property
    def is_viscous(self):
        return self.poly_power == 0 and self.deriv_powers == (0, 0, 0, 1)

    @property
    def name(self):
        parts = []
        if self.poly_power == 1:
            parts.append("u")
        elif self.poly_power > 1:
            parts.append(f"u^{self.poly_power}")
        for fname, e in zip(_FACTOR_NAMES, self.deriv_powers):
            if e == 1:
                parts.append(fname)
            elif e == 2:
                parts.append(f"{fname}^2")
        return "*".join(parts) if parts else "1"


def enumerate_terms():
    """The canonical ordered 60-term dictionary."""
    return [TermDescriptor(p, f) for p in range(4) for f in _DERIV_FACTORS]


TERMS = tuple(enumerate_terms())
VISCOUS_INDEX = next(i for i, t in enumerate(TERMS) if t.is_viscous)
_NAME_TO_INDEX = {t.name: i for i, t in enumerate(TERMS)}


def term_by_name(name):
    return TERMS[_NAME_TO_INDEX[name]]


@dataclass
class RegressionProblem:
    """Evaluated candidate matrix and u_tt target on the retained samples.

    theta columns and the target are scaled to unit L2 norm; column_scales
    and target_scale undo the scaling (raw = scaled * scale). row_map holds
    the (t, x) lattice index of each retained row, lexicographically sorted.
    """

    theta: np.ndarray
    target: np.ndarray
    column_scales: np.ndarray
    target_scale: float
    row_map: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta)) or not np.all(np.isfinite(self.target)):
            raise ValueError("regression system contains non-finite entries")


def _axis_derivative(data, kern, spacing, axis):
    """Valid-mode correlation along one axis of a 2-D array via banded matmul."""
    n = data.shape[axis]
    w = kern.weights(spacing)
    m = len(w)
    band = np.zeros((n - m + 1, n))
    for j in range(m):
        band[np.arange(n - m + 1), np.arange(n - m + 1) + j] = w[j]
    if axis == 0:
        return band @ data
    return data @ band.T


def build_system(data, dx_eff, dt_eff):
    """Evaluate the 60-column candidate matrix and u_tt target from lattice data.

    data is an (nt', nx') array sampled on a uniform lattice with effective
    spacings (dt_eff, dx_eff). Rows whose time or space stencil would be
    incomplete (1 point at each end in time, 2 in space) are dropped.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("data must be a 2-D (time, space) array")
    nt, nx = data.shape
    if nx < 5:
        raise ValueError(f"need at least 5 spatial points per row, got {nx}")
    if nt < 3:
        raise ValueError(f"need at least 3 temporal points per column, got {nt}")

    kx = stencil.kernel(1, "space")
    kxx = stencil.kernel(2, "space")
    kxxx = stencil.kernel(3, "space")
    kt = stencil.kernel(1, "time")
    ktt = stencil.kernel(2, "time")

    # trim to the common interior: 1 time point per end, 2 space points per end
    u = data[1:-1, 2:-2]
    u_x = _axis_derivative(data, kx, dx_eff, axis=1)[1:-1, :]
    u_xx = _axis_derivative(data, kxx, dx_eff, axis=1)[1:-1, :]
    u_xxx = _axis_derivative(data, kxxx, dx_eff, axis=1)[1:-1, :]
    u_t = _axis_derivative(data, kt, dt_eff, axis=0)[:, 2:-2]
    u_tt = _axis_derivative(data, ktt, dt_eff, axis=0)[:, 2:-2]

    derivs = (u_x, u_xx, u_xxx, u_t)
    n_rows = u.size
    theta = np.empty((n_rows, len(TERMS)))
    for j, term in enumerate(TERMS):
        col = u**term.poly_power if term.poly_power else np.ones_like(u)
        for arr, e in zip(derivs, term.deriv_powers):
            if e:
                col = col * arr**e
        theta[:, j] = col.ravel()
    target = u_tt.ravel()

    t_idx, x_idx = np.meshgrid(np.arange(1, nt - 1), np.arange(2, nx - 2), indexing="ij")
    row_map = np.column_stack([t_idx.ravel(), x_idx.ravel()])

    scales = np.linalg.norm(theta, axis=0)
    scales[scales == 0.0] = 1.0
    theta = theta / scales
    target_scale = float(np.linalg.norm(target))
    if target_scale == 0.0:
        target_scale = 1.0
    target = target / target_scale

    return RegressionProblem(
        theta=theta,
        target=target,
        column_scales=scales,
        target_scale=target_scale,
        row_map=row_map,
    )
