"""Finite-difference convolution kernels and ghost-point boundary padding.

The kernels are the frozen central-difference filters of the time-marching
scheme: 2nd order in time, 4th order in space. Taps are stored as integers
with a separate rational scale; division by the grid spacing happens at
evaluation time. Derivatives are sliding dot products (correlation, no tap
flip).

Note the spatial first/third derivative taps here are (1,-8,0,8,-1)/(12 dx)
and (-1,2,0,-2,1)/(2 dx^3); these satisfy the moment conditions (exact on
monomials below the kernel order) which the tests assert symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Dirichlet, Mtf, Neumann

__all__ = ["Kernel", "kernel", "pad", "derivative", "valid_correlate", "derivative_matrix"]


@dataclass(frozen=True)
class Kernel:
    taps: tuple
    scale: Fraction
    axis: str
    derivative_order: int

    @property
    def radius(self):
        return (len(self.taps) - 1) // 2

    def weights(self, spacing):
        """Taps * scale / spacing**order as a float array."""
        return np.asarray(self.taps, dtype=float) * float(self.scale) / spacing**self.derivative_order


_KERNELS = {
    ("time", 1): Kernel((-1, 0, 1), Fraction(1, 2), "time", 1),
    ("time", 2): Kernel((1, -2, 1), Fraction(1, 1), "time", 2),
    ("space", 1): Kernel((1, -8, 0, 8, -1), Fraction(1, 12), "space", 1),
    ("space", 2): Kernel((-1, 16, -30, 16, -1), Fraction(1, 12), "space", 2),
    ("space", 3): Kernel((-1, 2, 0, -2, 1), Fraction(1, 2), "space", 3),
}


def kernel(derivative_order, axis):
    """Canonical central-difference kernel for the given axis and order."""
    try:
        return _KERNELS[(axis, derivative_order)]
    except KeyError:
        raise ValueError(f"no kernel for axis={axis!r}, order={derivative_order}") from None


def pad(field, width, side, bc):
    """Extend a field with ghost values on one side.

    Dirichlet ghosts are 0; Neumann ghosts mirror the interior (ghost at
    distance k from the boundary node equals the value at distance k inside),
    which makes the centred first derivative vanish at the boundary node.
    Returns the extended array (ghosts prepended for side='left', appended
    for side='right').
    """
    field = np.asarray(field, dtype=float)
    if width > 2:
        raise ValueError(f"pad width {width} exceeds supported stencil radius 2")
    if field.size < width + 1:
        raise ValueError("field too short for requested pad width")
    if isinstance(bc, Dirichlet):
        ghosts = np.zeros(width)
    elif isinstance(bc, Neumann):
        if side == "left":
            ghosts = field[width:0:-1]
        else:
            ghosts = field[-2 : -2 - width : -1]
    else:
        raise ValueError(f"pad supports Dirichlet and Neumann, got {bc!r}")
    if side == "left":
        return np.concatenate([ghosts, field])
    if side == "right":
        return np.concatenate([field, ghosts])
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def valid_correlate(values, kern, spacing):
    """Sliding dot products where the receptive field is complete.

    Output length is len(values) - 2*radius; position i of the output is the
    derivative estimate at input position i + radius.
    """
    values = np.asarray(values, dtype=float)
    if values.size < len(kern.taps):
        raise ValueError("input shorter than kernel")
    w = kern.weights(spacing)
    # np.convolve flips its kernel; flip back to get correlation
    return np.convolve(values, w[::-1], mode="valid")


def derivative(values, kern, spacing):
    """Derivative of a 1-D slice; edge positions without a full stencil are NaN.

    Pre-pad with ``pad`` to obtain values all the way to the boundary.
    """
    values = np.asarray(values, dtype=float)
    out = np.full(values.size, np.nan)
    r = kern.radius
    out[r : values.size - r] = valid_correlate(values, kern, spacing)
    return out


def _onesided_rows(order, dx):
    """(offsets, weights) stencils used at the outermost nodes of an MTF side.

    The MTF boundary defines no ghost values, so the node adjacent to it
    falls back to 3-point centred u_x/u_xx and a 4-point one-sided u_xxx;
    the boundary node itself (whose interior update is discarded anyway)
    uses fully one-sided rows.
    """
    if order == 1:
        return ((-1, 0, 1), np.array([-1.0, 0.0, 1.0]) / (2 * dx)), (
            (0, 1, 2),
            np.array([-3.0, 4.0, -1.0]) / (2 * dx),
        )
    if order == 2:
        return ((-1, 0, 1), np.array([1.0, -2.0, 1.0]) / dx**2), (
            (0, 1, 2, 3),
            np.array([2.0, -5.0, 4.0, -1.0]) / dx**2,
        )
    if order == 3:
        row = ((-1, 0, 1, 2), np.array([-1.0, 3.0, -3.0, 1.0]) / dx**3)
        row0 = ((0, 1, 2, 3), np.array([-1.0, 3.0, -3.0, 1.0]) / dx**3)
        return row, row0
    raise ValueError(f"unsupported spatial order {order}")


def derivative_matrix(nx, dx, order, bc_left, bc_right):
    """Dense (nx, nx) spatial derivative operator with boundary handling folded in.

    Dirichlet ghosts contribute nothing (zero columns dropped); Neumann ghosts
    fold their tap weight back onto the mirrored interior column. Rows whose
    node sits within the stencil radius of an MTF boundary use the local
    fallback stencils from _onesided_rows.
    """
    kern = kernel(order, "space")
    w = kern.weights(dx)
    r = kern.radius
    mat = np.zeros((nx, nx))
    for i in range(nx):
        for o in range(-r, r + 1):
            j = i + o
            wt = w[o + r]
            if wt == 0.0:
                continue
            if 0 <= j < nx:
                mat[i, j] += wt
            elif j < 0:
                if isinstance(bc_left, Neumann):
                    mat[i, -j] += wt
                elif not isinstance(bc_left, Dirichlet):
                    mat[i, :] = np.nan  # MTF side, replaced below
            else:
                if isinstance(bc_right, Neumann):
                    mat[i, 2 * (nx - 1) - j] += wt
                elif not isinstance(bc_right, Dirichlet):
                    mat[i, :] = np.nan
    near, outer = _onesided_rows(order, dx)
    if isinstance(bc_left, Mtf):
        mat[0, :] = 0.0
        for o, wt in zip(*outer):
            mat[0, o] = wt
        mat[1, :] = 0.0
        for o, wt in zip(*near):
            mat[1, 1 + o] = wt
    if isinstance(bc_right, Mtf):
        n = nx - 1
        mat[n, :] = 0.0
        for o, wt in zip(*outer):
            mat[n, n - o] = wt * (-1) ** order
        mat[n - 1, :] = 0.0
        for o, wt in zip(*near):
            mat[n - 1, n - 1 - o] = wt * (-1) ** order
    return mat
