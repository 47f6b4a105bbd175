"""Forward FDTD solver for the (visco)elastic wave equation.

The time-marching core is WaveOperator, a recurrence over an arbitrary list
of dictionary terms with per-node coefficient fields. simulate() drives it
with the single u_xx term of a MediumSpec; the embedding phase drives the
same object with a discovered equation, so simulation and rollout are
bit-identical by construction.

Update rule (central differences in time, viscous term centred):

    u_next = (4 u_curr + 2 dt^2 rhs(u_curr) - (2 + eta dt) u_prev) / (2 - eta dt)

with rhs = sum_k coeff_k(x) * term_k(u_curr). Boundary nodes are then
overwritten for Dirichlet (0) and MTF sides; Neumann sides evolve through
mirror-folded stencils and need no overwrite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import BoundarySpec, Dirichlet, Mtf, Neumann, cfl_margin, ricker_profile, validate_field
from .library import TERMS, TermDescriptor
from .stencil import derivative_matrix

__all__ = [
    "SimConfig",
    "SimulationDiverged",
    "MtfHistory",
    "WaveOperator",
    "resolve_boundaries",
    "mtf_boundary",
    "bootstrap_first_step",
    "step",
    "simulate",
]

_UXX = TermDescriptor(0, (0, 1, 0, 0))


class SimulationDiverged(RuntimeError):
    """Non-finite state encountered while time stepping."""

    def __init__(self, step_index):
        super().__init__(f"non-finite wavefield values at time step {step_index}")
        self.step = step_index


@dataclass(frozen=True)
class SimConfig:
    grid: object
    medium: object
    source: object
    boundaries: BoundarySpec

    def __post_init__(self):
        validate_field(self.grid, self.medium.csq, "csq")
        validate_field(self.grid, self.medium.eta, "eta")
        margin = cfl_margin(self.grid, self.medium)
        if margin > 1.0:
            raise ValueError(f"unstable configuration: CFL margin {margin:.3f} > 1")


def resolve_boundaries(bc, medium):
    """Fill in MTF artificial velocities from the local physical wave speed."""

    def fix(side, node):
        if isinstance(side, Mtf) and side.c_a is None:
            return replace(side, c_a=float(np.sqrt(medium.csq[node])))
        return side

    return BoundarySpec(left=fix(bc.left, 0), right=fix(bc.right, -1))


def _lagrange3(p, nx):
    """Quadratic interpolation at index coordinate p from the 3 nearest nodes."""
    lo = min(max(int(round(p)) - 1, 0), nx - 3)
    xs = np.array([lo, lo + 1, lo + 2], dtype=float)
    w = np.empty(3)
    for k in range(3):
        others = [m for m in range(3) if m != k]
        w[k] = np.prod([(p - xs[m]) / (xs[k] - xs[m]) for m in others])
    return lo, w


def _transmitting_coefficients(order, stabilization):
    """Coefficients of u_{ja} in the (stabilized) multi-transmitting formula.

    stabilization = 1 gives the binomial coefficients (-1)^{j+1} C_j^N.
    """
    poly = np.array([1.0])
    for k in range(order):
        poly = np.convolve(poly, [1.0, -(stabilization**k)])
    return -poly[1:]


class _MtfGeometry:
    """Interpolation windows for one transmitting boundary."""

    def __init__(self, node, order, c_a, grid, stabilization=1.0):
        self.node = node
        self.order = order
        self.coefs = _transmitting_coefficients(order, stabilization)
        self.los = []
        self.weights = []
        for j in range(1, order + 1):
            dist = j * c_a * grid.dt
            if not 0 < dist < grid.length:
                raise ValueError(f"MTF interpolation point at distance {dist} outside grid")
            xi = dist / grid.dx
            p = xi if node == 0 else (grid.nx - 1) - xi
            lo, w = _lagrange3(p, grid.nx)
            self.los.append(lo)
            self.weights.append(w)

    def interp(self, snapshot, j):
        """Motion at the j-th transmitting point from a stored snapshot."""
        lo = self.los[j - 1]
        return float(self.weights[j - 1] @ snapshot[lo : lo + 3])


@dataclass
class MtfHistory:
    """Snapshots feeding one MTF boundary update, most recent first.

    snapshots[j-1] is the field at time p+1-j; zero fields stand in for
    times before the start of the simulation.
    """

    geometry: _MtfGeometry
    snapshots: list

    def __post_init__(self):
        if len(self.snapshots) != self.geometry.order:
            raise ValueError(
                f"MTF order {self.geometry.order} needs {self.geometry.order} snapshots, "
                f"got {len(self.snapshots)}"
            )


def mtf_boundary(history):
    """Next boundary-node value predicted by the multi-transmitting formula."""
    geo = history.geometry
    return float(
        sum(
            geo.coefs[j - 1] * geo.interp(history.snapshots[j - 1], j)
            for j in range(1, geo.order + 1)
        )
    )


class WaveOperator:
    """Time-marching recurrence for a term list with coefficient fields.

    coeff_fields has shape (n_terms, nx); eta_field is the coefficient of the
    implicit viscous u_t term (pass zeros when absent). MTF boundary sides
    must carry a concrete artificial velocity.
    """

    def __init__(self, grid, bc, terms, coeff_fields, eta_field):
        self.grid = grid
        self.bc = bc
        self.terms = list(terms)
        self.coeffs = np.atleast_2d(np.asarray(coeff_fields, dtype=float))
        if self.coeffs.shape != (len(self.terms), grid.nx):
            raise ValueError(
                f"coefficient fields have shape {self.coeffs.shape}, "
                f"expected ({len(self.terms)}, {grid.nx})"
            )
        self.eta = validate_field(grid, eta_field, "eta") if eta_field is not None else np.zeros(grid.nx)
        self.dt = grid.dt
        self.dx = grid.dx
        self.beta = 1.0 / (2.0 - self.dt * self.eta)
        self.amp_prev = 2.0 + self.dt * self.eta

        orders = sorted({o + 1 for t in self.terms for o in range(3) if t.deriv_powers[o]})
        self.D = {
            order: derivative_matrix(grid.nx, self.dx, order, bc.left, bc.right) for order in orders
        }
        self.needs_ut = any(t.deriv_powers[3] for t in self.terms)

        self.dirichlet_nodes = []
        self.mtf_sides = []
        for side, node in ((bc.left, 0), (bc.right, grid.nx - 1)):
            if isinstance(side, Dirichlet):
                self.dirichlet_nodes.append(node)
            elif isinstance(side, Mtf):
                if side.c_a is None:
                    raise ValueError("MTF boundary needs a concrete artificial velocity here")
                self.mtf_sides.append(
                    _MtfGeometry(node, side.order, side.c_a, grid, side.stabilization)
                )
            elif not isinstance(side, Neumann):
                raise ValueError(f"unknown boundary condition {side!r}")

    def factor_arrays(self, u_curr, u_prev):
        """Factor value arrays shared by all terms at one time level.

        u_t factors other than the implicit viscous term use the backward
        difference (u_curr - u_prev)/dt, the only causal explicit choice.
        """
        arrs = {"u": u_curr}
        for order, mat in self.D.items():
            arrs[order] = mat @ u_curr
        if self.needs_ut:
            arrs["v"] = (u_curr - u_prev) / self.dt
        return arrs

    def term_factors(self, term, arrs):
        """(array, exponent) factor list for one term."""
        factors = []
        if term.poly_power:
            factors.append(("u", arrs["u"], term.poly_power))
        for o in range(3):
            if term.deriv_powers[o]:
                factors.append((o + 1, arrs[o + 1], term.deriv_powers[o]))
        if term.deriv_powers[3]:
            factors.append(("v", arrs["v"], term.deriv_powers[3]))
        return factors

    def term_values(self, arrs):
        """(n_terms, nx) array of term values from shared factor arrays."""
        dtype = np.result_type(float, *arrs.values()) if arrs else float
        out = np.ones((len(self.terms), self.grid.nx), dtype=dtype)
        for k, term in enumerate(self.terms):
            for _, arr, e in self.term_factors(term, arrs):
                out[k] *= arr**e
        return out

    def initial_condition(self, u0):
        """Source profile with Dirichlet nodes pinned to zero."""
        u0 = validate_field(self.grid, u0, "u0").copy()
        for node in self.dirichlet_nodes:
            u0[node] = 0.0
        return u0

    def bootstrap(self, u0):
        """First step from zero initial velocity: u1 = u0 + dt^2/2 * rhs(u0).

        Terms carrying a u_t factor vanish at t=0 (the initial velocity is
        identically zero).
        """
        arrs = self.factor_arrays(u0, u0)
        if self.needs_ut:
            arrs["v"] = np.zeros(self.grid.nx)
        rhs = np.einsum("kx,kx->x", self.coeffs, self.term_values(arrs))
        u1 = u0 + 0.5 * self.dt**2 * rhs
        return self._apply_bc(u1, u_curr=u0, u_prev=None, older=None)

    def step(self, u_prev, u_curr, older=None):
        """Advance one time level; older supplies the pre-u_prev snapshot for MTF order 3."""
        arrs = self.factor_arrays(u_curr, u_prev)
        rhs = np.einsum("kx,kx->x", self.coeffs, self.term_values(arrs))
        u_next = self.beta * (4.0 * u_curr + 2.0 * self.dt**2 * rhs - self.amp_prev * u_prev)
        return self._apply_bc(u_next, u_curr=u_curr, u_prev=u_prev, older=older)

    def _apply_bc(self, u_next, u_curr, u_prev, older):
        zeros = np.zeros(self.grid.nx)
        for node in self.dirichlet_nodes:
            u_next[node] = 0.0
        for geo in self.mtf_sides:
            past = [u_curr, u_prev if u_prev is not None else zeros]
            past.append(older if older is not None else zeros)
            u_next[geo.node] = mtf_boundary(MtfHistory(geo, past[: geo.order]))
        return u_next

    def run(self, u0):
        """Full rollout; raises SimulationDiverged at the first non-finite step."""
        nt = self.grid.nt
        wave = np.empty((nt, self.grid.nx))
        wave[0] = self.initial_condition(u0)
        wave[1] = self.bootstrap(wave[0])
        if not np.all(np.isfinite(wave[1])):
            raise SimulationDiverged(1)
        zeros = np.zeros(self.grid.nx)
        for t in range(1, nt - 1):
            older = wave[t - 2] if t >= 2 else zeros
            wave[t + 1] = self.step(wave[t - 1], wave[t], older=older)
            if not np.all(np.isfinite(wave[t + 1])):
                raise SimulationDiverged(t + 1)
        return wave


def _operator_from_config(cfg):
    bc = resolve_boundaries(cfg.boundaries, cfg.medium)
    return WaveOperator(cfg.grid, bc, [_UXX], cfg.medium.csq[None, :], cfg.medium.eta)


def bootstrap_first_step(u0, cfg):
    """Field at t = dt from the initial profile (zero initial velocity)."""
    op = _operator_from_config(cfg)
    return op.bootstrap(validate_field(cfg.grid, u0, "u0"))


def step(u_prev, u_curr, cfg, older=None):
    """One update of the physical-medium recurrence."""
    op = _operator_from_config(cfg)
    u_next = op.step(
        validate_field(cfg.grid, u_prev, "u_prev"),
        validate_field(cfg.grid, u_curr, "u_curr"),
        older=older,
    )
    if not np.all(np.isfinite(u_next)):
        raise SimulationDiverged(-1)
    return u_next


def simulate(cfg):
    """Ground-truth wavefield for a SimConfig; deterministic."""
    op = _operator_from_config(cfg)
    return op.run(ricker_profile(cfg.grid, cfg.source))
