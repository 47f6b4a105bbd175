"""Experiment orchestration: the alternating discovery/embedding loop, config
loading, metrics, and report files.

A case is described by a flat JSON config (see configs/schema.json). The loop
structure follows the alternating update strategy: the first discovery pass
regresses on the coarse (possibly noisy) measurements; in scalar mode each
later pass regresses on the previous embedding phase's high-resolution
prediction; in field mode exactly one discovery-embedding pass runs.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    BoundarySpec,
    Dirichlet,
    Grid1D,
    MediumSpec,
    Mtf,
    Neumann,
    SourceSpec,
    ricker_profile,
)
from .embedding import DiscoveredEquation, OptimizerConfig, filter_terms, optimize, rollout
from .library import TERMS, VISCOUS_INDEX, build_system
from .optim import AdamConfig, LbfgsConfig
from .regression import GAMMA_GRID_DEFAULT, TOL_GRID_DEFAULT, pareto_gamma, stridge
from .sampling import add_noise, downsample, rel_l2
from .simulator import SimConfig, resolve_boundaries, simulate

__all__ = ["ExperimentConfig", "LoopResult", "Report", "run_case", "emit_report", "load_config"]

log = logging.getLogger("wavefind")

SCHEMA_VERSION = 1

_BOUNDARY_NAMES = ("dirichlet", "neumann", "mtf")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full declarative case definition (flat JSON serializable)."""

    length: float
    nx: int
    duration: float
    nt: int
    f0: float
    eta: float = 0.0
    wave_speed: float | None = None
    wave_speed_start: float | None = None
    wave_speed_end: float | None = None
    boundary_left: str = "dirichlet"
    boundary_right: str = "dirichlet"
    mtf_order: int = 2
    mtf_velocity: float | None = None
    stride_x: int = 1
    stride_t: int = 1
    noise_level: float = 0.0
    seed: int = 0
    loops: int = 1
    adam_epochs: int = 200
    adam_lr: float = 5e-3
    lbfgs_max_iters: int = 100
    coefficient_mode: str = "scalar"
    eta_mode: str = "scalar"
    gamma_grid: tuple = GAMMA_GRID_DEFAULT
    tol_grid: tuple = TOL_GRID_DEFAULT
    complexity_weight: float = 0.05
    filter_threshold: float = 1e-3
    eta_init: float = -0.1
    initial_terms: dict | None = None
    initial_eta: float | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if self.loops < 1:
            raise ValueError("loops must be >= 1")
        if self.stride_x < 1 or self.stride_t < 1:
            raise ValueError("strides must be >= 1")
        if (self.wave_speed is None) == (self.wave_speed_start is None):
            raise ValueError("give either wave_speed or wave_speed_start/wave_speed_end")
        if self.wave_speed_start is not None and self.wave_speed_end is None:
            raise ValueError("wave_speed_end required with wave_speed_start")
        for name in (self.boundary_left, self.boundary_right):
            if name not in _BOUNDARY_NAMES:
                raise ValueError(f"unknown boundary {name!r}; expected one of {_BOUNDARY_NAMES}")
        object.__setattr__(self, "gamma_grid", tuple(self.gamma_grid))
        object.__setattr__(self, "tol_grid", tuple(self.tol_grid))

    def grid(self):
        return Grid1D(length=self.length, nx=self.nx, duration=self.duration, nt=self.nt)

    def medium(self):
        if self.wave_speed is not None:
            return MediumSpec.uniform(self.wave_speed, self.eta, self.nx)
        return MediumSpec.linear_speed(self.wave_speed_start, self.wave_speed_end, self.eta, self.nx)

    def boundaries(self):
        def side(name):
            if name == "dirichlet":
                return Dirichlet()
            if name == "neumann":
                return Neumann()
            return Mtf(order=self.mtf_order, c_a=self.mtf_velocity)

        return BoundarySpec(left=side(self.boundary_left), right=side(self.boundary_right))

    def sim_config(self):
        return SimConfig(
            grid=self.grid(),
            medium=self.medium(),
            source=SourceSpec(self.f0),
            boundaries=self.boundaries(),
        )

    def optimizer_config(self):
        return OptimizerConfig(
            adam=AdamConfig(lr=self.adam_lr, epochs=self.adam_epochs),
            lbfgs=LbfgsConfig(max_iters=self.lbfgs_max_iters),
            coefficient_mode=self.coefficient_mode,
            eta_mode=self.eta_mode,
            filter_threshold=self.filter_threshold,
        )


def load_config(path):
    """Read and validate a flat JSON experiment config."""
    with open(path) as fh:
        raw = json.load(fh)
    version = raw.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    return ExperimentConfig(**raw)


@dataclass
class LoopResult:
    loop: int
    gamma: float | None
    tol: float | None
    sr_equation: str
    sr_support: tuple
    equation: DiscoveredEquation
    eps_u: float
    trace: list


@dataclass
class Report:
    config: ExperimentConfig
    loops: list
    wavefield_true: np.ndarray
    wavefield_pred: np.ndarray | None
    final_equation: DiscoveredEquation | None
    eps_u: float | None
    eps_c: float | None
    eta_hat: float | None
    wall_clock: float
    error: dict | None = None


def _solution_equation(sol, nx, eta_override=None):
    """Constant-coefficient DiscoveredEquation from a STRidge solution."""
    term_coeffs = {}
    eta = None
    for j in sol.support:
        if j == VISCOUS_INDEX:
            eta = float(sol.xi[j])
        else:
            term_coeffs[TERMS[j]] = float(sol.xi[j])
    if eta_override is not None:
        eta = eta_override
    return DiscoveredEquation.from_scalars(nx, term_coeffs, eta=eta)


def recovered_speed(eq):
    """sqrt of the u_xx coefficient field, clipped at zero; None without u_xx."""
    for t, f in zip(eq.terms, eq.coeff_fields):
        if t.name == "u_xx":
            return np.sqrt(np.clip(f, 0.0, None))
    return None


def run_case(cfg):
    """Simulate, measure, and alternate discovery/embedding; returns a Report."""
    start = time.perf_counter()
    grid = cfg.grid()
    medium = cfg.medium()
    bc = resolve_boundaries(cfg.boundaries(), medium)
    sim_cfg = SimConfig(grid=grid, medium=medium, source=SourceSpec(cfg.f0), boundaries=bc)
    w_true = simulate(sim_cfg)
    measurements = add_noise(
        downsample(w_true, cfg.stride_x, cfg.stride_t), cfg.noise_level, cfg.seed
    )
    u0 = ricker_profile(grid, SourceSpec(cfg.f0))
    opt = cfg.optimizer_config()
    protected = frozenset({VISCOUS_INDEX})

    sr_data = measurements.values
    dx_eff = cfg.stride_x * grid.dx
    dt_eff = cfg.stride_t * grid.dt

    loops = []
    eq = None
    pred = None
    error = None
    for loop in range(1, cfg.loops + 1):
        try:
            if loop == 1 and cfg.initial_terms is not None:
                gamma = tol = None
                eq = DiscoveredEquation.from_scalars(grid.nx, cfg.initial_terms, eta=cfg.initial_eta)
                sr_summary, sr_support = "injected initial equation", ()
            else:
                problem = build_system(sr_data, dx_eff, dt_eff)
                gamma, tol = pareto_gamma(
                    problem,
                    cfg.gamma_grid,
                    cfg.tol_grid,
                    protected=protected,
                    complexity_weight=cfg.complexity_weight,
                )
                sol = stridge(problem, gamma, tol, protected=protected)
                eq = _solution_equation(
                    sol, grid.nx, eta_override=cfg.eta_init if loop == 1 else None
                )
                sr_summary, sr_support = eq.summary(), tuple(TERMS[j].name for j in sol.support)
            log.info("loop %d discovery: %s (gamma=%s, tol=%s)", loop, sr_summary, gamma, tol)
            eq, trace = optimize(eq, u0, bc, grid, measurements, opt)
            eq = filter_terms(eq, cfg.filter_threshold)
            pred = rollout(eq, u0, bc, grid)
            eps_u = rel_l2(pred, w_true)
            log.info("loop %d optimized: %s  eps_u=%.3e", loop, eq.summary(), eps_u)
            loops.append(
                LoopResult(
                    loop=loop,
                    gamma=gamma,
                    tol=tol,
                    sr_equation=sr_summary,
                    sr_support=sr_support,
                    equation=eq,
                    eps_u=eps_u,
                    trace=trace,
                )
            )
        except Exception as exc:  # record the failing stage, skip remaining loops
            log.exception("loop %d failed", loop)
            error = {"loop": loop, "error": type(exc).__name__, "message": str(exc)}
            break
        if cfg.coefficient_mode == "field":
            break  # single discovery-embedding pass for spatially varying coefficients
        if loop < cfg.loops:
            sr_data, dx_eff, dt_eff = pred, grid.dx, grid.dt

    eps_c = None
    eta_hat = None
    eps_u = loops[-1].eps_u if loops else None
    final_eq = loops[-1].equation if loops else None
    if final_eq is not None:
        c_hat = recovered_speed(final_eq)
        if c_hat is not None:
            eps_c = rel_l2(c_hat, np.sqrt(medium.csq))
        if final_eq.eta_field is not None:
            eta_hat = float(np.mean(final_eq.eta_field))

    return Report(
        config=cfg,
        loops=loops,
        wavefield_true=w_true,
        wavefield_pred=pred,
        final_equation=final_eq,
        eps_u=eps_u,
        eps_c=eps_c,
        eta_hat=eta_hat,
        wall_clock=time.perf_counter() - start,
        error=error,
    )


def _atomic_write(path, text):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    return repr(float(v))


def _csv_lines(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _equation_dict(eq):
    d = {
        "support": [t.name for t in eq.terms],
        "coefficient_means": {t.name: float(np.mean(f)) for t, f in zip(eq.terms, eq.coeff_fields)},
        "equation": eq.summary(),
    }
    d["eta"] = float(np.mean(eq.eta_field)) if eq.eta_field is not None else None
    return d


def emit_report(report, out_dir):
    """Write metrics.json, per-loop coefficient CSVs, wavefield CSVs, and the
    loss trace. Byte-stable for a fixed Report; wall-clock goes to a separate
    timing.json because it is not deterministic."""
    os.makedirs(out_dir, exist_ok=True)
    cfg = report.config
    metrics = {
        "schema_version": SCHEMA_VERSION,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(cfg).items()},
        "loops": [
            {
                "loop": lr.loop,
                "gamma": lr.gamma,
                "tol": lr.tol,
                "sr_equation": lr.sr_equation,
                "sr_support": list(lr.sr_support),
                "eps_u": lr.eps_u,
                **_equation_dict(lr.equation),
            }
            for lr in report.loops
        ],
        "final": {
            "eps_u": report.eps_u,
            "eps_c": report.eps_c,
            "eta": report.eta_hat,
            **(_equation_dict(report.final_equation) if report.final_equation else {}),
        },
        "error": report.error,
    }
    _atomic_write(
        os.path.join(out_dir, "metrics.json"),
        json.dumps(metrics, indent=2, sort_keys=True) + "\n",
    )
    _atomic_write(
        os.path.join(out_dir, "timing.json"),
        json.dumps({"wall_clock_seconds": report.wall_clock}, indent=2) + "\n",
    )
    if not report.loops:
        return

    x = cfg.grid().x()
    for lr in report.loops:
        eq = lr.equation
        header = ["x"] + [t.name for t in eq.terms] + (["u_t"] if eq.eta_field is not None else [])
        cols = [x] + list(eq.coeff_fields)
        if eq.eta_field is not None:
            cols.append(eq.eta_field)
        rows = np.column_stack(cols)
        _atomic_write(
            os.path.join(out_dir, f"coefficients_loop{lr.loop}.csv"), _csv_lines(header, rows)
        )

    def wavefield_text(w):
        return "\n".join(",".join(_fmt(v) for v in row) for row in w) + "\n"

    _atomic_write(os.path.join(out_dir, "wavefield_true.csv"), wavefield_text(report.wavefield_true))
    if report.wavefield_pred is not None:
        _atomic_write(
            os.path.join(out_dir, "wavefield_pred.csv"), wavefield_text(report.wavefield_pred)
        )

    trace_lines = ["loop,phase,iteration,loss"]
    for lr in report.loops:
        trace_lines.extend(
            f"{lr.loop},{phase},{it},{_fmt(val)}" for phase, it, val in lr.trace
        )
    _atomic_write(os.path.join(out_dir, "loss_trace.csv"), "\n".join(trace_lines) + "\n")
