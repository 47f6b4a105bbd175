"""Full-batch Adam and limited-memory BFGS over a value-and-gradient callable.

Both optimizers are deterministic: no stochastic sampling, no shuffling.
L-BFGS uses the two-loop recursion (memory 10 by default) with backtracking
Armijo line search and stops on a gradient max-norm threshold, a windowed
relative-decrease threshold, max_iters, or a failed line search.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = ["AdamConfig", "LbfgsConfig", "OptimizerDiverged", "adam", "lbfgs"]


class OptimizerDiverged(RuntimeError):
    """Loss became non-finite; carries the trace accumulated so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 200

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    max_iters: int = 100
    grad_tol: float = 1e-9
    armijo_c: float = 1e-4
    contraction: float = 0.5
    max_backtracks: int = 50
    rel_decrease_tol: float = 1e-12
    rel_decrease_window: int = 5


def adam(x0, value_and_grad, cfg):
    """Full-batch Adam; returns (x, trace) with one (iteration, loss) per epoch."""
    x = np.asarray(x0, dtype=float).copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    trace = []
    for t in range(1, cfg.epochs + 1):
        f, g = value_and_grad(x)
        if not np.isfinite(f):
            raise OptimizerDiverged(f"Adam diverged at epoch {t}", trace)
        trace.append((t, float(f)))
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g**2
        m_hat = m / (1.0 - cfg.beta1**t)
        v_hat = v / (1.0 - cfg.beta2**t)
        x = x - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return x, trace


def _two_loop(g, pairs):
    """L-BFGS two-loop recursion with gamma = s.y/y.y scaling of H0."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def lbfgs(x0, value_and_grad, cfg):
    """L-BFGS with backtracking Armijo; returns (x, trace).

    trace holds (iteration, loss) for the starting point and each accepted
    iterate.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = value_and_grad(x)
    if not np.isfinite(f):
        raise OptimizerDiverged("non-finite loss at L-BFGS start", [])
    trace = [(0, float(f))]
    pairs = deque(maxlen=cfg.memory)
    recent = deque([f], maxlen=cfg.rel_decrease_window + 1)

    for it in range(1, cfg.max_iters + 1):
        if np.max(np.abs(g)) < cfg.grad_tol:
            break
        d = -_two_loop(g, pairs) if pairs else -g
        slope = g @ d
        if slope >= 0:  # direction lost descent property, restart from steepest descent
            pairs.clear()
            d = -g
            slope = g @ d
        alpha = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            x_new = x + alpha * d
            f_new, g_new = value_and_grad(x_new)
            if np.isfinite(f_new) and f_new <= f + cfg.armijo_c * alpha * slope:
                accepted = True
                break
            alpha *= cfg.contraction
        if not accepted:
            break
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        trace.append((it, float(f)))
        recent.append(f)
        if len(recent) == recent.maxlen:
            f_old = recent[0]
            if f_old - f < cfg.rel_decrease_tol * max(abs(f_old), 1e-300):
                break
    return x, trace
