"""Measurement synthesis: coarse-grid downsampling, noise, and error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MeasurementSet", "downsample", "add_noise", "rel_l2"]


@dataclass(frozen=True)
class MeasurementSet:
    """Samples of a wavefield on a coarse space-time lattice.

    time_indices/space_indices index into the fine grid; values has shape
    (len(time_indices), len(space_indices)).
    """

    time_indices: np.ndarray
    space_indices: np.ndarray
    values: np.ndarray
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        ti = np.asarray(self.time_indices, dtype=int)
        xi = np.asarray(self.space_indices, dtype=int)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "time_indices", ti)
        object.__setattr__(self, "space_indices", xi)
        object.__setattr__(self, "values", vals)
        for idx, name in ((ti, "time_indices"), (xi, "space_indices")):
            if idx.ndim != 1 or idx.size == 0:
                raise ValueError(f"{name} must be a non-empty 1-D index list")
            if np.any(np.diff(idx) <= 0) or idx[0] < 0:
                raise ValueError(f"{name} must be strictly increasing and non-negative")
        if vals.shape != (ti.size, xi.size):
            raise ValueError(
                f"values shape {vals.shape} does not match index sets ({ti.size}, {xi.size})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("measurement values must be finite")


def downsample(wavefield, stride_x, stride_t):
    """Lattice samples {0, s, 2s, ...} of a fine wavefield in each dimension."""
    w = np.asarray(wavefield, dtype=float)
    if stride_t < 1 or stride_x < 1:
        raise ValueError("strides must be >= 1")
    nt, nx = w.shape
    if stride_t > nt or stride_x > nx:
        raise ValueError("stride larger than the corresponding dimension")
    ti = np.arange(0, nt, stride_t)
    xi = np.arange(0, nx, stride_x)
    return MeasurementSet(time_indices=ti, space_indices=xi, values=w[np.ix_(ti, xi)])


def add_noise(m, level, seed):
    """Additive Gaussian noise scaled by the global std of the measurement values.

    Deterministic for a given seed; level 0 returns the values unchanged.
    """
    if level < 0:
        raise ValueError(f"noise level must be non-negative, got {level}")
    if level == 0:
        return MeasurementSet(m.time_indices, m.space_indices, m.values, 0.0, seed)
    rng = np.random.default_rng(seed)
    sigma = float(np.std(m.values))
    noisy = m.values + level * sigma * rng.standard_normal(m.values.shape)
    return MeasurementSet(m.time_indices, m.space_indices, noisy, float(level), seed)


def rel_l2(a, b):
    """Relative L2 distance ||a - b|| / ||b|| over all entries."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    denom = np.linalg.norm(b)
    if denom == 0.0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(a - b) / denom)
