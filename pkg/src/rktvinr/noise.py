"""Length scale and calibrated additive noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .odesim import Trajectory

DISTRIBUTIONS = ("Gaussian", "Uniform", "Laplace")


@dataclass(frozen=True)
class NoiseSpec:
    """Relative noise level sigma2 = zeta^2 / L^2 for one distribution."""

    relative_level: float = 0.0
    distribution: str = "Gaussian"
    seed: int = 0

    def __post_init__(self):
        if not self.relative_level >= 0:
            raise ValueError("relative_level must be >= 0")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def length_scale(X) -> float:
    """Root of the mean (population) column variance."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise ValueError("length_scale needs at least two rows")
    # shifting by the first row keeps constant columns at exactly zero
    return float(np.sqrt(np.mean(np.var(X - X[0], axis=0))))


def unit_noise(distribution: str, seed: int, size: int) -> np.ndarray:
    """Zero-mean, unit-variance draws.

    Uniform is U(-sqrt3, sqrt3); Laplace has scale 1/sqrt2.
    """
    if distribution == "Gaussian":
        return rng.standard_normal(seed, rng.STREAM_NOISE, size)
    if distribution == "Uniform":
        return rng.uniform(seed, rng.STREAM_NOISE, -np.sqrt(3.0), np.sqrt(3.0), size)
    if distribution == "Laplace":
        return rng.standard_laplace(seed, rng.STREAM_NOISE, size) / np.sqrt(2.0)
    raise ValueError(f"unknown distribution {distribution!r}")


def noise_std(traj: Trajectory, spec: NoiseSpec) -> float:
    return float(np.sqrt(spec.relative_level) * length_scale(traj.states))


def corrupt(traj: Trajectory, spec: NoiseSpec) -> Trajectory:
    """Add i.i.d. noise of variance sigma2 * L^2; derivatives are dropped.

    Draws fill the state matrix in row-major order.
    """
    if spec.relative_level == 0:
        return traj.with_states(traj.states.copy())
    zeta = noise_std(traj, spec)
    eps = unit_noise(spec.distribution, spec.seed, traj.states.size).reshape(traj.states.shape)
    return traj.with_states(traj.states + zeta * eps)
