"""Relative squared-Frobenius errors for states, derivatives and coefficients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ErrorReport:
    e_state: float
    e_deriv: float
    e_coeff: float | None = None

    def __post_init__(self):
        for v in (self.e_state, self.e_deriv, self.e_coeff):
            if v is not None and not v >= 0:
                raise ValueError("errors must be non-negative")


def rel_error(truth, estimate) -> float:
    """||truth - estimate||_F^2 / ||truth||_F^2."""
    truth = np.asarray(truth, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if truth.shape != estimate.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {estimate.shape}")
    denom = np.sum(truth * truth)
    if denom == 0:
        raise ZeroDivisionError("truth has zero Frobenius norm")
    diff = truth - estimate
    return float(np.sum(diff * diff) / denom)


def coeff_error(xi_true, xi_hat) -> float:
    xi_true = np.asarray(xi_true)
    xi_hat = np.asarray(xi_hat)
    if xi_true.shape != xi_hat.shape:
        raise ValueError(f"library mismatch: {xi_true.shape} vs {xi_hat.shape}")
    return rel_error(xi_true, xi_hat)
