"""Comparison denoisers: standard INR, Savitzky-Golay, TV-regularized differentiation, smoothing spline.

Each returns states and first-derivative estimates on the input grid, the
derivative always being the analytic derivative of that method's own model.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.signal import savgol_filter

from . import autodiff as ad
from .odesim import Trajectory
from .siren import SirenConfig, forward_jet, init
from .train import TrainConfig, denoise_output, optimize

METHODS = ("RKTV", "StdINR", "SavitzkyGolay", "TVR", "Spline")


@dataclass
class DenoiseOutput:
    states: np.ndarray
    derivs: np.ndarray
    method: str
    info: dict = field(default_factory=dict)

    def trajectory(self, like: Trajectory) -> Trajectory:
        return like.with_states(self.states, self.derivs)


# ---------------------------------------------------------------------------
# standard INR


def std_inr(data: Trajectory, siren_cfg: SirenConfig | None = None, lr: float = 5e-4,
            iters: int = 3000, weight_decay: float = 1e-5, seed: int = 0,
            return_params: bool = False):
    """Data fidelity plus ``weight_decay * ||theta||^2``; derivatives from jets."""
    if siren_cfg is None:
        siren_cfg = SirenConfig(out_dim=data.n, t_domain=(data.t0, data.t1))
    X, m = data.states, data.m
    t = data.times

    def objective(arrays):
        v = forward_jet(arrays, siren_cfg, t).v
        fid = ad.total(ad.square(v - X)) * (1.0 / m)
        reg = 0.0
        for a in arrays:
            reg = reg + ad.total(ad.square(a))
        return fid + weight_decay * reg, fid, reg

    cfg = TrainConfig(lr=lr, iters=iters, seed=seed)
    params, history = optimize(init(siren_cfg, seed), objective, cfg)
    traj = denoise_output(params, siren_cfg, data)
    out = DenoiseOutput(traj.states, traj.derivs, "StdINR",
                        {"weight_decay": weight_decay, "lr": lr, "iters": iters,
                         "omega0": siren_cfg.omega0})
    if return_params:
        return out, params, history
    return out


# ---------------------------------------------------------------------------
# Savitzky-Golay


def savitzky_golay(X, h: float = 1.0, window: int = 11, degree: int = 3) -> DenoiseOutput:
    """Sliding least-squares polynomial; edges use the first/last full window off-center."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 1:
        X = X.T
    m = X.shape[0]
    if window % 2 != 1 or window < 1:
        raise ValueError("window length must be odd and positive")
    if window > m:
        raise ValueError(f"window {window} longer than the series ({m})")
    if not 0 <= degree < window:
        raise ValueError("degree must satisfy 0 <= degree < window")
    states = savgol_filter(X, window, degree, deriv=0, axis=0, mode="interp")
    if degree == 0:
        derivs = np.zeros_like(X)
    else:
        derivs = savgol_filter(X, window, degree, deriv=1, delta=h, axis=0, mode="interp")
    return DenoiseOutput(states, derivs, "SavitzkyGolay", {"window": window, "degree": degree})


# ---------------------------------------------------------------------------
# total-variation regularized differentiation


def trapezoid_operator(m: int, h: float) -> np.ndarray:
    """Cumulative trapezoid integral from the first sample: (A u)_0 = 0."""
    A = np.zeros((m, m))
    for i in range(1, m):
        A[i, 0] = 0.5 * h
        A[i, 1:i] = h
        A[i, i] = 0.5 * h
    return A


@dataclass
class TVResult:
    u: np.ndarray
    objective: list[float]
    converged: bool


def tv_objective(u, A, f, alpha, eps, weights=None) -> float:
    r = A @ u - f
    if weights is not None:
        r = r * np.sqrt(weights)
    return float(r @ r + alpha * np.sum(np.sqrt(np.diff(u) ** 2 + eps)))


def tv_derivative(f, A, alpha: float, eps: float = 1e-8, iterations: int = 100,
                  tol: float = 1e-10, weights=None) -> TVResult:
    """Lagged-diffusivity minimization of ||A u - f||^2 + alpha * sum sqrt((Du)^2 + eps).

    Each step solves the quadratic majorizer, so the objective never increases.
    """
    m = A.shape[1]
    W = np.ones(A.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    AtWA = A.T @ (W[:, None] * A)
    AtWf = A.T @ (W * f)
    D = np.diff(np.eye(m), axis=0)
    u = np.zeros(m)
    history = [tv_objective(u, A, f, alpha, eps, W)]
    best_u, best = u, history[0]
    converged = False
    for _ in range(iterations):
        e = 1.0 / np.sqrt((D @ u) ** 2 + eps)
        lhs = 2.0 * AtWA + alpha * (D.T @ (e[:, None] * D))
        u_new = scipy.linalg.solve(lhs, 2.0 * AtWf, assume_a="pos")
        obj = tv_objective(u_new, A, f, alpha, eps, W)
        history.append(obj)
        if obj < best:
            best_u, best = u_new, obj
        step = np.linalg.norm(u_new - u) / max(np.linalg.norm(u_new), 1e-300)
        u = u_new
        if step < tol:
            converged = True
            break
    return TVResult(best_u, history, converged)


def tvr_differentiate(X, h: float, alpha: float | None = None, iterations: int = 100,
                      eps: float = 1e-8, alpha_grid=None) -> DenoiseOutput:
    """Per column: u estimates the derivative, state = X_0 + cumulative integral of u.

    When ``alpha`` is None it is picked per column from ``alpha_grid`` by
    fitting on even-indexed samples and scoring the squared residual on the
    odd-indexed ones.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 1:
        X = X.T
    m, n = X.shape
    A = trapezoid_operator(m, h)
    if alpha_grid is None:
        alpha_grid = np.logspace(-6, 2, 17)
    states, derivs = np.empty_like(X), np.empty_like(X)
    chosen, flags = [], []
    holdout = np.arange(m) % 2 == 1
    for j in range(n):
        f = X[:, j] - X[0, j]
        a = alpha
        if a is None:
            scores = []
            for cand in alpha_grid:
                if not cand > 0:
                    raise ValueError("alpha must be positive")
                res = tv_derivative(f, A, cand, eps, iterations=min(iterations, 40),
                                    weights=(~holdout).astype(float))
                r = (A @ res.u - f)[holdout]
                scores.append(float(r @ r))
            a = float(alpha_grid[int(np.argmin(scores))])
        elif not a > 0:
            raise ValueError("alpha must be positive")
        res = tv_derivative(f, A, a, eps, iterations)
        if not res.converged:
            warnings.warn(f"TV fixed point did not converge for column {j}; returning best iterate",
                          RuntimeWarning, stacklevel=2)
        derivs[:, j] = res.u
        states[:, j] = X[0, j] + A @ res.u
        chosen.append(a)
        flags.append(res.converged)
    return DenoiseOutput(states, derivs, "TVR", {"alpha": chosen, "converged": flags})


# ---------------------------------------------------------------------------
# smoothing spline


class _SplineSystem:
    """Natural cubic smoothing spline on fixed knots (Reinsch form).

    With g the fitted values and gamma the interior second derivatives,
    Q^T g = R gamma and (R + lam Q^T Q) gamma = Q^T y, g = y - lam Q gamma.
    The generalized eigenproblem Q^T Q v = mu R v diagonalizes every lam at once.
    """

    def __init__(self, t):
        t = np.asarray(t, dtype=np.float64)
        m = t.size
        if m < 4:
            raise ValueError("smoothing spline needs at least 4 samples")
        hh = np.diff(t)
        Q = np.zeros((m, m - 2))
        R = np.zeros((m - 2, m - 2))
        for j in range(m - 2):
            Q[j, j] = 1.0 / hh[j]
            Q[j + 1, j] = -1.0 / hh[j] - 1.0 / hh[j + 1]
            Q[j + 2, j] = 1.0 / hh[j + 1]
            R[j, j] = (hh[j] + hh[j + 1]) / 3.0
            if j + 1 < m - 2:
                R[j, j + 1] = R[j + 1, j] = hh[j + 1] / 6.0
        self.t, self.hh, self.Q = t, hh, Q
        self.mu, self.V = scipy.linalg.eigh(Q.T @ Q, R)
        self.QV = Q @ self.V

    def lam_grid(self, size: int = 121) -> np.ndarray:
        lo = 1e-3 / self.mu.max()
        hi = 1e3 / self.mu.min()
        return np.logspace(np.log10(lo), np.log10(hi), size)

    def gcv(self, y, lams) -> np.ndarray:
        w = self.V.T @ (self.Q.T @ y)
        m = self.t.size
        out = np.empty(len(lams))
        for k, lam in enumerate(lams):
            shrink = lam / (1.0 + lam * self.mu)
            resid = self.QV @ (shrink * w)
            tr = m - np.sum(lam * self.mu / (1.0 + lam * self.mu))
            out[k] = m * (resid @ resid) / (m - tr) ** 2
        return out

    def fit(self, y, lam):
        w = self.V.T @ (self.Q.T @ y)
        gamma = self.V @ (w / (1.0 + lam * self.mu))
        g = y - lam * (self.Q @ gamma)
        full = np.concatenate([[0.0], gamma, [0.0]])
        hh = self.hh
        slope = np.diff(g) / hh
        d = np.empty_like(g)
        d[:-1] = slope - hh * (2.0 * full[:-1] + full[1:]) / 6.0
        d[-1] = slope[-1] + hh[-1] * (full[-2] + 2.0 * full[-1]) / 6.0
        return g, d


def smoothing_spline(X, t, lam: float | None = None, return_scores: bool = False) -> DenoiseOutput:
    """Natural cubic smoothing spline per column; ``lam`` by GCV over a log grid if None."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 1:
        X = X.T
    system = _SplineSystem(t)
    states, derivs = np.empty_like(X), np.empty_like(X)
    chosen, scores_all = [], []
    grid = system.lam_grid()
    for j in range(X.shape[1]):
        y = X[:, j]
        lj = lam
        if lj is None:
            scores = system.gcv(y, grid)
            scores_all.append(scores)
            if not np.isfinite(scores).any():
                warnings.warn("GCV failed; falling back to lambda = 1", RuntimeWarning, stacklevel=2)
                lj = 1.0
            else:
                lj = float(grid[int(np.nanargmin(np.where(np.isfinite(scores), scores, np.nan)))])
        states[:, j], derivs[:, j] = system.fit(y, lj)
        chosen.append(lj)
    info = {"lambda": chosen}
    if return_scores:
        info["grid"] = grid
        info["gcv"] = scores_all
    return DenoiseOutput(states, derivs, "Spline", info)
