"""RKTV training: state fit, Runge-Kutta inverse residual and second-derivative TV."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .odesim import Trajectory
from .siren import SirenConfig, SirenParams, forward_jet, init


class TrainingError(FloatingPointError):
    def __init__(self, iteration: int, components: Sequence[float]):
        self.iteration = iteration
        self.components = tuple(float(c) for c in components)
        super().__init__(f"non-finite loss at iteration {iteration}: components={self.components}")


@dataclass(frozen=True)
class TrainConfig:
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1e-2
    lr: float = 5e-4
    iters: int = 3000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if min(self.c1, self.c2, self.c3) <= 0:
            raise ValueError("loss weights must be positive")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.iters < 0:
            raise ValueError("iters must be >= 0")


@dataclass
class FitResult:
    params: SirenParams
    loss_history: np.ndarray  # (iters + 1, k): total first, then components
    denoised: Trajectory
    columns: tuple[str, ...] = ("L", "L1", "L2", "L3")

    def write_history(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iter",) + self.columns)
            for i, row in enumerate(self.loss_history):
                w.writerow([i] + [format(float(v), ".17g") for v in row])


def _rows(a, start, stop):
    """Row slice that works for tape nodes and plain arrays."""
    if not isinstance(a, ad.Node):
        return a[start:stop]
    shape = a.value.shape

    def vjp(g):
        out = np.zeros(shape)
        out[start:stop] = g
        return out

    return ad.Node(a.value[start:stop], (a,), (vjp,))


def _mean_sq(a, count: int):
    return ad.total(ad.square(a)) * (1.0 / count)


def _query_times(data: Trajectory) -> np.ndarray:
    t = data.times
    return np.concatenate([t, t[:-1] + 0.5 * data.h])


def rktv_terms(arrays, config: SirenConfig, data: Trajectory):
    """(L1, L2, L3) as tape nodes when ``arrays`` are nodes, else floats.

    One batched jet pass covers the m grid points and the m-1 interval
    midpoints.  Because the network derivative does not depend on the state,
    RK4 stages k2 and k3 coincide and the step reduces to Simpson's rule.
    """
    m, h = data.m, data.h
    X = data.states
    jet = forward_jet(arrays, config, _query_times(data))
    v = _rows(jet.v, 0, m)
    g = _rows(jet.d1, 0, m)
    g_mid = _rows(jet.d1, m, 2 * m - 1)
    acc = _rows(jet.d2, 0, m)

    L1 = _mean_sq(v - X, m)
    rk = (_rows(g, 0, m - 1) + _rows(g, 1, m) + 4.0 * g_mid) * (h / 6.0)
    L2 = _mean_sq((X[1:] - X[:-1]) - rk, m - 1)
    L3 = _mean_sq(_rows(acc, 1, m) - _rows(acc, 0, m - 1), m - 1)
    return L1, L2, L3


def loss_state(params: SirenParams, config: SirenConfig, data: Trajectory) -> float:
    v = forward_jet(params.arrays, config, data.times).values()[0]
    return float(np.sum((v - data.states) ** 2) / data.m)


def loss_rk(params: SirenParams, config: SirenConfig, data: Trajectory) -> float:
    return float(rktv_terms(params.arrays, config, data)[1])


def loss_rk_stages(params: SirenParams, config: SirenConfig, data: Trajectory) -> float:
    """Same residual as ``loss_rk`` through the explicit four-stage RK4 operator."""
    t, h = data.times[:-1], data.h

    def g(tq):
        return forward_jet(params.arrays, config, tq).values()[1]

    k1 = h * g(t)
    k2 = h * g(t + h / 2)
    k3 = h * g(t + h / 2)
    k4 = h * g(t + h)
    rk = (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    X = data.states
    return float(np.sum(((X[1:] - X[:-1]) - rk) ** 2) / (data.m - 1))


def loss_tv(params: SirenParams, config: SirenConfig, times) -> float:
    times = np.asarray(times, dtype=np.float64)
    acc = forward_jet(params.arrays, config, times).values()[2]
    return float(np.sum((acc[1:] - acc[:-1]) ** 2) / (len(times) - 1))


def total_loss(params: SirenParams, config: SirenConfig, data: Trajectory,
               train_cfg: TrainConfig) -> float:
    L1, L2, L3 = rktv_terms(params.arrays, config, data)
    return train_cfg.c1 * L1 + train_cfg.c2 * L2 + train_cfg.c3 * L3


# ---------------------------------------------------------------------------
# optimizer


class Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, arrays: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


Objective = Callable[[list], tuple]


def optimize(params: SirenParams, objective: Objective, train_cfg: TrainConfig,
             callback: Callable[[int, np.ndarray], None] | None = None):
    """Full-batch Adam on ``objective``.

    ``objective(arrays)`` returns ``(total, *components)``; called with tape
    nodes it must produce nodes.  Returns the trained params and the history
    (iters + 1 rows, initial loss included).
    """
    params = params.copy()
    opt = Adam([a.shape for a in params.arrays], train_cfg.lr, train_cfg.beta1,
               train_cfg.beta2, train_cfg.eps)
    history = []
    for it in range(train_cfg.iters + 1):
        leaves = [ad.param(a) for a in params.arrays]
        terms = objective(leaves)
        row = np.array([float(ad.value_of(x)) for x in terms])
        if not np.isfinite(row).all():
            raise TrainingError(it, row[1:] if row.size > 1 else row)
        history.append(row)
        if callback is not None:
            callback(it, row)
        if it == train_cfg.iters:
            break
        grads = ad.backward(terms[0], leaves)
        opt.step(params.arrays, grads)
    return params, np.array(history)


def denoise_output(params: SirenParams, config: SirenConfig, data: Trajectory) -> Trajectory:
    v, d1, _ = forward_jet(params.arrays, config, data.times).values()
    return data.with_states(v, d1)


def fit(data: Trajectory, siren_cfg: SirenConfig | None = None,
        train_cfg: TrainConfig | None = None, callback=None) -> FitResult:
    """Train a SIREN on ``data`` under c1*L1 + c2*L2 + c3*L3."""
    if siren_cfg is None:
        siren_cfg = SirenConfig(out_dim=data.n, t_domain=(data.t0, data.t1))
    train_cfg = train_cfg or TrainConfig()
    c1, c2, c3 = train_cfg.c1, train_cfg.c2, train_cfg.c3

    def objective(arrays):
        L1, L2, L3 = rktv_terms(arrays, siren_cfg, data)
        return c1 * L1 + c2 * L2 + c3 * L3, L1, L2, L3

    start = init(siren_cfg, train_cfg.seed)
    params, history = optimize(start, objective, train_cfg, callback)
    return FitResult(params, history, denoise_output(params, siren_cfg, data))
