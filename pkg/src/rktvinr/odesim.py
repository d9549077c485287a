"""Benchmark ODE systems and a fixed-step RK4 simulator."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

DIVERGENCE_LIMIT = 1e12


class IntegrationError(ArithmeticError):
    """A stage evaluation produced a non-finite value or the state blew up."""

    def __init__(self, message: str, t: float | None = None, stage: int | None = None):
        super().__init__(message)
        self.t = t
        self.stage = stage


@dataclass(frozen=True)
class OdeSystem:
    name: str
    dimension: int
    params: Mapping[str, float]
    rhs: Callable[[np.ndarray, float], np.ndarray] = field(repr=False, compare=False)
    x0: tuple[float, ...] = ()
    t_span: tuple[float, float] = (0.0, 10.0)
    h: float = 0.1

    def __call__(self, x, t=0.0) -> np.ndarray:
        return self.rhs(np.asarray(x, dtype=np.float64), t)


@dataclass(frozen=True)
class Trajectory:
    """Samples on the uniform grid ``t_i = t0 + i*h``, ``i = 0..m-1``."""

    t0: float
    h: float
    states: np.ndarray
    derivs: np.ndarray | None = None

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
        object.__setattr__(self, "states", states)
        if not self.h > 0:
            raise ValueError("step h must be positive")
        if states.shape[0] < 2:
            raise ValueError("a trajectory needs at least two samples")
        if self.derivs is not None:
            d = np.asarray(self.derivs, dtype=np.float64)
            if d.shape != states.shape:
                raise ValueError("derivs must have the same shape as states")
            object.__setattr__(self, "derivs", d)

    @property
    def m(self) -> int:
        return self.states.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.m) * self.h

    @property
    def t1(self) -> float:
        return self.t0 + (self.m - 1) * self.h

    def with_states(self, states, derivs=None) -> "Trajectory":
        return Trajectory(self.t0, self.h, states, derivs)

    # CSV ---------------------------------------------------------------

    def to_csv(self, path: str | Path | None = None) -> str:
        """Write ``t,x1..xn[,dx1..dxn]`` with 17 significant digits, LF endings."""
        header = ["t"] + [f"x{j + 1}" for j in range(self.n)]
        cols = [self.times[:, None], self.states]
        if self.derivs is not None:
            header += [f"dx{j + 1}" for j in range(self.n)]
            cols.append(self.derivs)
        data = np.hstack(cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=np.float64)
        if header[0] != "t":
            raise ValueError("trajectory CSV must start with a 't' column")
        nx = sum(1 for c in header if c.startswith("x"))
        nd = sum(1 for c in header if c.startswith("dx"))
        t = body[:, 0]
        h = (t[-1] - t[0]) / (len(t) - 1)
        derivs = body[:, 1 + nx:1 + nx + nd] if nd else None
        return cls(float(t[0]), float(h), body[:, 1:1 + nx], derivs)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# presets


def _linear(p):
    A = np.array([[p["a11"], p["a12"]], [p["a21"], p["a22"]]])
    return lambda x, t: A @ x


def _cubic(p):
    d, a, b = p["delta"], p["alpha"], p["beta"]
    return lambda x, t: np.array([x[1], -d * x[1] - a * x[0] - b * x[0] ** 3])


def _vanderpol(p):
    mu = p["mu"]
    return lambda x, t: np.array([x[1], mu * (1.0 - x[0] ** 2) * x[1] - x[0]])


def _seir(p):
    b, s, g = p["beta"], p["sigma"], p["gamma"]

    def f(x, t):
        S, E, I, _ = x
        return np.array([-b * S * I, b * S * I - s * E, s * E - g * I, g * I])

    return f


def _lorenz(p):
    rho, sig, beta = p["rho"], p["sigma"], p["beta"]
    return lambda x, t: np.array(
        [sig * (x[1] - x[0]), x[0] * (rho - x[2]) - x[1], x[0] * x[1] - beta * x[2]]
    )


def _rossler(p):
    a, b, c = p["a"], p["b"], p["c"]
    return lambda x, t: np.array([-x[1] - x[2], x[0] + a * x[1], b + x[2] * (x[0] - c)])


# name -> (dimension, default params, rhs factory, x0, t_span, h)
PRESETS: dict[str, tuple] = {
    "LinearOsc": (2, {"a11": -0.1, "a12": 3.0, "a21": -3.0, "a22": -0.1}, _linear,
                  (-2.0, 2.0), (0.0, 10.0), 0.1),
    "CubicOsc": (2, {"delta": 0.1, "alpha": -1.0, "beta": 1.0}, _cubic,
                 (0.5, 0.0), (0.0, 20.0), 0.05),
    "VanDerPol": (2, {"mu": 0.5}, _vanderpol, (-2.0, 2.0), (0.0, 10.0), 0.05),
    "SEIR": (4, {"beta": 0.3, "sigma": 0.2, "gamma": 0.1}, _seir,
             (0.999, 0.001, 0.0, 0.0), (0.0, 160.0), 1.0),
    "Lorenz63": (3, {"rho": 28.0, "sigma": 10.0, "beta": 8.0 / 3.0}, _lorenz,
                 (-8.0, 7.0, 27.0), (0.0, 10.0), 0.05),
    "Rossler": (3, {"a": 0.2, "b": 0.2, "c": 5.7}, _rossler,
                (-7.5, 2.5, 0.0), (0.0, 20.0), 0.05),
}

SYSTEM_NAMES = tuple(PRESETS)


def make_system(name: str, overrides: Mapping[str, float] | None = None) -> OdeSystem:
    if name not in PRESETS:
        raise KeyError(f"unknown system {name!r}; choose from {', '.join(PRESETS)}")
    dim, defaults, factory, x0, t_span, h = PRESETS[name]
    params = dict(defaults)
    for key, val in (overrides or {}).items():
        if key not in params:
            raise KeyError(f"{name} has no parameter {key!r}")
        params[key] = float(val)
    return OdeSystem(name, dim, params, factory(params), x0, t_span, h)


def rk4_step(rhs, x, t: float, h: float) -> np.ndarray:
    """One classical RK4 step for ``x' = rhs(x, t)``."""
    x = np.asarray(x, dtype=np.float64)
    k1 = _stage(rhs, x, t, 1)
    k2 = _stage(rhs, x + 0.5 * h * k1, t + 0.5 * h, 2)
    k3 = _stage(rhs, x + 0.5 * h * k2, t + 0.5 * h, 3)
    k4 = _stage(rhs, x + h * k3, t + h, 4)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _stage(rhs, x, t, idx):
    k = np.asarray(rhs(x, t), dtype=np.float64)
    if not np.all(np.isfinite(k)):
        raise IntegrationError(f"non-finite RK4 stage {idx} at t={t}", t=t, stage=idx)
    return k


def step_count(t_span, h: float) -> int:
    t0, t1 = t_span
    if not h > 0:
        raise ValueError("step h must be positive")
    steps = (t1 - t0) / h
    nearest = round(steps)
    if nearest < 1 or abs(steps - nearest) > 0.5 * math.ulp(max(abs(steps), 1.0)) * 4:
        raise ValueError(f"(t1 - t0)/h = {steps!r} is not an integer step count")
    return int(nearest)


def integrate(rhs, x0, t0: float, h: float, steps: int) -> np.ndarray:
    x = np.asarray(x0, dtype=np.float64)
    out = np.empty((steps + 1, x.size))
    out[0] = x
    for i in range(steps):
        t = t0 + i * h
        x = rk4_step(rhs, x, t, h)
        if np.max(np.abs(x)) > DIVERGENCE_LIMIT:
            raise IntegrationError(f"trajectory diverged at t={t + h}", t=t + h)
        out[i + 1] = x
    return out


def simulate(system: OdeSystem, x0=None, t_span=None, h: float | None = None) -> Trajectory:
    """Integrate a preset from ``x0`` over ``t_span``; defaults are the preset's own."""
    x0 = np.asarray(system.x0 if x0 is None else x0, dtype=np.float64)
    t_span = tuple(system.t_span if t_span is None else t_span)
    h = system.h if h is None else float(h)
    if x0.size != system.dimension:
        raise ValueError(f"x0 has length {x0.size}, system needs {system.dimension}")
    steps = step_count(t_span, h)
    states = integrate(system.rhs, x0, t_span[0], h, steps)
    t = t_span[0] + np.arange(steps + 1) * h
    derivs = np.array([system.rhs(x, ti) for x, ti in zip(states, t)])
    return Trajectory(float(t_span[0]), h, states, derivs)


def rescale(traj: Trajectory, factor: float) -> Trajectory:
    if factor == 0:
        raise ValueError("rescale factor must be non-zero")
    if factor == 1:
        return traj
    derivs = None if traj.derivs is None else traj.derivs * factor
    return replace(traj, states=traj.states * factor, derivs=derivs)
