"""Candidate library, sequentially thresholded least squares, and model simulation."""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from .odesim import Trajectory, integrate, step_count


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, target: int, columns):
        self.target = target
        self.columns = tuple(int(c) for c in columns)
        super().__init__(f"rank-deficient library for target {target}, active columns {self.columns}")


@dataclass(frozen=True)
class LibrarySpec:
    """Monomials of total degree <= poly_degree, optionally sin/cos of each variable.

    Columns: constant, degree 1 in variable order, then each higher degree in
    graded-lexicographic order (x1^2, x1*x2, ..., x2^2, ...), then sin(x_j),
    then cos(x_j).
    """

    poly_degree: int = 2
    trig: bool = False

    def __post_init__(self):
        if self.poly_degree < 0:
            raise ValueError("poly_degree must be >= 0")

    def exponents(self, n: int) -> list[tuple[int, ...]]:
        out = []
        for d in range(self.poly_degree + 1):
            for combo in itertools.combinations_with_replacement(range(n), d):
                e = [0] * n
                for j in combo:
                    e[j] += 1
                out.append(tuple(e))
        return out

    def size(self, n: int) -> int:
        return comb(n + self.poly_degree, self.poly_degree) + (2 * n if self.trig else 0)

    def names(self, n: int) -> list[str]:
        names = []
        for e in self.exponents(n):
            parts = []
            for j, p in enumerate(e):
                if p == 1:
                    parts.append(f"x{j + 1}")
                elif p > 1:
                    parts.append(f"x{j + 1}^{p}")
            names.append("*".join(parts) or "1")
        if self.trig:
            names += [f"sin(x{j + 1})" for j in range(n)]
            names += [f"cos(x{j + 1})" for j in range(n)]
        return names

    def to_dict(self) -> dict:
        return {"poly_degree": self.poly_degree, "trig": self.trig}


def build_theta(X, spec: LibrarySpec) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    m, n = X.shape
    if n < 1:
        raise ValueError("need at least one state variable")
    cols = [np.prod(X ** np.array(e), axis=1) for e in spec.exponents(n)]
    if spec.trig:
        cols += [np.sin(X[:, j]) for j in range(n)]
        cols += [np.cos(X[:, j]) for j in range(n)]
    return np.column_stack(cols)


def _solve(theta, y, active, ridge, target):
    """Least squares on the active columns; returns (coef, full_rank).

    Rank-deficient systems get the minimum-norm solution so thresholding can
    still prune them (a conserved quantity makes the full library singular).
    """
    A = theta[:, active]
    if A.shape[0] < A.shape[1]:
        raise RankDeficientError(target, active)
    if ridge > 0:
        lhs = A.T @ A + ridge * np.eye(A.shape[1])
        return np.linalg.solve(lhs, A.T @ y), True
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    return coef, rank == A.shape[1]


def stlsq(theta, xdot, threshold: float = 0.05, max_sweeps: int = 10, ridge: float = 0.0,
          return_history: bool = False):
    """Sequentially thresholded least squares, column by column.

    Each target column: least squares on the active set, drop |coef| below
    ``threshold``, re-solve on the survivors; stop when the support no longer
    changes or after ``max_sweeps`` thresholding rounds.  A fully thresholded
    column comes back as zeros.  A final support whose columns are linearly
    dependent raises ``RankDeficientError``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    xdot = np.asarray(xdot, dtype=np.float64)
    if xdot.ndim == 1:
        xdot = xdot[:, None]
    k = theta.shape[1]
    xi = np.zeros((k, xdot.shape[1]))
    supports = []
    for i in range(xdot.shape[1]):
        y = xdot[:, i]
        active = np.arange(k)
        coef, full_rank = _solve(theta, y, active, ridge, i)
        history = [active]
        for _ in range(max_sweeps):
            keep = np.abs(coef) >= threshold
            if keep.all():
                break
            active = active[keep]
            history.append(active)
            if active.size == 0:
                coef, full_rank = np.zeros(0), True
                break
            coef, full_rank = _solve(theta, y, active, ridge, i)
        if not full_rank:
            raise RankDeficientError(i, active)
        xi[active, i] = coef
        supports.append(history)
    if return_history:
        return xi, supports
    return xi


@dataclass
class SindyModel:
    library: LibrarySpec
    xi: np.ndarray

    @property
    def dimension(self) -> int:
        return self.xi.shape[1]

    def rhs(self, x, t=0.0) -> np.ndarray:
        return (build_theta(np.asarray(x)[None, :], self.library) @ self.xi)[0]

    def equations(self, precision: int = 4) -> list[str]:
        names = self.library.names(self.dimension)
        out = []
        for i in range(self.dimension):
            terms = [f"{c:+.{precision}g}*{nm}" if nm != "1" else f"{c:+.{precision}g}"
                     for c, nm in zip(self.xi[:, i], names) if c != 0]
            out.append(f"dx{i + 1}/dt = " + (" ".join(terms) if terms else "0"))
        return out

    def xi_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.library.names(self.dimension))
        for row in self.xi.T:
            w.writerow([format(float(v), ".17g") for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, newline="")
        return text

    def to_json(self) -> str:
        return json.dumps({"library": self.library.to_dict(),
                           "xi": [[float(v) for v in row] for row in self.xi]}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SindyModel":
        doc = json.loads(text)
        return cls(LibrarySpec(**doc["library"]), np.array(doc["xi"], dtype=np.float64))


def identify(denoised: Trajectory, spec: LibrarySpec | None = None, threshold: float = 0.05,
             max_sweeps: int = 10, ridge: float = 0.0) -> SindyModel:
    if denoised.derivs is None:
        raise ValueError("identification needs derivative estimates")
    spec = spec or LibrarySpec()
    theta = build_theta(denoised.states, spec)
    return SindyModel(spec, stlsq(theta, denoised.derivs, threshold, max_sweeps, ridge))


def simulate_identified(model: SindyModel, x0, t_span, h: float) -> Trajectory:
    if not np.isfinite(model.xi).all():
        raise ValueError("model coefficients are not finite")
    steps = step_count(t_span, h)
    states = integrate(model.rhs, x0, t_span[0], h, steps)
    derivs = build_theta(states, model.library) @ model.xi
    return Trajectory(float(t_span[0]), float(h), states, derivs)


# analytic coefficients of the presets, per monomial exponent tuple

def true_coefficients(system, spec: LibrarySpec, scale: float = 1.0) -> np.ndarray:
    """Embed a preset's right-hand side into ``spec``'s columns.

    ``scale`` is the state rescale factor c: for y = c*x the degree-d monomial
    coefficient becomes coef * c**(1-d).
    """
    n = system.dimension
    p = system.params

    def e(*powers):
        return tuple(powers)

    if system.name == "LinearOsc":
        eqs = [{e(1, 0): p["a11"], e(0, 1): p["a12"]}, {e(1, 0): p["a21"], e(0, 1): p["a22"]}]
    elif system.name == "CubicOsc":
        eqs = [{e(0, 1): 1.0},
               {e(0, 1): -p["delta"], e(1, 0): -p["alpha"], e(3, 0): -p["beta"]}]
    elif system.name == "VanDerPol":
        eqs = [{e(0, 1): 1.0}, {e(0, 1): p["mu"], e(2, 1): -p["mu"], e(1, 0): -1.0}]
    elif system.name == "SEIR":
        b, s, g = p["beta"], p["sigma"], p["gamma"]
        eqs = [{e(1, 0, 1, 0): -b},
               {e(1, 0, 1, 0): b, e(0, 1, 0, 0): -s},
               {e(0, 1, 0, 0): s, e(0, 0, 1, 0): -g},
               {e(0, 0, 1, 0): g}]
    elif system.name == "Lorenz63":
        r, sg, bt = p["rho"], p["sigma"], p["beta"]
        eqs = [{e(1, 0, 0): -sg, e(0, 1, 0): sg},
               {e(1, 0, 0): r, e(1, 0, 1): -1.0, e(0, 1, 0): -1.0},
               {e(1, 1, 0): 1.0, e(0, 0, 1): -bt}]
    elif system.name == "Rossler":
        a, b, c = p["a"], p["b"], p["c"]
        eqs = [{e(0, 1, 0): -1.0, e(0, 0, 1): -1.0},
               {e(1, 0, 0): 1.0, e(0, 1, 0): a},
               {e(0, 0, 0): b, e(1, 0, 1): 1.0, e(0, 0, 1): -c}]
    else:
        raise KeyError(f"no analytic coefficients for {system.name!r}")
    index = {ex: j for j, ex in enumerate(spec.exponents(n))}
    xi = np.zeros((spec.size(n), n))
    for i, eq in enumerate(eqs):
        for ex, coef in eq.items():
            if ex not in index:
                raise ValueError(f"{system.name} needs monomial {ex}, outside degree {spec.poly_degree}")
            xi[index[ex], i] = coef * scale ** (1 - sum(ex))
    return xi
