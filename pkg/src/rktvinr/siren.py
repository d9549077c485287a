"""Sine-activated MLP mapping time to state, evaluated through jets."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import rng

CHECKPOINT_FORMAT = "rktvinr-siren"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class SirenConfig:
    out_dim: int
    t_domain: tuple[float, float]
    hidden_layers: int = 3
    width: int = 80
    omega0: float = 30.0

    def __post_init__(self):
        if self.hidden_layers < 1 or self.width < 1 or self.out_dim < 1:
            raise ValueError("hidden_layers, width and out_dim must be >= 1")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        t0, t1 = self.t_domain
        if not t1 > t0:
            raise ValueError("t_domain must satisfy t1 > t0")

    @property
    def shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) of every layer, input to output."""
        dims = [1] + [self.width] * self.hidden_layers + [self.out_dim]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    @property
    def scale(self) -> float:
        """d(u)/d(t) of the input normalization."""
        t0, t1 = self.t_domain
        return 2.0 / (t1 - t0)

    def normalize(self, t):
        t0, t1 = self.t_domain
        return 2.0 * (np.asarray(t, dtype=np.float64) - t0) / (t1 - t0) - 1.0


@dataclass
class SirenParams:
    """Per-layer ``W`` (fan_out, fan_in) and ``b`` (fan_out,), stored as ``[W0, b0, W1, b1, ...]``."""

    arrays: list[np.ndarray] = field(default_factory=list)

    @property
    def weights(self) -> list[np.ndarray]:
        return self.arrays[0::2]

    @property
    def biases(self) -> list[np.ndarray]:
        return self.arrays[1::2]

    def count(self) -> int:
        return sum(a.size for a in self.arrays)

    def copy(self) -> "SirenParams":
        return SirenParams([a.copy() for a in self.arrays])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays])

    def unflatten(self, vec) -> "SirenParams":
        out, pos = [], 0
        for a in self.arrays:
            out.append(np.asarray(vec[pos:pos + a.size], dtype=np.float64).reshape(a.shape))
            pos += a.size
        return SirenParams(out)

    def save(self, path: str | Path) -> None:
        """JSON checkpoint: format tag, version, layer shapes, row-major values."""
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "shapes": [list(a.shape) for a in self.arrays],
            "values": [[float(v) for v in a.ravel()] for a in self.arrays],
        }
        Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SirenParams":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != CHECKPOINT_FORMAT or doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: not a version {CHECKPOINT_VERSION} siren checkpoint")
        return cls([np.array(v, dtype=np.float64).reshape(s)
                    for s, v in zip(doc["shapes"], doc["values"])])


def init(config: SirenConfig, seed: int) -> SirenParams:
    """SIREN initialization.

    The first layer draws from U(-1/fan_in, 1/fan_in); every later layer from
    U(-c, c) with c = sqrt(6/fan_in)/omega0.  Biases share their layer's range.
    """
    shapes = config.shapes
    total = sum(o * i + o for o, i in shapes)
    u = rng.uniform01(seed, rng.STREAM_INIT, total)
    arrays, pos = [], 0
    for k, (fan_out, fan_in) in enumerate(shapes):
        bound = 1.0 / fan_in if k == 0 else np.sqrt(6.0 / fan_in) / config.omega0
        for shape in ((fan_out, fan_in), (fan_out,)):
            size = int(np.prod(shape))
            arrays.append((bound * (2.0 * u[pos:pos + size] - 1.0)).reshape(shape))
            pos += size
    return SirenParams(arrays)


def forward_jet(arrays, config: SirenConfig, t) -> ad.Jet2:
    """Network jet at raw times ``t`` (1-d).  ``arrays`` may be ndarrays or tape nodes.

    Returns components of shape (len(t), out_dim), already in raw-time units.
    """
    u = config.normalize(np.atleast_1d(t))[:, None]
    z = ad.Jet2(u, np.ones_like(u), np.zeros_like(u))
    n_layers = len(arrays) // 2
    for k in range(n_layers):
        W, b = arrays[2 * k], arrays[2 * k + 1]
        if k == 0:
            # d2 of the input is identically zero, skip the wasted product
            pre = ad.Jet2(ad.affine(z.v, W, b), ad.affine(z.d1, W), np.zeros((u.shape[0], _rows(W))))
        else:
            pre = ad.jet_affine(z, W, b)
        if k < n_layers - 1:
            z = ad.jet_sin(pre * config.omega0)
        else:
            z = pre
    s = config.scale
    return ad.Jet2(z.v, z.d1 * s, z.d2 * (s * s))


def _rows(W) -> int:
    return ad.value_of(W).shape[0]


def eval_jet(params: SirenParams, config: SirenConfig, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, first and second time derivative at ``t``; each shaped (len(t), out_dim)."""
    jet = forward_jet(params.arrays, config, t)
    v, d1, d2 = jet.values()
    if not (np.isfinite(v).all() and np.isfinite(d1).all() and np.isfinite(d2).all()):
        raise ad.NonFiniteError("non-finite network output")
    return v, d1, d2
