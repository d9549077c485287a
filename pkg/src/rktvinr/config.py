"""Experiment configuration: nested dataclasses, strict YAML round-trip.

Every field has a default.  ``None`` in a system-dependent field means "take
the value from ``SYSTEM_DEFAULTS``" for the chosen preset; resolution happens
in :func:`resolve`, and the resolved config is what gets written next to the
results.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .odesim import PRESETS


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    t0: Optional[float] = None
    t1: Optional[float] = None
    h: Optional[float] = None


@dataclass
class NoiseConfig:
    relative_level: float = 1e-2
    distribution: str = "Gaussian"


@dataclass
class SirenSection:
    hidden_layers: int = 3
    width: int = 80
    omega0: Optional[float] = None


@dataclass
class TrainSection:
    c1: float = 1.0
    c2: float = 1.0
    c3: Optional[float] = None
    # c3 is the weight at this noise level and scales linearly with sigma2;
    # None keeps c3 fixed
    c3_ref_sigma2: Optional[float] = 1e-2
    lr: float = 5e-4
    iters: int = 3000


@dataclass
class StdInrSection:
    weight_decay: float = 1e-5


@dataclass
class SavgolSection:
    window: int = 11
    degree: int = 3


@dataclass
class TvrSection:
    alpha: Optional[float] = None
    iterations: int = 100
    eps: float = 1e-8


@dataclass
class SplineSection:
    lam: Optional[float] = None


@dataclass
class LibrarySection:
    poly_degree: Optional[int] = None
    trig: bool = False
    threshold: float = 0.05
    max_sweeps: int = 10
    ridge: float = 0.0


@dataclass
class ExperimentConfig:
    system: str = "LinearOsc"
    overrides: dict = field(default_factory=dict)
    x0: Optional[list] = None
    grid: GridConfig = field(default_factory=GridConfig)
    rescale: Optional[float] = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    method: str = "RKTV"
    siren: SirenSection = field(default_factory=SirenSection)
    train: TrainSection = field(default_factory=TrainSection)
    std_inr: StdInrSection = field(default_factory=StdInrSection)
    savgol: SavgolSection = field(default_factory=SavgolSection)
    tvr: TvrSection = field(default_factory=TvrSection)
    spline: SplineSection = field(default_factory=SplineSection)
    library: LibrarySection = field(default_factory=LibrarySection)
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output_dir: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_yaml())

    @classmethod
    def from_dict(cls, doc: dict | None) -> "ExperimentConfig":
        return _build(cls, doc or {}, "")

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        doc = yaml.safe_load(Path(path).read_text())
        if doc is not None and not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(doc)


def _build(cls, doc: dict, prefix: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")
    kwargs: dict[str, Any] = {}
    for name, value in doc.items():
        ftype = fields[name].type
        sub = _SECTIONS.get(ftype if isinstance(ftype, str) else getattr(ftype, "__name__", ""))
        kwargs[name] = _build(sub, value or {}, f"{prefix}{name}.") if sub else value
    return cls(**kwargs)


_SECTIONS = {c.__name__: c for c in (GridConfig, NoiseConfig, SirenSection, TrainSection,
                                       StdInrSection, SavgolSection, TvrSection, SplineSection,
                                       LibrarySection)}

# Per-system settings, picked on pilot seed 100, which is outside the default
# seed list.  c3 is the smoothing weight at sigma2 = 1e-2.
SYSTEM_DEFAULTS: dict[str, dict[str, Any]] = {
    "LinearOsc": {"rescale": 1.0, "poly_degree": 2, "omega0": 2.0, "c3": 1e-2},
    "CubicOsc": {"rescale": 1.0, "poly_degree": 3, "omega0": 2.0, "c3": 1e-2},
    "VanDerPol": {"rescale": 1.0, "poly_degree": 3, "omega0": 2.0, "c3": 1e-2},
    "SEIR": {"rescale": 1.0, "poly_degree": 2, "omega0": 2.0, "c3": 1e-2},
    "Lorenz63": {"rescale": 0.1, "poly_degree": 2, "omega0": 3.0, "c3": 1e-6},
    "Rossler": {"rescale": 1.0, "poly_degree": 2, "omega0": 2.0, "c3": 1e-4},
}


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill every ``None`` with the system default and validate enums."""
    from .baselines import METHODS
    from .noise import DISTRIBUTIONS

    if cfg.system not in PRESETS:
        raise ConfigError(f"unknown system {cfg.system!r}")
    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}; choose from {', '.join(METHODS)}")
    if cfg.noise.distribution not in DISTRIBUTIONS:
        raise ConfigError(f"unknown distribution {cfg.noise.distribution!r}")
    out = ExperimentConfig.from_dict(cfg.to_dict())
    dflt = SYSTEM_DEFAULTS[cfg.system]
    _, _, _, x0, t_span, h = PRESETS[cfg.system]
    if out.x0 is None:
        out.x0 = list(x0)
    if out.grid.t0 is None:
        out.grid.t0 = float(t_span[0])
    if out.grid.t1 is None:
        out.grid.t1 = float(t_span[1])
    if out.grid.h is None:
        out.grid.h = float(h)
    if out.rescale is None:
        out.rescale = dflt["rescale"]
    if out.library.poly_degree is None:
        out.library.poly_degree = dflt["poly_degree"]
    if out.siren.omega0 is None:
        out.siren.omega0 = dflt["omega0"]
    if out.train.c3 is None:
        out.train.c3 = dflt["c3"]
    out.seeds = [int(s) for s in out.seeds]
    return out


def effective_c3(cfg: ExperimentConfig) -> float:
    """TV weight actually used for the configured noise level."""
    ref = cfg.train.c3_ref_sigma2
    level = cfg.noise.relative_level
    if ref is None or level <= 0:
        return cfg.train.c3
    return cfg.train.c3 * (level / ref)


def with_updates(cfg: ExperimentConfig, updates: dict) -> ExperimentConfig:
    """Apply dotted-key updates, e.g. ``{"noise.relative_level": 0.1}``."""
    doc = cfg.to_dict()
    for key, value in updates.items():
        node = doc
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise ConfigError(f"unknown config key {key!r}")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(doc)
