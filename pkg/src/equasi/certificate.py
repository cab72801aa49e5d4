"""Result types and tunables shared across the analysis modules."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Any

import numpy as np


class Status(str, Enum):
    CERTIFIED = "CERTIFIED"
    REFUTED = "REFUTED"
    INCONCLUSIVE = "INCONCLUSIVE"


def jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays, enums, tuples and infinities for JSON."""
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return obj


@dataclass
class Certificate:
    """Sampled evidence for (or against) an inequality-type property.

    ``margin`` is the smallest slack seen on generic samples (CERTIFIED);
    ``witness`` holds the violating sample (REFUTED).  Neither is a proof.
    """

    status: Status
    check: str
    margin: float | None = None
    witness: dict | None = None
    samples_used: int = 0
    seed: int = 0
    details: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status is Status.CERTIFIED

    @property
    def refuted(self) -> bool:
        return self.status is Status.REFUTED

    def to_dict(self) -> dict:
        return jsonable(
            {
                "check": self.check,
                "status": self.status,
                "margin": self.margin,
                "witness": self.witness,
                "samples_used": self.samples_used,
                "seed": self.seed,
                "details": self.details,
            }
        )


@dataclass
class SupEstimate:
    """Lower estimate of a supremum with the parameter attaining it."""

    value: float
    witness: Any = None
    diverged: bool = False
    trace: list[tuple[int, float]] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.diverged:
            self.value = math.inf

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


@dataclass(frozen=True)
class SupConfig:
    grid: int = 513
    t_min: float = 1e-6
    golden_iters: int = 40
    growth: float = 10.0
    growth_levels: int = 3
    cap: float = 1e9
    # edge probing: each level shrinks the distance to the edge by this factor
    edge_shrink: float = 1e-3
    edge_levels: int = 5


@dataclass(frozen=True)
class SampleConfig:
    pairs: int = 2048
    t_count: int = 513
    t_min: float = 1e-6
    seed: int = 0
    lattice: bool = True
    margin_tol: float = 1e-9
    violation_tol: float = 1e-9
    max_kink_fraction: float = 0.2
    # cube radius used when the sampling box has unbounded edges
    default_radius: float = 10.0


@dataclass(frozen=True)
class AsymptConfig:
    x_samples: int = 1024
    radius_factor: float = 10.0
    radius_growth: float = 4.0
    rounds: int = 3
    sensitivity: float = 0.01
    tol: float = 1e-6
    sphere_2d: int = 256
    sphere_nd: int = 1024
    sphere_refine: int = 64
    t_levels: int = 40


@dataclass(frozen=True)
class OracleConfig:
    radius: float = 50.0
    grid_1d: int = 100_001
    grid_2d: int = 512
    grid_nd: int = 65_536
    starts: int = 32
    cluster_radius: float = 1e-3
    value_tol: float = 1e-6
    shell_fraction: float = 0.05
    shell_tol: float = 1e-3


@dataclass(frozen=True)
class KKTConfig:
    points: int = 4096
    ray_levels: int = 24
    u_max: float = 10.0
    u_resolution: float = 1e-3
    tol: float = 1e-9


@dataclass(frozen=True)
class Config:
    """Every tunable of the toolkit; reports echo it verbatim."""

    seed: int = 0
    sup: SupConfig = field(default_factory=SupConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    asympt: AsymptConfig = field(default_factory=AsymptConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    kkt: KKTConfig = field(default_factory=KKTConfig)
    margin_tol: float = 1e-4

    def __post_init__(self):
        if self.sample.seed != self.seed:
            object.__setattr__(self, "sample", replace(self.sample, seed=self.seed))

    def to_dict(self) -> dict:
        return jsonable(asdict(self))

    @classmethod
    def from_dict(cls, data: dict | None) -> "Config":
        data = dict(data or {})
        sections = {
            "sup": SupConfig,
            "sample": SampleConfig,
            "asympt": AsymptConfig,
            "oracle": OracleConfig,
            "kkt": KKTConfig,
        }
        kwargs: dict[str, Any] = {}
        for name, klass in sections.items():
            sub = data.pop(name, None)
            if sub:
                known = {f.name for f in fields(klass)}
                unknown = set(sub) - known
                if unknown:
                    raise KeyError(f"unknown {name} option(s): {sorted(unknown)}")
                kwargs[name] = klass(**sub)
        for key in ("seed", "margin_tol"):
            if key in data:
                kwargs[key] = data.pop(key)
        if data:
            raise KeyError(f"unknown config option(s): {sorted(data)}")
        return cls(**kwargs)
