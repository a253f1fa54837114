"""Scenario configuration and its YAML representation."""
from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from pathlib import Path

import yaml

from dppnet.backlog import BACKLOG_KINDS
from dppnet.network import PENALTY_KINDS, ConfigurationError, PenaltySpec
from dppnet.power import ALLOCATOR_KINDS, AllocatorSpec
from dppnet.scheduling import SCHEDULER_KINDS, ControlSpec
from dppnet.sinkhorn import SinkhornConfig

# scalar field -> grid field swept by run_sweep
GRID_FIELDS = {
    "backlog": "backlog_grid",
    "scheduler": "scheduler_grid",
    "allocator": "allocator_grid",
    "lambda0": "lambda_grid",
    "V": "V_grid",
    "eta": "eta_grid",
    "sigma": "sigma_grid",
}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str = "default"
    # network
    n_min: int = 20
    n_max: int = 50
    commodity_fraction: float = 0.2
    radius: float = 0.3
    # channel
    noise: float = 0.01
    P_max: float = 1.0
    P0: float = 0.1
    kappa_max: float = 20.0
    fixed_capacity: float | None = None
    # traffic
    lambda0: float = 0.25
    # control
    backlog: str = "bp"
    sp_weight: float = 1.0
    B: float = 10.0
    sp_warm_start: bool = True
    allocator: str = "gradient"
    allocator_steps: int = 10
    allocator_step_size: float = 0.1
    penalty: str = "none"
    scheduler: str = "sinkhorn"
    eta: float = 1.0
    sinkhorn_iters: int = 500
    sinkhorn_tol: float = 1e-6
    V: float = 0.0
    # episode
    t_max: int = 100
    slope_window: int = 50
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    sigma: float = 0.0
    episode_budget: float = 60.0
    check_conservation: bool = True
    # sweep grids; None means "use the scalar value"
    backlog_grid: tuple[str, ...] | None = None
    scheduler_grid: tuple[str, ...] | None = None
    allocator_grid: tuple[str, ...] | None = None
    lambda_grid: tuple[float, ...] | None = None
    V_grid: tuple[float, ...] | None = None
    eta_grid: tuple[float, ...] | None = None
    sigma_grid: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in GRID_FIELDS.values():
            val = getattr(self, name)
            if val is not None:
                val = tuple(val)
                if not val:
                    raise ConfigurationError(f"{name} must not be empty")
                object.__setattr__(self, name, val)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigurationError("seeds must not be empty")
        if self.t_max < 1:
            raise ConfigurationError("t_max must be >= 1")
        for kind, allowed in ((self.backlog, BACKLOG_KINDS), (self.scheduler, SCHEDULER_KINDS),
                              (self.allocator, ALLOCATOR_KINDS), (self.penalty, PENALTY_KINDS)):
            if kind not in allowed:
                raise ConfigurationError(f"{kind!r} not one of {allowed}")
        if self.lambda0 < 0 or self.sigma < 0 or self.V < 0 or self.eta <= 0:
            raise ConfigurationError("lambda0, sigma, V must be >= 0 and eta > 0")

    def control(self) -> ControlSpec:
        return ControlSpec(
            scheduler=self.scheduler,
            allocator=AllocatorSpec(self.allocator, self.allocator_steps,
                                    self.allocator_step_size, self.V),
            penalty=PenaltySpec(self.penalty, self.P0),
            sinkhorn=SinkhornConfig(self.eta, self.sinkhorn_iters, self.sinkhorn_tol),
            P_max=self.P_max,
            kappa_max=self.kappa_max,
            fixed_capacity=self.fixed_capacity,
        )

    def cells(self) -> list["ScenarioConfig"]:
        """Cartesian product of all grids, one scalar config per cell."""
        names = list(GRID_FIELDS)
        axes = [getattr(self, GRID_FIELDS[k]) or (getattr(self, k),) for k in names]
        cleared = {g: None for g in GRID_FIELDS.values()}
        return [dataclasses.replace(self, **cleared, **dict(zip(names, combo)))
                for combo in itertools.product(*axes)]

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if isinstance(doc.get("seeds"), int):
            doc["seeds"] = tuple(range(doc["seeds"]))
        return cls(**doc)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    return ScenarioConfig.from_dict(doc)


def dump_config(config: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"5"`` means seeds 0..4; ``"3,7,11"`` is an explicit list."""
    if "," in text:
        return tuple(int(s) for s in text.split(",") if s.strip())
    return tuple(range(int(text)))
