"""System configuration of the dual-core accelerator model."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

from ..errors import ConfigurationError

KB = 1024

# per-byte access energies [pJ/B]
DEFAULT_MEMORY_ENERGY = {
    "L0A_rd": 0.22, "L0A_wr": 0.24,
    "L0B_rd": 0.22, "L0B_wr": 0.24,
    "L0C_rd": 0.23, "L0C_wr": 0.29,
    "L0C_portB_rd_im2col": 0.31, "L0C_portB_rd_wino": 0.69,
    "L1_rd": 0.92, "L1_wr": 0.68,
    "GM_rd": 0.0, "GM_wr": 0.0,
}

# unit peak powers [mW]
DEFAULT_UNIT_POWER = {
    "cube_im2col": 1521.0, "cube_wino": 1923.0,
    "mte1_im2col": 30.0, "in_xform": 145.0, "wt_xform": 228.0,
    "out_xform": 114.0, "vector": 0.0, "mte2": 0.0, "mte3": 0.0,
}

DEFAULT_MEMORY_SIZE = {"L0A": 64 * KB, "L0B": 64 * KB, "L0C": 288 * KB, "L1": 1248 * KB}


@dataclass(frozen=True)
class SystemConfig:
    """Hardware and model parameters.

    ``gm_bandwidth`` is in bytes per core clock cycle and may be ``inf``.
    ``weight_engine_bandwidth`` is the GM rate the tap-by-tap weight engine
    was sized for; it stays fixed when ``gm_bandwidth`` is varied.
    """

    num_cores: int = 2
    cube_m: int = 16
    cube_k: int = 32
    cube_n: int = 16
    gm_bandwidth: float = 81.2
    gm_latency: float = 150.0
    gm_jitter_std: float = math.sqrt(5.0)
    seed: int = 0
    clock_mhz: float = 500.0
    broadcast: bool = True
    weight_engine_bandwidth: float = 81.2
    vector_elems_per_cycle: int = 128
    l1_ifm_tile_width: int = 32
    memory_size: dict = field(default_factory=lambda: dict(DEFAULT_MEMORY_SIZE))
    memory_energy: dict = field(default_factory=lambda: dict(DEFAULT_MEMORY_ENERGY))
    unit_power: dict = field(default_factory=lambda: dict(DEFAULT_UNIT_POWER))

    def __post_init__(self):
        if self.num_cores < 1:
            raise ConfigurationError("num_cores must be >= 1")
        if min(self.cube_m, self.cube_k, self.cube_n) < 1:
            raise ConfigurationError("cube dimensions must be >= 1")
        if not self.gm_bandwidth > 0:
            raise ConfigurationError("gm_bandwidth must be > 0")
        if not self.weight_engine_bandwidth > 0:
            raise ConfigurationError("weight_engine_bandwidth must be > 0")
        if self.gm_latency < 0 or self.gm_jitter_std < 0:
            raise ConfigurationError("latency and jitter must be >= 0")
        if self.clock_mhz <= 0:
            raise ConfigurationError("clock_mhz must be > 0")
        for name, base in (("memory_size", DEFAULT_MEMORY_SIZE), ("memory_energy", DEFAULT_MEMORY_ENERGY),
                           ("unit_power", DEFAULT_UNIT_POWER)):
            given = getattr(self, name)
            unknown = set(given) - set(base)
            if unknown:
                raise ConfigurationError(f"unknown {name} keys: {sorted(unknown)}")
            merged = {**base, **given}
            if any(v < 0 for v in merged.values()) or (name == "memory_size" and any(v <= 0 for v in merged.values())):
                raise ConfigurationError(f"{name} values must be positive")
            object.__setattr__(self, name, merged)

    @property
    def cube_macs_per_cycle(self):
        return self.cube_m * self.cube_k * self.cube_n

    @property
    def ns_per_cycle(self):
        return 1e3 / self.clock_mhz

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def as_dict(self):
        out = dataclasses.asdict(self)
        if math.isinf(out["gm_bandwidth"]):
            out["gm_bandwidth"] = "inf"
        return out

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("system config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("gm_bandwidth") == "inf":
            data["gm_bandwidth"] = math.inf
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)
