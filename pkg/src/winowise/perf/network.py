"""Per-layer algorithm selection over a network and the Table-IV style layer grid."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum

from ..errors import ConfigurationError, InfeasibleMappingError, UnsupportedWorkloadError
from ..tensor import LayerShape
from .config import SystemConfig
from .sim import breakdown, im2col_layer_sim, layer_sim

GRID_CHANNELS = ((64, 64), (64, 128), (128, 128), (128, 192), (128, 256), (192, 384), (256, 256),
                 (256, 512), (512, 512))
GRID_RESOLUTIONS = (16, 32, 64, 128)
GRID_BATCHES = (1, 8)


class AlgoChoice(str, Enum):
    IM2COL = "im2col"
    WINO_F2 = "wino_f2"
    WINO_F4 = "wino_f4"


@dataclass
class LayerResult:
    index: int
    shape: LayerShape
    choice: AlgoChoice
    cycles: dict
    energy_pj: dict

    def as_dict(self):
        return {"index": self.index, "layer": self.shape.as_dict(), "choice": self.choice.value,
                "cycles": dict(self.cycles), "energy_pj": dict(self.energy_pj)}


@dataclass
class NetworkReport:
    layers: list = field(default_factory=list)

    @property
    def total_cycles(self):
        return sum(r.cycles[r.choice.value] for r in self.layers)

    @property
    def im2col_cycles(self):
        return sum(r.cycles["im2col"] for r in self.layers)

    @property
    def total_energy_pj(self):
        return sum(r.energy_pj[r.choice.value] for r in self.layers)

    @property
    def speedup(self):
        return self.im2col_cycles / self.total_cycles if self.layers else 1.0

    def as_dict(self):
        return {"total_cycles": self.total_cycles, "im2col_cycles": self.im2col_cycles,
                "speedup": self.speedup, "total_energy_pj": self.total_energy_pj,
                "layers": [r.as_dict() for r in self.layers]}

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        fields = ["index", "batch", "height", "width", "c_in", "c_out", "kernel", "stride", "choice",
                  "cycles_im2col", "cycles_wino_f2", "cycles_wino_f4", "speedup"]
        w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in self.layers:
            s = r.shape
            w.writerow({
                "index": r.index, "batch": s.batch, "height": s.height, "width": s.width,
                "c_in": s.c_in, "c_out": s.c_out, "kernel": s.kernel, "stride": s.stride,
                "choice": r.choice.value,
                **{f"cycles_{a}": r.cycles.get(a, "") for a in ("im2col", "wino_f2", "wino_f4")},
                "speedup": r.cycles["im2col"] / r.cycles[r.choice.value],
            })
        return buf.getvalue()


def network_sim(layers, cfg=None):
    """Pick the fastest eligible algorithm for every layer.

    ``layers`` is a list of ``LayerShape`` or ``(LayerShape, algos)`` pairs;
    Winograd is only considered for 3x3 stride-1 layers and when the
    mapping fits on chip.
    """
    cfg = SystemConfig() if cfg is None else cfg
    report = NetworkReport()
    for i, item in enumerate(layers):
        shape, algos = (item, tuple(a.value for a in AlgoChoice)) if isinstance(item, LayerShape) else item
        algos = [AlgoChoice(a).value for a in algos]
        cycles, energy = {}, {}
        base = im2col_layer_sim(shape, cfg)
        cycles["im2col"], energy["im2col"] = base.total_cycles, base.energy_pj
        for algo in algos:
            if algo == "im2col" or not shape.winograd_eligible:
                continue
            try:
                rep = layer_sim(shape, algo, cfg)
            except (InfeasibleMappingError, UnsupportedWorkloadError):
                continue
            cycles[algo], energy[algo] = rep.total_cycles, rep.energy_pj
        allowed = [a for a in cycles if a in algos]
        if not allowed:
            raise ConfigurationError(f"layer {i}: no eligible algorithm among {algos}")
        best = min(allowed, key=lambda a: (cycles[a], a))
        report.layers.append(LayerResult(i, shape, AlgoChoice(best), cycles, energy))
    return report


def layers_from_json(data):
    """Parse ``{"layers": [{...LayerShape fields..., "algos": [...]}, ...]}``."""
    if isinstance(data, dict):
        data = data.get("layers")
    if not isinstance(data, list):
        raise ConfigurationError("layer list must be a JSON list or an object with a 'layers' list")
    out = []
    for i, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise ConfigurationError(f"layer {i} is not an object")
        entry = dict(entry)
        algos = entry.pop("algos", [a.value for a in AlgoChoice])
        try:
            shape = LayerShape(**entry)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"layer {i}: {exc}") from exc
        out.append((shape, tuple(algos)))
    return out


def grid_shapes(batches=GRID_BATCHES, resolutions=GRID_RESOLUTIONS, channels=GRID_CHANNELS):
    return [LayerShape(b, h, h, ci, co) for b in batches for h in resolutions for ci, co in channels]


def grid_table(m=4, cfg=None, shapes=None):
    """Rows of ``{batch, height, width, c_in, c_out, speedup, breakdown...}``."""
    cfg = SystemConfig() if cfg is None else cfg
    rows = []
    for s in grid_shapes() if shapes is None else shapes:
        base = im2col_layer_sim(s, cfg)
        wino = layer_sim(s, f"wino_f{m}", cfg)
        row = {"batch": s.batch, "height": s.height, "width": s.width, "c_in": s.c_in, "c_out": s.c_out,
               "im2col_cycles": base.total_cycles, "wino_cycles": wino.total_cycles,
               "speedup": base.total_cycles / wino.total_cycles, "bottleneck": wino.bottleneck}
        row.update({f"pct_{k}": v for k, v in breakdown(wino).items()})
        rows.append(row)
    return rows


def rows_to_csv(rows):
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()
