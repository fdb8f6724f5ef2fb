"""Layer-level throughput model of the Winograd and im2col operators.

Both operators are modeled as a sequence of output-channel passes. The
Winograd pass is weight-stationary: spatial weights stream from GM through
the tap-by-tap engine into L1, then input tiles stream through the input
engine, the Cube and the output engine while being prefetched over the
shared GM channel. The im2col baseline is compute- or GM-bound.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InfeasibleMappingError, ShapeError, UnsupportedParameterError, UnsupportedWorkloadError
from ..tensor import LayerShape
from ..transforms import make_transform_set
from .config import SystemConfig
from .engines import default_engines, xform_cycles

UNITS = ("MTE2", "MTE1_xform", "MTE1_in", "MTE1_wt", "Cube", "OutXform", "Vector", "MTE3")
MEMORIES = ("GM_rd", "GM_wr", "L1_rd", "L1_wr", "L0A_rd", "L0A_wr", "L0B_rd", "L0B_wr",
            "L0C_rd", "L0C_wr", "L0C_portB_rd")
STREAMS = ("gm_weight_rd", "gm_ifm_rd", "gm_ofm_wr", "l1_weight_wr", "l1_ifm_wr",
           "l0a_ifm_wr", "ifm_tile_volume")
CATEGORIES = ("wt_transfer_xform", "ifm_transfer", "input_xform", "cube", "output_xform_vector", "ofm_write")
ALGOS = ("im2col", "wino_f2", "wino_f4")


def _ceil(a, b):
    return -(-a // b)


def _floor_to(a, b):
    return (a // b) * b


@dataclass
class SimReport:
    """Cycle, traffic and energy summary of one simulated layer.

    ``busy`` holds per-core busy cycles; GM-side units (``MTE2``,
    ``MTE3``) are shared by all cores. ``bytes`` sums all cores.
    ``critical`` attributes every cycle of ``total_cycles`` to one
    :data:`CATEGORIES` entry.
    """

    algo: str
    layer: dict
    total_cycles: float = 0.0
    busy: dict = field(default_factory=lambda: dict.fromkeys(UNITS, 0.0))
    bytes: dict = field(default_factory=lambda: dict.fromkeys(MEMORIES, 0))
    streams: dict = field(default_factory=lambda: dict.fromkeys(STREAMS, 0))
    critical: dict = field(default_factory=lambda: dict.fromkeys(CATEGORIES, 0.0))
    macs: int = 0
    num_cores: int = 2
    passes: int = 0
    cout_core: int = 0
    energy_pj: float = 0.0

    @property
    def macs_per_cycle(self):
        return self.macs / self.total_cycles if self.total_cycles > 0 else 0.0

    @property
    def bottleneck(self):
        if self.total_cycles <= 0:
            return "none"
        owner = {
            "wt_transfer_xform": "MTE1_wt", "ifm_transfer": "MTE2", "input_xform": "MTE1_in",
            "cube": "Cube", "output_xform_vector": "OutXform", "ofm_write": "MTE3",
        }
        return owner[max(CATEGORIES, key=lambda c: self.critical[c])]

    def as_dict(self):
        return {
            "algo": self.algo,
            "layer": dict(self.layer),
            "total_cycles": self.total_cycles,
            "busy": dict(self.busy),
            "bytes": dict(self.bytes),
            "streams": dict(self.streams),
            "critical": dict(self.critical),
            "bottleneck": self.bottleneck,
            "macs": self.macs,
            "macs_per_cycle": self.macs_per_cycle,
            "num_cores": self.num_cores,
            "passes": self.passes,
            "cout_core": self.cout_core,
            "energy_pj": self.energy_pj,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def flat(self):
        row = {"algo": self.algo, **{f"layer_{k}": v for k, v in self.layer.items()},
               "total_cycles": self.total_cycles, "bottleneck": self.bottleneck,
               "macs": self.macs, "macs_per_cycle": self.macs_per_cycle,
               "passes": self.passes, "cout_core": self.cout_core, "energy_pj": self.energy_pj}
        row.update({f"busy_{k}": v for k, v in self.busy.items()})
        row.update({f"bytes_{k}": v for k, v in self.bytes.items()})
        return row

    def to_csv(self):
        buf = io.StringIO()
        row = self.flat()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)
        return buf.getvalue()


def breakdown(report):
    """Critical-path share of every category in percent; sums to 100."""
    total = sum(report.critical.values())
    if total <= 0:
        return dict.fromkeys(CATEGORIES, 0.0)
    return {c: 100.0 * report.critical[c] / total for c in CATEGORIES}


class _Latency:
    """Seeded GM latency draws: fixed mean plus zero-mean Gaussian jitter."""

    def __init__(self, cfg):
        self.mean = cfg.gm_latency
        self.std = cfg.gm_jitter_std
        self.rng = np.random.default_rng(cfg.seed)

    def draw(self):
        if self.std == 0:
            return self.mean
        return max(0.0, self.mean + float(self.rng.normal(0.0, self.std)))


def _check_shape(shape):
    if not isinstance(shape, LayerShape):
        raise ShapeError("expected a LayerShape")


def wino_cout_per_core(shape, m, cfg):
    """Output channels per core and pass that fit L0C and L1, multiple of the Cube N."""
    t = m + 2
    taps = t * t
    n = cfg.cube_n
    l0c = _floor_to(cfg.memory_size["L0C"] // (cfg.cube_m * taps * 4 * 2), n)
    if l0c < n:
        raise InfeasibleMappingError("L0C", f"cannot double-buffer {n} output channels of {taps} taps")
    l0a_need = cfg.cube_m * taps * cfg.cube_k * 2
    if l0a_need > cfg.memory_size["L0A"]:
        raise InfeasibleMappingError("L0A", f"needs {l0a_need} B for double-buffered input taps")
    co = min(_ceil(_ceil(shape.c_out, cfg.num_cores), n) * n, l0c)
    w_pad = _ceil(shape.width, m) * m
    ifm_tile = 2 * t * (min(w_pad, cfg.l1_ifm_tile_width) + 2) * _ceil(shape.c_in, cfg.cube_k) * cfg.cube_k
    while co >= n:
        if taps * shape.c_in * co + ifm_tile <= cfg.memory_size["L1"]:
            return co
        co -= n
    raise InfeasibleMappingError(
        "L1", f"transformed weights for {n} output channels and C_in={shape.c_in} do not fit"
    )


def wino_layer_sim(shape, m=4, cfg=None):
    """Simulate one 3x3 stride-1 layer on the Winograd operator ``F(m x m, 3 x 3)``."""
    cfg = SystemConfig() if cfg is None else cfg
    _check_shape(shape)
    if not shape.winograd_eligible:
        raise UnsupportedWorkloadError(f"Winograd needs k=3, stride=1; got k={shape.kernel}, stride={shape.stride}")
    if m not in (2, 4):
        raise UnsupportedParameterError(f"tile size m={m} not supported")
    ts = make_transform_set(m)
    t, taps = ts.t, ts.taps
    eng = default_engines(m, cfg)
    cores = cfg.num_cores
    bw = cfg.gm_bandwidth
    b, cin, cout = shape.batch, shape.c_in, shape.c_out
    th, tw = _ceil(shape.height, m), _ceil(shape.width, m)
    tiles = b * th * tw
    l0_tiles = _ceil(tiles, cfg.cube_m)
    co_core = wino_cout_per_core(shape, m, cfg)
    passes = _ceil(cout, cores * co_core)
    ifm_pass = b * (th * m + 2) * (tw * m + 2) * cin
    gm_ifm_pass = ifm_pass if cfg.broadcast else ifm_pass * cores
    l1_tiles = b * th * _ceil(tw * m, cfg.l1_ifm_tile_width)
    lat = _Latency(cfg)
    rep = SimReport(algo=f"wino_f{m}", layer=shape.as_dict(), macs=shape.macs, num_cores=cores,
                    passes=passes, cout_core=co_core)
    remaining = cout
    for _ in range(passes):
        cout_pass = min(remaining, cores * co_core)
        remaining -= cout_pass
        co = _ceil(cout_pass, cores)
        w_bytes = 9 * cin * cout_pass
        ofm = b * shape.height * shape.width * cout_pass
        # per-core unit cycles
        wt_x = xform_cycles(eng["weight"], cin * co)
        in_x = xform_cycles(eng["input"], tiles * cin)
        cube = l0_tiles * _ceil(cin, cfg.cube_k) * _ceil(co, cfg.cube_n) * taps
        out_x = xform_cycles(eng["output"], tiles * co)
        vec = tiles * m * m * co / cfg.vector_elems_per_cycle
        core = max(in_x, cube, out_x, vec)
        w_gm = w_bytes / bw
        wt_phase = max(w_gm, wt_x)
        gm = (w_bytes + gm_ifm_pass + ofm) / bw
        latency = lat.draw()
        drain = max(out_x, vec) / l0_tiles
        body = max(gm, wt_phase + core)
        rep.total_cycles += latency + body + drain
        # critical-path attribution
        crit = rep.critical
        crit["wt_transfer_xform"] += latency
        crit["output_xform_vector"] += drain
        if gm >= wt_phase + core:
            total_bytes = w_bytes + gm_ifm_pass + ofm
            crit["wt_transfer_xform"] += gm * w_bytes / total_bytes
            crit["ifm_transfer"] += gm * gm_ifm_pass / total_bytes
            crit["ofm_write"] += gm * ofm / total_bytes
        else:
            crit["wt_transfer_xform"] += wt_phase
            unit = max((in_x, "input_xform"), (cube, "cube"), (max(out_x, vec), "output_xform_vector"))[1]
            crit[unit] += core
        busy = rep.busy
        busy["MTE2"] += latency + (w_bytes + gm_ifm_pass) / bw
        busy["MTE3"] += ofm / bw
        busy["MTE1_in"] += in_x
        busy["MTE1_wt"] += wt_x
        busy["MTE1_xform"] += in_x + wt_x
        busy["Cube"] += cube
        busy["OutXform"] += out_x
        busy["Vector"] += vec
        # traffic, summed over cores
        wt_l1 = taps * cin * cout_pass
        by = rep.bytes
        by["GM_rd"] += w_bytes + gm_ifm_pass
        by["GM_wr"] += ofm
        by["L0B_wr"] += w_bytes + taps * cin * co * l1_tiles * cores
        by["L0B_rd"] += w_bytes + taps * cin * co * l0_tiles * cores
        by["L1_wr"] += wt_l1 + ifm_pass * cores
        by["L1_rd"] += tiles * t * t * cin * cores + taps * cin * co * l1_tiles * cores
        by["L0A_wr"] += tiles * taps * cin * cores
        by["L0A_rd"] += tiles * taps * cin * _ceil(co, cfg.cube_n) * cores
        kb = _ceil(cin, cfg.cube_k)
        by["L0C_wr"] += 4 * tiles * taps * co * kb * cores
        by["L0C_rd"] += 4 * tiles * taps * co * (kb - 1) * cores
        by["L0C_portB_rd"] += 4 * tiles * taps * co * cores
        st = rep.streams
        st["gm_weight_rd"] += w_bytes
        st["gm_ifm_rd"] += gm_ifm_pass
        st["gm_ofm_wr"] += ofm
        st["l1_weight_wr"] += wt_l1
        st["l1_ifm_wr"] += ifm_pass * cores
        st["l0a_ifm_wr"] += tiles * taps * cin * cores
        st["ifm_tile_volume"] += tiles * m * m * cin * cores
    from .energy import energy_estimate

    rep.energy_pj = energy_estimate(rep, cfg)
    return rep


def im2col_cout_block(shape, cfg):
    """Output channels per core whose weights fit half of L1."""
    n = cfg.cube_n
    co_core = _ceil(_ceil(shape.c_out, cfg.num_cores), n) * n
    w_per_co = shape.kernel**2 * shape.c_in
    blk = min(co_core, _floor_to((cfg.memory_size["L1"] // 2) // w_per_co, n))
    if blk < n:
        raise InfeasibleMappingError("L1", f"weights of {n} output channels with C_in={shape.c_in} do not fit")
    return co_core, blk


def im2col_layer_sim(shape, cfg=None):
    """Simulate one convolution lowered to a MatMul on the Cube."""
    cfg = SystemConfig() if cfg is None else cfg
    _check_shape(shape)
    cores = cfg.num_cores
    bw = cfg.gm_bandwidth
    k, b, cin, cout = shape.kernel, shape.batch, shape.c_in, shape.c_out
    rows = b * shape.height * shape.width
    kdim = k * k * cin
    co_core, blk = im2col_cout_block(shape, cfg)
    n_blk = _ceil(co_core, blk)
    h_in = (shape.height - 1) * shape.stride + k
    w_in = (shape.width - 1) * shape.stride + k
    ifm = b * h_in * w_in * cin
    gm_ifm = ifm * n_blk * (1 if cfg.broadcast else cores)
    w_bytes = kdim * cout
    ofm = rows * cout
    mb, kb, nb = _ceil(rows, cfg.cube_m), _ceil(kdim, cfg.cube_k), _ceil(co_core, cfg.cube_n)
    compute = mb * kb * nb
    first_load = (kdim * min(blk * cores, cout) + min(ifm, k * w_in * cin)) / bw
    gm = (w_bytes + gm_ifm + ofm) / bw
    lat = _Latency(cfg)
    latency = lat.draw()
    total = latency + max(compute + first_load, gm)
    rep = SimReport(algo="im2col", layer=shape.as_dict(), macs=shape.macs, num_cores=cores,
                    passes=n_blk, cout_core=blk)
    rep.total_cycles = total
    crit = rep.critical
    crit["ifm_transfer"] += latency
    if gm >= compute + first_load:
        total_bytes = w_bytes + gm_ifm + ofm
        crit["wt_transfer_xform"] += gm * w_bytes / total_bytes
        crit["ifm_transfer"] += gm * gm_ifm / total_bytes
        crit["ofm_write"] += gm * ofm / total_bytes
    else:
        crit["ifm_transfer"] += first_load
        crit["cube"] += compute
    busy = rep.busy
    busy["MTE2"] = latency + (w_bytes + gm_ifm) / bw
    busy["MTE3"] = ofm / bw
    busy["MTE1_xform"] = compute
    busy["Cube"] = compute
    busy["Vector"] = rows * co_core / cfg.vector_elems_per_cycle
    by = rep.bytes
    by["GM_rd"] = w_bytes + gm_ifm
    by["GM_wr"] = ofm
    by["L1_wr"] = w_bytes + ifm * n_blk * cores
    by["L1_rd"] = (rows * kdim * nb + kdim * co_core * mb) * cores
    by["L0A_wr"] = rows * kdim * cores
    by["L0A_rd"] = rows * kdim * nb * cores
    by["L0B_wr"] = kdim * co_core * mb * cores
    by["L0B_rd"] = kdim * co_core * mb * cores
    by["L0C_wr"] = 4 * rows * co_core * kb * cores
    by["L0C_rd"] = 4 * rows * co_core * (kb - 1) * cores
    by["L0C_portB_rd"] = 4 * rows * co_core * cores
    st = rep.streams
    st["gm_weight_rd"] = w_bytes
    st["gm_ifm_rd"] = gm_ifm
    st["gm_ofm_wr"] = ofm
    st["l1_weight_wr"] = w_bytes
    st["l1_ifm_wr"] = ifm * n_blk * cores
    from .energy import energy_estimate

    rep.energy_pj = energy_estimate(rep, cfg)
    return rep


def layer_sim(shape, algo, cfg=None):
    if algo == "im2col":
        return im2col_layer_sim(shape, cfg)
    if algo in ("wino_f2", "wino_f4"):
        return wino_layer_sim(shape, int(algo[-1]), cfg)
    raise UnsupportedParameterError(f"unknown algorithm {algo!r}")


def speedup(shape, m=4, cfg=None):
    """im2col cycles over Winograd cycles for the same layer."""
    return im2col_layer_sim(shape, cfg).total_cycles / wino_layer_sim(shape, m, cfg).total_cycles
