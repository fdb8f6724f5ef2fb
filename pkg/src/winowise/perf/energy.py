"""Energy model: per-byte memory access costs plus unit power over busy cycles."""
from __future__ import annotations

from .config import SystemConfig

_MEMORY_KEYS = ("GM_rd", "GM_wr", "L1_rd", "L1_wr", "L0A_rd", "L0A_wr", "L0B_rd", "L0B_wr", "L0C_rd", "L0C_wr")


def _is_wino(report):
    return report.algo.startswith("wino")


def memory_energy(report, cfg=None):
    """Access energy [pJ] of all memories."""
    cfg = SystemConfig() if cfg is None else cfg
    cost = cfg.memory_energy
    total = sum(report.bytes.get(k, 0) * cost[k] for k in _MEMORY_KEYS)
    port_b = cost["L0C_portB_rd_wino"] if _is_wino(report) else cost["L0C_portB_rd_im2col"]
    return total + report.bytes.get("L0C_portB_rd", 0) * port_b


def unit_energies(report, cfg=None):
    """Per-unit energy [pJ]: busy cycles x power [mW] x cycle time [ns], over all cores."""
    cfg = SystemConfig() if cfg is None else cfg
    p = cfg.unit_power
    ns = cfg.ns_per_cycle
    cores = report.num_cores
    busy = report.busy
    wino = _is_wino(report)
    out = {
        "Cube": busy["Cube"] * (p["cube_wino"] if wino else p["cube_im2col"]) * ns * cores,
        "OutXform": busy["OutXform"] * p["out_xform"] * ns * cores,
        "Vector": busy["Vector"] * p["vector"] * ns * cores,
        "MTE2": busy["MTE2"] * p["mte2"] * ns,
        "MTE3": busy["MTE3"] * p["mte3"] * ns,
    }
    if wino:
        out["MTE1"] = (busy["MTE1_in"] * p["in_xform"] + busy["MTE1_wt"] * p["wt_xform"]) * ns * cores
    else:
        out["MTE1"] = busy["MTE1_xform"] * p["mte1_im2col"] * ns * cores
    return out


def cube_energy(report, cfg=None):
    return unit_energies(report, cfg)["Cube"]


def energy_estimate(report, cfg=None):
    """Total energy [pJ] of a simulated layer."""
    return memory_energy(report, cfg) + sum(unit_energies(report, cfg).values())


def energy_breakdown(report, cfg=None):
    out = dict(unit_energies(report, cfg))
    out["memory"] = memory_energy(report, cfg)
    return out
