"""Throughput and energy model of the dual-core Winograd accelerator."""
from .config import SystemConfig
from .energy import cube_energy, energy_breakdown, energy_estimate
from .engines import EngineKind, EngineSpec, default_engines, tap_by_tap_cycles, xform_engine_rates
from .network import AlgoChoice, NetworkReport, grid_table, network_sim
from .sim import SimReport, breakdown, im2col_layer_sim, layer_sim, speedup, wino_layer_sim

__all__ = [
    "SystemConfig", "cube_energy", "energy_breakdown", "energy_estimate", "EngineKind", "EngineSpec",
    "default_engines", "tap_by_tap_cycles", "xform_engine_rates", "AlgoChoice", "NetworkReport",
    "grid_table", "network_sim", "SimReport", "breakdown", "im2col_layer_sim", "layer_sim", "speedup",
    "wino_layer_sim",
]
