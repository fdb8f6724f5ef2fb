"""Cycle models of the Winograd transformation engines.

Row-by-row engines follow closed-form rates. The tap-by-tap engine runs
one shift-and-add per cycle per processing element, so its cycles per
transform are counted from the canonical-signed-digit expansion of the
integer transform after greedy common-subexpression elimination.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..errors import ConfigurationError
from ..transforms import make_transform_set


class EngineKind(str, Enum):
    ROW_SLOW = "row_by_row_slow"
    ROW_FAST = "row_by_row_fast"
    TAP = "tap_by_tap"


@dataclass(frozen=True)
class EngineSpec:
    """One transformation engine.

    ``h_T`` and ``w_T`` are the dimensions of the transform; ``P_c``,
    ``P_s`` and ``P_t`` replicate processing elements along channels,
    space and taps.
    """

    kind: EngineKind
    h_T: int
    w_T: int
    P_c: int = 1
    P_s: int = 1
    P_t: int = 1
    cycles_per_xform: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", EngineKind(self.kind))
        if min(self.h_T, self.w_T, self.P_c, self.P_s, self.P_t) < 1:
            raise ConfigurationError("engine dimensions and parallelism must be >= 1")
        if self.kind is not EngineKind.TAP and self.P_t != 1:
            raise ConfigurationError("P_t only applies to tap-by-tap engines")
        if self.kind is EngineKind.TAP and (self.cycles_per_xform is None or self.cycles_per_xform < 1):
            raise ConfigurationError("tap-by-tap engines need cycles_per_xform >= 1")


def xform_engine_rates(spec):
    """Cycles per transform, parallel transforms and L1/L0 bandwidths [B/cycle]."""
    pcs = spec.P_c * spec.P_s
    if spec.kind is EngineKind.ROW_SLOW:
        return {"cycles_per_xform": spec.h_T + spec.w_T, "parallel_xforms": pcs,
                "rd_bw": pcs * spec.h_T, "wr_bw": pcs * spec.h_T}
    if spec.kind is EngineKind.ROW_FAST:
        return {"cycles_per_xform": spec.h_T, "parallel_xforms": pcs,
                "rd_bw": pcs * spec.h_T, "wr_bw": pcs * spec.w_T * spec.w_T}
    return {"cycles_per_xform": spec.cycles_per_xform, "parallel_xforms": pcs * spec.P_t,
            "rd_bw": pcs, "wr_bw": pcs}


def xform_cycles(spec, count):
    """Cycles to run ``count`` independent transforms on ``spec``."""
    rates = xform_engine_rates(spec)
    return count * rates["cycles_per_xform"] / rates["parallel_xforms"]


# ---------------------------------------------------------------------------
# shift-add schedule of a constant integer transform


def csd(value):
    """Canonical signed digits of ``value`` as ``[(shift, sign), ...]``."""
    value = int(value)
    out = []
    shift = 0
    while value:
        if value & 1:
            digit = 2 - (value & 3)
            out.append((shift, digit))
            value -= digit
        value >>= 1
        shift += 1
    return out


def _forms_kron(T):
    t, r = T.shape
    forms = []
    for i in range(t):
        for j in range(t):
            terms = []
            for a in range(r):
                for b in range(r):
                    for sh, sg in csd(T[i, a] * T[j, b]):
                        terms.append((("s", a, b), sh, sg))
            forms.append(terms)
    return [forms]


def _forms_separable(T):
    t, r = T.shape
    stage1 = [[(("s", a, b), sh, sg) for a in range(r) for sh, sg in csd(T[i, a])]
              for i in range(t) for b in range(r)]
    stage2 = [[(("r", i, b), sh, sg) for b in range(r) for sh, sg in csd(T[j, b])]
              for i in range(t) for j in range(t)]
    return [stage1, stage2]


def _pair_key(x, y):
    (vx, sx, gx), (vy, sy, gy) = sorted((x, y), key=lambda term: (term[1], repr(term[0])))
    return (vx, vy, sy - sx, gx * gy)


def _cse(forms):
    """Greedy pairwise CSE; returns ``(rewritten forms, number of shared terms)``."""
    forms = [list(f) for f in forms]
    shared = 0
    while True:
        counts = Counter()
        for f in forms:
            keys = {_pair_key(f[i], f[j]) for i in range(len(f)) for j in range(i + 1, len(f))}
            counts.update(keys)
        if not counts:
            break
        key, n = max(counts.items(), key=lambda kv: (kv[1], repr(kv[0])))
        if n < 2:
            break
        shared += 1
        new_var = ("cse", shared)
        for f in forms:
            for i in range(len(f)):
                hit = next((j for j in range(len(f)) if j != i and _pair_key(f[i], f[j]) == key
                            and _is_base(f[i], f[j], key)), None)
                if hit is not None:
                    _, base_shift, base_sign = f[i]
                    for idx in sorted((i, hit), reverse=True):
                        del f[idx]
                    f.append((new_var, base_shift, base_sign))
                    break
    return forms, shared


def _is_base(x, y, key):
    """``x`` is the lower-shift member of the pair (ties broken like ``_pair_key``)."""
    return sorted((x, y), key=lambda term: (term[1], repr(term[0])))[0] is x


def _schedule_cycles(stages):
    total = 0
    for forms in stages:
        forms, shared = _cse(forms)
        total += shared + sum(max(len(f) - 1, 1) for f in forms if f)
    return total


def _as_int_matrix(mat):
    vals = [[Fraction(v) for v in row] for row in np.asarray(mat)]
    scale = math.lcm(*(v.denominator for row in vals for v in row))
    return np.array([[int(v * scale) for v in row] for row in vals], dtype=object)


@lru_cache(maxsize=None)
def _tap_cycles_cached(key):
    T = np.array(key, dtype=object)
    return min(_schedule_cycles(_forms_kron(T)), _schedule_cycles(_forms_separable(T)))


def tap_by_tap_cycles(mat):
    """Cycles for one 2-D transform ``T s T^T`` on a single shift-add PE."""
    T = _as_int_matrix(mat)
    return _tap_cycles_cached(tuple(tuple(int(v) for v in row) for row in T))


def default_engines(m, cfg):
    """Engine assignment: row-by-row slow input, row-by-row fast output, tap-by-tap weights.

    The weight engine is replicated just enough to keep up with
    ``cfg.weight_engine_bandwidth`` split across the cores.
    """
    ts = make_transform_set(m)
    t = ts.t
    wt_cycles = tap_by_tap_cycles(ts.g_int)
    per_core_bw = cfg.weight_engine_bandwidth / cfg.num_cores
    wt_parallel = max(1, math.ceil(per_core_bw * wt_cycles / (ts.r * ts.r)))
    return {
        "input": EngineSpec(EngineKind.ROW_SLOW, h_T=t, w_T=t, P_c=32, P_s=2),
        "output": EngineSpec(EngineKind.ROW_FAST, h_T=t, w_T=m, P_c=16, P_s=1),
        "weight": EngineSpec(EngineKind.TAP, h_T=t, w_T=t, P_c=wt_parallel, P_s=1, P_t=1,
                             cycles_per_xform=wt_cycles),
    }
