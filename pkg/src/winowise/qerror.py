"""Weight quantization-error study in the spatial and Winograd domains.

Each quantization unit (whole layer, output channel, tap, or channel and
tap) gets an offset ``mu``, a spread ``sigma`` and a step
``s = gamma * sigma / 2**(n-1)``, where ``gamma`` is chosen on a fixed grid
to minimize the summed relative error of the unit. Winograd-domain weights
are mapped back to the spatial domain with the pseudo-inverse of ``G``
before the reported error is measured.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ShapeError, UnsupportedParameterError
from .quant import qrange, round_half_away
from .tensor import Tensor

STRATEGIES = ("layer", "channel", "tap", "channel_and_tap")
DOMAINS = ("spatial", "winograd")
GAMMA_GRID = np.round(np.arange(0.5, 8.0 + 1e-9, 0.01), 2)


def pseudo_inverse(mat):
    """Moore-Penrose inverse via SVD."""
    return np.linalg.pinv(np.asarray(mat, dtype=np.float64))


@dataclass
class UnitStat:
    gamma: float | None
    sigma: float
    mu: float

    def as_dict(self):
        return {"gamma": self.gamma, "sigma": self.sigma, "mu": self.mu}


@dataclass
class ErrorReport:
    strategy: str
    domain: str
    n: int
    mean_rel_error: float
    units: list = field(default_factory=list)

    @property
    def mean_log2_rel_error(self):
        return math.log2(self.mean_rel_error) if self.mean_rel_error > 0 else -math.inf

    def as_dict(self):
        lg = self.mean_log2_rel_error
        return {
            "strategy": self.strategy,
            "domain": self.domain,
            "n": self.n,
            "mean_log2_rel_error": lg if math.isfinite(lg) else None,
            "mean_rel_error": self.mean_rel_error,
            "units": [u.as_dict() for u in self.units],
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _unit_axes(strategy):
    """Axes of a ``(C_out, C_in, kh, kw)`` array that are reduced within one unit."""
    return {
        "layer": (0, 1, 2, 3),
        "channel": (1, 2, 3),
        "tap": (0, 1),
        "channel_and_tap": (1,),
    }[strategy]


def _iter_units(arr, strategy):
    """Yield ``index`` tuples selecting each unit of ``arr``."""
    reduced = _unit_axes(strategy)
    kept = [ax for ax in range(4) if ax not in reduced]
    for key in np.ndindex(*(arr.shape[ax] for ax in kept)):
        idx = [slice(None)] * 4
        for ax, k in zip(kept, key):
            idx[ax] = k
        yield tuple(idx)


def _quantize_offset(x, mu, s, n):
    qmin, qmax = qrange(n)
    return mu + s * np.clip(round_half_away((x - mu) / s), qmin, qmax)


def fit_unit(values, n, gammas=GAMMA_GRID):
    """Best ``(gamma, sigma, mu)`` for one unit and its quantized values."""
    v = np.ascontiguousarray(values, dtype=np.float64).reshape(-1)
    mu = float(v.mean()) if v.size else 0.0
    sigma = float(v.std()) if v.size else 0.0
    if sigma == 0.0 or not np.any(v != 0.0):
        return UnitStat(None, sigma, mu), v.copy()
    scales = np.ascontiguousarray(gammas * sigma / 2.0 ** (n - 1))
    qmin, qmax = qrange(n)
    errs = kernels.active.rel_error_grid(v, mu, scales, float(qmin), float(qmax))
    best = int(np.argmin(errs))
    return UnitStat(float(gammas[best]), sigma, mu), _quantize_offset(v, mu, scales[best], n)


def _g_matrix(ts):
    if ts is None:
        raise UnsupportedParameterError("the winograd domain needs a transform set")
    g = ts.g_f if hasattr(ts, "g_f") else np.asarray(ts, dtype=np.float64)
    if g.ndim != 2 or g.shape[1] != 3:
        raise ShapeError(f"G must be t x 3, got {g.shape}")
    return g


def quant_error_report(weights, strategy="layer", domain="spatial", n=8, ts=None, gammas=GAMMA_GRID):
    """Quantize ``weights`` unit by unit and report the mean relative error.

    Parameters
    ----------
    weights : Tensor or ndarray
        ``(C_out, C_in, 3, 3)`` float weights.
    strategy : {"layer", "channel", "tap", "channel_and_tap"}
    domain : {"spatial", "winograd"}
    n : int
        Quantization bit width.
    ts : TransformSet or ndarray, optional
        Transform set (or a bare ``G``) for the Winograd domain.
    """
    if strategy not in STRATEGIES:
        raise UnsupportedParameterError(f"unknown strategy {strategy!r}")
    if domain not in DOMAINS:
        raise UnsupportedParameterError(f"unknown domain {domain!r}")
    f = np.asarray(weights.data if isinstance(weights, Tensor) else weights, dtype=np.float64)
    if f.ndim != 4 or f.shape[2:] != (3, 3):
        raise ShapeError(f"weights must be (C_out, C_in, 3, 3), got {f.shape}")
    if domain == "winograd":
        g = _g_matrix(ts)
        target = g @ f @ g.T
    else:
        target = f
    quantized = np.empty_like(target)
    units = []
    for idx in _iter_units(target, strategy):
        stat, q = fit_unit(target[idx], n, gammas)
        quantized[idx] = q.reshape(target[idx].shape)
        units.append(stat)
    if domain == "winograd":
        gp = pseudo_inverse(g)
        back = gp @ quantized @ gp.T
    else:
        back = quantized
    nz = f != 0.0
    mean = float(np.mean(np.abs(back[nz] - f[nz]) / np.abs(f[nz]))) if np.any(nz) else 0.0
    return ErrorReport(strategy, domain, n, mean, units)


def all_reports(weights, n=8, ts=None, strategies=STRATEGIES, domains=DOMAINS):
    return [quant_error_report(weights, s, d, n, ts) for d in domains for s in strategies]


def tap_scaled_g(ts):
    """``G`` with row ``i`` multiplied by ``2**i``; tap ``(i, j)`` then scales by ``2**(i + j)``."""
    g = _g_matrix(ts)
    return np.diag(2.0 ** np.arange(g.shape[0])) @ g


def synthetic_weights(c_out, c_in, seed=0, sigma=0.05, floor=0.01):
    """Gaussian-like 3x3 weights with ``|f| >= floor``.

    The relative error ``|Q(f) - f| / |f|`` has no finite mean for weights
    with density at zero, so the study fixture keeps magnitudes away from 0.
    """
    from .prng import FixtureRNG

    z = FixtureRNG(seed).normal((c_out, c_in, 3, 3), sigma)
    return np.where(z < 0, -1.0, 1.0) * (floor + np.abs(z))


def pooled_report(layers, strategy="layer", domain="spatial", n=8, ts=None):
    """One report over several layers; the mean runs over all nonzero weights."""
    total, count, units = 0.0, 0, []
    for w in layers:
        f = np.asarray(w.data if isinstance(w, Tensor) else w, dtype=np.float64)
        rep = quant_error_report(f, strategy, domain, n, ts)
        nz = int(np.count_nonzero(f))
        total += rep.mean_rel_error * nz
        count += nz
        units.extend(rep.units)
    return ErrorReport(strategy, domain, n, total / count if count else 0.0, units)


def load_weight_archive(path):
    """All ``(C_out, C_in, 3, 3)`` arrays of an ``.npz`` archive, in key order."""
    with np.load(path) as data:
        return [np.asarray(data[k], dtype=np.float64) for k in sorted(data.files)
                if data[k].ndim == 4 and data[k].shape[2:] == (3, 3)]
