"""Uniform quantizers, tap-wise scale matrices and the quantized Winograd pipeline.

Scales for the Winograd domain live in the *integer-scaled* domain: inputs
are transformed with the integer ``BT`` and weights with ``ts.g_int``. The
row scaling of ``g_int`` is undone once per tap together with the
``S_B * S_G`` rescale, just before the output transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .conv import _unwrap, _weights, tile_input, untile_output
from .errors import ConfigurationError, ShapeError, UnsupportedParameterError
from .tensor import DType, Layout, Tensor
from .transforms import make_transform_set

LN2 = math.log(2.0)
ROLES = ("S_B", "S_G", "S_BG")


def qrange(bits):
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


@dataclass(frozen=True)
class QuantParams:
    """Symmetric (``offset == 0``) or offset uniform quantizer.

    Parameters
    ----------
    bits : int
        Signed integer width.
    scale : float
        Step size ``s > 0``.
    offset : float
        Real offset ``mu``; only the error-analysis path uses it.
    """

    bits: int = 8
    scale: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if not 2 <= self.bits <= 32:
            raise UnsupportedParameterError(f"bits must be in [2, 32], got {self.bits}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise UnsupportedParameterError(f"scale must be positive and finite, got {self.scale}")

    @property
    def qmin(self):
        return qrange(self.bits)[0]

    @property
    def qmax(self):
        return qrange(self.bits)[1]


def quantize(x, qp):
    """``clamp(round_half_away((x - mu) / s), qmin, qmax)`` as int64."""
    q = np.clip(round_half_away((np.asarray(x, dtype=np.float64) - qp.offset) / qp.scale), qp.qmin, qp.qmax)
    q = q.astype(np.int64)
    return q if q.ndim else int(q)


def dequantize(q, qp):
    out = np.asarray(q, dtype=np.float64) * qp.scale + qp.offset
    return out if out.ndim else float(out)


def _is_pow2(values):
    mant, _ = np.frexp(np.asarray(values, dtype=np.float64))
    return bool(np.all(mant == 0.5))


@dataclass(frozen=True)
class TapScaleMatrix:
    """Positive ``t x t`` per-tap scales for one role (``S_B``, ``S_G`` or ``S_BG``)."""

    values: np.ndarray
    pow2: bool = False
    role: str = "S_B"

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1]:
            raise ShapeError(f"tap scales must be square, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise UnsupportedParameterError("tap scales must be positive and finite")
        if self.role not in ROLES:
            raise UnsupportedParameterError(f"unknown role {self.role!r}")
        if self.pow2 and not _is_pow2(vals):
            raise UnsupportedParameterError("pow2 flag set but some scales are not powers of two")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, t, scale, role="S_B"):
        vals = np.full((t, t), float(scale))
        return cls(vals, pow2=_is_pow2(vals), role=role)

    @property
    def t(self):
        return self.values.shape[0]

    @property
    def is_pow2(self):
        return _is_pow2(self.values)

    @property
    def log2(self):
        """Integer exponents; only defined for power-of-two scales."""
        if not self.is_pow2:
            raise ConfigurationError("scales are not powers of two")
        return (np.frexp(self.values)[1] - 1).astype(np.int64)

    def to_tensor(self):
        return Tensor(self.values, Layout.MATRIX, DType.F64)

    @classmethod
    def from_tensor(cls, t, role="S_B"):
        vals = np.asarray(t.data if isinstance(t, Tensor) else t, dtype=np.float64)
        return cls(vals, pow2=_is_pow2(vals), role=role)


def combine(s_b, s_g):
    """``S_BG = S_B * S_G`` elementwise."""
    vals = s_b.values * s_g.values
    return TapScaleMatrix(vals, pow2=s_b.is_pow2 and s_g.is_pow2, role="S_BG")


@dataclass(frozen=True)
class CalibState:
    """Running per-tap maxima of ``|value|``."""

    maxima: np.ndarray
    decay: float = 0.9
    count: int = 0

    def __post_init__(self):
        if not 0.0 < self.decay <= 1.0:
            raise UnsupportedParameterError(f"decay must be in (0, 1], got {self.decay}")
        arr = np.array(self.maxima, dtype=np.float64)
        if np.any(arr < 0):
            raise UnsupportedParameterError("running maxima must be >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "maxima", arr)

    @classmethod
    def new(cls, t, decay=0.9):
        return cls(np.zeros((t, t)), decay, 0)


def calibrate_update(state, taps):
    """Fold one batch of ``(..., t, t)`` Winograd-domain tiles into ``state``.

    The first observation initializes the maxima directly; later ones use
    ``decay * old + (1 - decay) * batch_max``. An empty batch is a no-op.
    """
    arr = np.asarray(taps, dtype=np.float64)
    t = state.maxima.shape
    if arr.shape[-2:] != t:
        raise ShapeError(f"expected trailing dims {t}, got {arr.shape}")
    if arr.size == 0:
        return state
    batch_max = np.abs(arr.reshape(-1, *t)).max(axis=0)
    if state.count == 0:
        new = batch_max
    else:
        new = state.decay * state.maxima + (1.0 - state.decay) * batch_max
    return replace(state, maxima=new, count=state.count + 1)


def scales_from_maxima(state, n, role="S_B"):
    """``s = max / 2**(n-1)`` per tap; dead taps get ``2**-n``."""
    maxima = state.maxima if isinstance(state, CalibState) else np.asarray(state, dtype=np.float64)
    s = np.where(maxima > 0, maxima / 2.0 ** (n - 1), 2.0**-n)
    return TapScaleMatrix(s, pow2=False, role=role)


def pow2_ceil(values):
    """``2 ** ceil(log2(s))`` computed exactly through the binary exponent."""
    mant, exp = np.frexp(np.asarray(values, dtype=np.float64))
    exp = np.where(mant == 0.5, exp - 1, exp)
    return np.ldexp(1.0, exp)


def pow2_round(scales):
    """Round every scale up to the next power of two."""
    return TapScaleMatrix(pow2_ceil(scales.values), pow2=True, role=scales.role)


def ste_grad_log2t(x, t, b):
    """Gradient of ``s * clamp(round(x / s))`` w.r.t. ``log2 t`` under the STE.

    ``s = 2 ** ceil(log2 t)``; rounding and the ceiling pass gradients
    straight through.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise UnsupportedParameterError("t must be positive")
    s = pow2_ceil(t)
    x = np.asarray(x, dtype=np.float64)
    qmin, qmax = qrange(b)
    r = x / s
    inner = round_half_away(r) - r
    g = np.where(r < qmin, qmin, np.where(r > qmax, qmax, inner))
    out = s * LN2 * g
    return out if out.ndim else float(out)


def fake_quant_exp(x, u, b):
    """``2**u * clamp(round(x / 2**u))`` for a continuous exponent ``u``."""
    s = np.exp2(np.asarray(u, dtype=np.float64))
    qmin, qmax = qrange(b)
    return s * np.clip(round_half_away(np.asarray(x, dtype=np.float64) / s), qmin, qmax)


# ---------------------------------------------------------------------------
# quantized Winograd convolution


def _scale_values(s, t, name):
    if s is None:
        return np.ones((t, t))
    vals = s.values if isinstance(s, TapScaleMatrix) else np.asarray(s, dtype=np.float64)
    if np.ndim(vals) == 0:
        vals = np.full((t, t), float(vals))
    if vals.shape != (t, t):
        raise ShapeError(f"{name} must be {t}x{t}, got {vals.shape}")
    if np.any(vals <= 0):
        raise UnsupportedParameterError(f"{name} must be positive")
    return vals


def winograd_domain_operands(x, w, ts):
    """Integer Winograd-domain inputs and weights.

    Returns ``(v, u, (n, th, tw, h_out, w_out))`` with ``v`` of shape
    ``(N, C_in, P, T)`` (``P`` tiles, ``T`` taps) and ``u`` of shape
    ``(C_out, C_in, T)``.
    """
    return _operands(np.asarray(x, dtype=np.int64), np.asarray(w, dtype=np.int64), ts, "same")


def _operands(xa, wa, ts, padding):
    tiles, (h_out, w_out) = tile_input(xa, ts, padding)
    bt = ts.bt_int
    g = ts.g_int
    v = bt @ tiles @ bt.T
    n, c, th, tw, t, _ = v.shape
    v = np.ascontiguousarray(v.reshape(n, c, th * tw, t * t))
    u = np.ascontiguousarray((g @ wa @ g.T).reshape(wa.shape[0], wa.shape[1], t * t))
    return v, u, (n, th, tw, h_out, w_out)


def _quantize_div(v, scale, b):
    qmin, qmax = qrange(b)
    return np.clip(round_half_away(v / scale), qmin, qmax).astype(np.int64)


def _quantize_shift(v, shifts, b):
    qmin, qmax = qrange(b)
    flat = np.ascontiguousarray(v.reshape(-1, v.shape[-1]))
    return kernels.active.quantize_shift(flat, np.ascontiguousarray(shifts), qmin, qmax).reshape(v.shape)


def quantize_taps(v, scales, b, backend="divide"):
    """Quantize ``(..., T)`` integer tap values with per-tap ``scales`` (flattened t x t)."""
    scales = np.asarray(scales, dtype=np.float64).reshape(-1)
    if backend == "shift":
        if not _is_pow2(scales):
            raise ConfigurationError("shift backend requires power-of-two scales")
        shifts = (np.frexp(scales)[1] - 1).astype(np.int64)
        return _quantize_shift(np.asarray(v, dtype=np.int64), shifts, b)
    if backend == "divide":
        return _quantize_div(v, scales, b)
    raise ConfigurationError(f"unknown backend {backend!r}")


def quantized_winograd_conv2d(x, w, ts=None, S_B=None, S_G=None, b=None, padding="same",
                              backend="auto", m=4):
    """Integer Winograd convolution with tap-wise requantization.

    Parameters
    ----------
    x, w : Tensor or ndarray
        Integer spatial-domain activations ``(N, C_in, H, W)`` and weights
        ``(C_out, C_in, 3, 3)``.
    ts : TransformSet, optional
    S_B, S_G : TapScaleMatrix or array_like, optional
        Scales of the integer-scaled input and weight transforms. Default 1.
    b : int, optional
        Winograd-domain bit width; 10 for F4 and 8 for F2 by default.
    backend : {"auto", "shift", "divide"}
        ``shift`` requantizes with arithmetic shifts and needs power-of-two
        scales; ``auto`` picks it whenever both scale matrices allow.

    Returns
    -------
    ndarray or Tensor
        float64 output ``(N, C_out, H_out, W_out)``.
    """
    ts = make_transform_set(m) if ts is None else ts
    b = (10 if ts.m == 4 else 8) if b is None else int(b)
    if not 2 <= b <= 32:
        raise UnsupportedParameterError(f"Winograd-domain bits must be in [2, 32], got {b}")
    wa = _weights(w)
    xa, rewrap = _unwrap(x, wa.shape[1])
    for name, arr in (("x", xa), ("w", wa)):
        if arr.dtype.kind not in "iu":
            raise ShapeError(f"{name} must be an integer tensor, got {arr.dtype}")
    if wa.shape[2:] != (3, 3) or xa.ndim != 4 or xa.shape[1] != wa.shape[1]:
        raise ShapeError(f"incompatible shapes x{xa.shape} w{wa.shape}")
    t = ts.t
    sb = _scale_values(S_B, t, "S_B")
    sg = _scale_values(S_G, t, "S_G")
    if backend == "auto":
        backend = "shift" if _is_pow2(sb) and _is_pow2(sg) else "divide"
    v, u, (n, th, tw, h_out, w_out) = _operands(xa.astype(np.int64), wa.astype(np.int64), ts, padding)
    qx = quantize_taps(v, sb, b, backend)
    qw = quantize_taps(u, sg, b, backend)
    acc = kernels.active.tap_accumulate(np.ascontiguousarray(qx), np.ascontiguousarray(qw))
    # rescale with integer row-correction ratios first, one division at the end
    lcm = math.lcm(*ts.g_row_scale.tolist())
    ratio = (lcm // ts.g_row_scale).astype(np.float64)
    tap_scale = (sb * sg * np.outer(ratio, ratio)).reshape(-1)
    yw = acc.astype(np.float64) * tap_scale
    yw = yw.reshape(n, wa.shape[0], th, tw, t, t)
    at = ts.at_f
    y = (at @ yw @ at.T) / float(lcm * lcm)
    return rewrap(untile_output(y, h_out, w_out))


def calibrate_tap_scales(x, w, ts, b, pow2=True, decay=0.9):
    """Max-calibrated ``(S_B, S_G)`` for one batch, in the integer-scaled domain."""
    v, u, _ = _operands(np.asarray(x, dtype=np.int64), np.asarray(w, dtype=np.int64), ts, "same")
    t = ts.t
    sb = scales_from_maxima(calibrate_update(CalibState.new(t, decay), v.reshape(-1, t, t)), b, "S_B")
    sg = scales_from_maxima(calibrate_update(CalibState.new(t, decay), u.reshape(-1, t, t)), b, "S_G")
    if pow2:
        sb, sg = pow2_round(sb), pow2_round(sg)
    return sb, sg


def uniform_scales(x, w, ts, b, pow2=True):
    """Single layer-wide Winograd-domain scale for inputs and one for weights."""
    v, u, _ = _operands(np.asarray(x, dtype=np.int64), np.asarray(w, dtype=np.int64), ts, "same")
    out = []
    for arr, role in ((v, "S_B"), (u, "S_G")):
        peak = float(np.abs(arr).max()) if arr.size else 0.0
        s = peak / 2.0 ** (b - 1) if peak > 0 else 2.0**-b
        sm = TapScaleMatrix.uniform(ts.t, s, role)
        out.append(pow2_round(sm) if pow2 else sm)
    return tuple(out)


def accumulator_bound(b, c_in):
    """Largest possible ``|sum q_x * q_w|`` over ``c_in`` channels at ``b`` bits."""
    return (1 << (b - 1)) ** 2 * c_in
