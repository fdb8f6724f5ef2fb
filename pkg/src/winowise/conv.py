"""Direct and Winograd 3x3 convolution over NCHW / fractal tensors.

Three arithmetic modes are selected from the input element type:

* float64 inputs run in IEEE double,
* integer inputs run exactly in int64 using integer-scaled transforms,
* ``Fraction`` (object) inputs run exactly in rational arithmetic.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import ShapeError, UnsupportedWorkloadError
from .tensor import DType, Layout, Tensor, fractal_to_nchw, nchw_to_fractal
from .transforms import make_transform_set

_INT64_BUDGET = 2**62


def _unwrap(x, c=None):
    """Return (ndarray NCHW, rewrap callable)."""
    if isinstance(x, Tensor):
        if x.layout is Layout.FRACTAL:
            c = x.shape[1] * x.shape[-1] if c is None else c
            arr = fractal_to_nchw(x, c).data

            def rewrap(out):
                return nchw_to_fractal(Tensor(out, Layout.NCHW, _out_dtype(out)))

            return arr, rewrap
        if x.layout is not Layout.NCHW:
            raise ShapeError(f"convolution input must be NCHW or FRACTAL, got {x.layout.value}")
        return x.data, lambda out: Tensor(out, Layout.NCHW, _out_dtype(out))
    arr = np.asarray(x)
    return arr, lambda out: out


def _out_dtype(arr):
    if arr.dtype == object:
        return DType.RATIONAL
    if arr.dtype.kind == "f":
        return DType.F64
    return DType.I32


def _weights(w):
    arr = w.data if isinstance(w, Tensor) else np.asarray(w)
    if arr.ndim != 4:
        raise ShapeError(f"weights must be (C_out, C_in, k, k), got shape {arr.shape}")
    return arr


def _mode(*arrays):
    if any(a.dtype == object for a in arrays):
        return "rational"
    if any(a.dtype.kind == "f" for a in arrays):
        return "float"
    return "int"


def _as_mode(arr, mode):
    if mode == "float":
        return np.ascontiguousarray(arr, dtype=np.float64)
    if mode == "int":
        return np.ascontiguousarray(arr, dtype=np.int64)
    out = np.empty(arr.shape, dtype=object)
    out.reshape(-1)[:] = [Fraction(v) for v in arr.reshape(-1).tolist()]
    return out


def _zero_pad(arr, top, bottom, left, right):
    n, c, h, w = arr.shape
    out = np.zeros((n, c, h + top + bottom, w + left + right), dtype=arr.dtype)
    if arr.dtype == object:
        out[...] = Fraction(0)
    out[:, :, top:top + h, left:left + w] = arr
    return out


def direct_conv2d(x, w, padding="valid", stride=1):
    """Reference cross-correlation with a fixed accumulation order.

    ``padding="same"`` pads ``(k - 1) // 2`` zeros on every side. Integer
    inputs accumulate in int64, floats in float64.
    """
    wa = _weights(w)
    xa, rewrap = _unwrap(x, wa.shape[1])
    if xa.ndim != 4:
        raise ShapeError(f"input must be 4-D NCHW, got shape {xa.shape}")
    if xa.shape[1] != wa.shape[1]:
        raise ShapeError(f"input has {xa.shape[1]} channels, weights expect {wa.shape[1]}")
    if wa.shape[2] != wa.shape[3]:
        raise ShapeError("only square kernels are supported")
    if stride not in (1, 2):
        raise UnsupportedWorkloadError(f"stride {stride} not supported")
    k = wa.shape[2]
    mode = _mode(xa, wa)
    xa, wa = _as_mode(xa, mode), _as_mode(wa, mode)
    if padding == "same":
        p = (k - 1) // 2
        xa = _zero_pad(xa, p, p, p, p)
    elif padding != "valid":
        raise ShapeError(f"unknown padding {padding!r}")
    if mode == "rational":
        out = kernels.python_kernels.conv2d_direct(xa, wa, stride)
    else:
        out = kernels.active.conv2d_direct(xa, wa, stride)
    return rewrap(out)


# ---------------------------------------------------------------------------
# tiling helpers shared with the quantized pipeline


def tile_input(xa, ts, padding):
    """Pad ``xa`` and cut it into overlapping t x t tiles with stride m.

    Returns ``(tiles, (h_out, w_out))`` where ``tiles`` has shape
    ``(N, C, tiles_h, tiles_w, t, t)``. Output extents are rounded up to a
    multiple of ``m`` with zero rows/columns that are cropped later.
    """
    if padding == "same":
        pad = 1
    elif padding == "valid":
        pad = 0
    else:
        raise ShapeError(f"unknown padding {padding!r}")
    n, c, h, w = xa.shape
    h_out, w_out = h + 2 * pad - 2, w + 2 * pad - 2
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"input {h}x{w} too small for a 3x3 kernel with {padding} padding")
    m, t = ts.m, ts.t
    th, tw = -(-h_out // m), -(-w_out // m)
    xp = _zero_pad(xa, pad, th * m + 2 - h - pad, pad, tw * m + 2 - w - pad)
    win = np.lib.stride_tricks.sliding_window_view(xp, (t, t), axis=(2, 3))
    return np.ascontiguousarray(win[:, :, ::m, ::m]), (h_out, w_out)


def untile_output(y, h_out, w_out):
    """(N, C, th, tw, m, m) -> (N, C, h_out, w_out)."""
    n, c, th, tw, m, _ = y.shape
    full = y.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, th * m, tw * m)
    return np.ascontiguousarray(full[:, :, :h_out, :w_out])


def to_taps(v):
    """(N, C, th, tw, t, t) -> taps-major (t*t, N*th*tw, C)."""
    n, c, th, tw, t, _ = v.shape
    return v.transpose(4, 5, 0, 2, 3, 1).reshape(t * t, n * th * tw, c)


def from_taps(mt, n, th, tw, t):
    """(t*t, N*th*tw, C) -> (N, C, th, tw, t, t)."""
    c = mt.shape[-1]
    return mt.reshape(t, t, n, th, tw, c).transpose(2, 5, 3, 4, 0, 1)


def input_transform_tensor(x, ts, padding="same"):
    """Transform a FRACTAL tensor into the taps-major WINO_TAPS layout (float64).

    Output dims are ``<tap, N, C1, tiles_h, tiles_w, C0>``.
    """
    if not isinstance(x, Tensor) or x.layout is not Layout.FRACTAL:
        raise ShapeError("input_transform_tensor expects a FRACTAL tensor")
    n, c1, _, _, c0 = x.shape
    xa = fractal_to_nchw(x, c1 * c0).data.astype(np.float64)
    tiles, _ = tile_input(xa, ts, padding)
    bt = ts.bt_f
    v = bt @ tiles @ bt.T
    th, tw = v.shape[2], v.shape[3]
    taps = v.transpose(4, 5, 0, 1, 2, 3).reshape(ts.taps, n, c1, c0, th, tw)
    return Tensor(taps.transpose(0, 1, 2, 4, 5, 3), Layout.WINO_TAPS, DType.F64)


def _winograd_float(xa, wa, ts, padding):
    tiles, (h_out, w_out) = tile_input(xa, ts, padding)
    bt, g, at = ts.bt_f, ts.g_f, ts.at_f
    v = bt @ tiles @ bt.T
    u = g @ wa @ g.T
    n, _, th, tw, t, _ = v.shape
    vt = to_taps(v)
    ut = u.transpose(2, 3, 1, 0).reshape(t * t, wa.shape[1], wa.shape[0])
    mt = np.matmul(vt, ut)
    y = at @ from_taps(mt, n, th, tw, t) @ at.T
    return untile_output(y, h_out, w_out)


def _int_fits(xa, wa, ts):
    if xa.size == 0 or wa.size == 0:
        return True
    bt = np.abs(ts.BT.astype(np.float64)).sum(axis=1).max() ** 2
    g = np.abs(ts.g_int).sum(axis=1).max() ** 2
    at = np.abs(ts.AT.astype(np.float64)).sum(axis=1).max() ** 2
    corr = float(math.lcm(*ts.g_row_scale.tolist())) ** 2
    bound = float(np.abs(xa).max()) * float(np.abs(wa).max()) * wa.shape[1] * bt * g * at * corr
    return bound < _INT64_BUDGET


def _integral(mat):
    return all(Fraction(v).denominator == 1 for v in mat.flat)


def _winograd_int(xa, wa, ts, padding):
    tiles, (h_out, w_out) = tile_input(xa, ts, padding)
    bt = ts.bt_int
    at = ts.AT.astype(np.int64)
    g = ts.g_int
    v = bt @ tiles @ bt.T
    u = g @ wa @ g.T
    n, _, th, tw, t, _ = v.shape
    mt = np.matmul(to_taps(v), u.transpose(2, 3, 1, 0).reshape(t * t, wa.shape[1], wa.shape[0]))
    lcm = math.lcm(*ts.g_row_scale.tolist())
    ratio = lcm // ts.g_row_scale
    mt = mt * np.outer(ratio, ratio).reshape(t * t, 1, 1)
    y = at @ from_taps(mt, n, th, tw, t) @ at.T
    q, r = np.divmod(y, lcm * lcm)
    if np.any(r):
        raise ArithmeticError("integer Winograd result not divisible by the transform scale")
    return untile_output(q, h_out, w_out)


def _winograd_rational(xa, wa, ts, padding):
    tiles, (h_out, w_out) = tile_input(xa, ts, padding)
    v = ts.BT @ tiles @ ts.BT.T
    u = ts.G @ wa @ ts.G.T
    n, _, th, tw, t, _ = v.shape
    mt = np.matmul(to_taps(v), u.transpose(2, 3, 1, 0).reshape(t * t, wa.shape[1], wa.shape[0]))
    y = ts.AT @ from_taps(mt, n, th, tw, t) @ ts.AT.T
    return untile_output(y, h_out, w_out)


def winograd_conv2d(x, w, ts=None, padding="same", m=4):
    """3x3 stride-1 convolution through ``F(m x m, 3 x 3)``.

    Parameters
    ----------
    x : Tensor or ndarray
        NCHW array/tensor or a FRACTAL tensor.
    w : Tensor or ndarray
        ``(C_out, C_in, 3, 3)`` weights.
    ts : TransformSet, optional
        Defaults to ``make_transform_set(m)``.
    padding : {"same", "valid"}
    """
    wa = _weights(w)
    if wa.shape[2:] != (3, 3):
        raise UnsupportedWorkloadError(f"Winograd path needs a 3x3 kernel, got {wa.shape[2:]}")
    ts = make_transform_set(m) if ts is None else ts
    xa, rewrap = _unwrap(x, wa.shape[1])
    if xa.ndim != 4 or xa.shape[1] != wa.shape[1]:
        raise ShapeError(f"input shape {xa.shape} does not match weights {wa.shape}")
    mode = _mode(xa, wa)
    xa, wa = _as_mode(xa, mode), _as_mode(wa, mode)
    if mode == "float":
        out = _winograd_float(xa, wa, ts, padding)
    elif mode == "int" and _integral(ts.BT) and _integral(ts.AT) and _int_fits(xa, wa, ts):
        out = _winograd_int(xa, wa, ts, padding)
    else:
        if mode == "int":
            xa, wa = _as_mode(xa, "rational"), _as_mode(wa, "rational")
        out = _winograd_rational(xa, wa, ts, padding)
        if mode == "int":
            out = out.astype(np.int64)
    return rewrap(out)
