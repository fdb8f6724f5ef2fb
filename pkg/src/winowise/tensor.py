"""Tensor container, channel layouts and the ``WTNS`` on-disk format.

The container is a thin immutable wrapper around a numpy array that also
records the logical layout and element type. Rational tensors hold
``fractions.Fraction`` objects in an object array.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ShapeError, TensorFormatError

C0 = 32
MAGIC = b"WTNS"


class Layout(str, Enum):
    NCHW = "NCHW"
    FRACTAL = "FRACTAL"
    MATRIX = "MATRIX"
    WINO_TAPS = "WINO_TAPS"


class DType(str, Enum):
    F64 = "f64"
    I8 = "i8"
    I16 = "i16"
    I32 = "i32"
    RATIONAL = "rational"


_NUMPY_DTYPES = {
    DType.F64: np.dtype("<f8"),
    DType.I8: np.dtype("<i1"),
    DType.I16: np.dtype("<i2"),
    DType.I32: np.dtype("<i4"),
}

_INT_RANGES = {
    DType.I8: (-(2**7), 2**7 - 1),
    DType.I16: (-(2**15), 2**15 - 1),
    DType.I32: (-(2**31), 2**31 - 1),
}

_LAYOUT_NDIM = {Layout.NCHW: 4, Layout.FRACTAL: 5, Layout.MATRIX: 2, Layout.WINO_TAPS: 6}


def _infer_dtype(arr):
    if arr.dtype == object:
        return DType.RATIONAL
    if arr.dtype.kind == "f":
        return DType.F64
    if arr.dtype.kind in "iu":
        return {1: DType.I8, 2: DType.I16}.get(arr.dtype.itemsize, DType.I32)
    raise ShapeError(f"unsupported element type {arr.dtype}")


@dataclass(frozen=True)
class Tensor:
    """Immutable n-d tensor with a declared layout and element type.

    Parameters
    ----------
    data : array_like
        Element values. Copied and made read-only.
    layout : Layout
        Logical layout; fixes the number of dimensions.
    dtype : DType, optional
        Element type. Inferred from ``data`` when omitted.
    """

    data: np.ndarray
    layout: Layout = Layout.NCHW
    dtype: DType = field(default=None)

    def __post_init__(self):
        layout = Layout(self.layout)
        raw = self.data.data if isinstance(self.data, Tensor) else self.data
        arr = np.array(raw, copy=True)
        dtype = _infer_dtype(arr) if self.dtype is None else DType(self.dtype)
        if dtype is DType.RATIONAL:
            flat = [Fraction(v) for v in arr.reshape(-1)]
            out = np.empty(len(flat), dtype=object)
            out[:] = flat
            arr = out.reshape(arr.shape)
        else:
            if dtype in _INT_RANGES:
                if arr.dtype.kind == "f" and arr.size and not np.all(arr == np.round(arr)):
                    raise ShapeError(f"non-integral values for {dtype.value}")
                lo, hi = _INT_RANGES[dtype]
                if arr.size and (arr.min() < lo or arr.max() > hi):
                    raise ShapeError(f"values out of range for {dtype.value}")
            arr = arr.astype(_NUMPY_DTYPES[dtype].newbyteorder("="))
        if any(d < 0 for d in arr.shape):
            raise ShapeError("negative extent")
        ndim = _LAYOUT_NDIM[layout]
        if arr.ndim != ndim:
            raise ShapeError(f"{layout.value} tensors have {ndim} dims, got shape {arr.shape}")
        if layout in (Layout.FRACTAL, Layout.WINO_TAPS) and arr.shape[-1] != C0:
            raise ShapeError(f"{layout.value} innermost dim must be {C0}, got {arr.shape[-1]}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "dtype", dtype)

    @property
    def shape(self):
        return tuple(self.data.shape)

    @property
    def size(self):
        return int(self.data.size)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.layout == other.layout
            and self.dtype == other.dtype
            and self.shape == other.shape
            and bool(np.all(self.data == other.data))
        )

    __hash__ = None


@dataclass(frozen=True)
class LayerShape:
    """3x3 Conv2D workload; ``height``/``width`` are output resolutions."""

    batch: int
    height: int
    width: int
    c_in: int
    c_out: int
    kernel: int = 3
    stride: int = 1
    padding: str = "same"

    def __post_init__(self):
        for name in ("batch", "height", "width", "c_in", "c_out", "kernel", "stride"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.padding not in ("same", "valid"):
            raise ShapeError(f"unknown padding {self.padding!r}")

    @property
    def winograd_eligible(self):
        return self.kernel == 3 and self.stride == 1

    @property
    def macs(self):
        return self.batch * self.height * self.width * self.kernel**2 * self.c_in * self.c_out

    def as_dict(self):
        return {
            "batch": self.batch, "height": self.height, "width": self.width,
            "c_in": self.c_in, "c_out": self.c_out, "kernel": self.kernel,
            "stride": self.stride, "padding": self.padding,
        }


def nchw_to_fractal(t):
    """Split channels into ``C1 = ceil(C/32)`` blocks of ``C0 = 32``.

    Missing channels in the last block are zero-filled.
    """
    src = t if isinstance(t, Tensor) else Tensor(t)
    if len(src.shape) != 4 or src.layout is not Layout.NCHW:
        raise ShapeError(f"expected a 4-D NCHW tensor, got {src.layout.value} {src.shape}")
    n, c, h, w = src.shape
    c1 = -(-c // C0)
    padded = np.zeros((n, c1 * C0, h, w), dtype=src.data.dtype)
    if src.dtype is DType.RATIONAL:
        padded[...] = Fraction(0)
    padded[:, :c] = src.data
    out = padded.reshape(n, c1, C0, h, w).transpose(0, 1, 3, 4, 2)
    return Tensor(out, Layout.FRACTAL, src.dtype)


def fractal_to_nchw(t, c):
    src = t if isinstance(t, Tensor) else Tensor(t, Layout.FRACTAL)
    if src.layout is not Layout.FRACTAL:
        raise ShapeError(f"expected FRACTAL layout, got {src.layout.value}")
    n, c1, h, w, c0 = src.shape
    if c < 0 or c > c1 * c0:
        raise ShapeError(f"requested {c} channels but tensor holds {c1 * c0}")
    full = src.data.transpose(0, 1, 4, 2, 3).reshape(n, c1 * c0, h, w)
    return Tensor(full[:, :c], Layout.NCHW, src.dtype)


# ---------------------------------------------------------------------------
# WTNS container


def _rational_to_pairs(values):
    pairs = np.empty((len(values), 2), dtype="<i8")
    for i, v in enumerate(values):
        v = Fraction(v)
        den = v.denominator
        exp = den.bit_length() - 1
        if den != 1 << exp:
            raise ShapeError(f"rational element {v} is not dyadic")
        if not -(2**63) <= v.numerator < 2**63:
            raise ShapeError(f"rational numerator {v.numerator} exceeds i64")
        pairs[i] = (v.numerator, exp)
    return pairs


def _pairs_to_rational(pairs):
    out = np.empty(len(pairs), dtype=object)
    for i, (num, exp) in enumerate(pairs.tolist()):
        out[i] = Fraction(num, 1 << exp) if exp >= 0 else Fraction(num * (1 << -exp))
    return out


def tensor_to_bytes(t):
    header = json.dumps(
        {"dtype": t.dtype.value, "shape": list(t.shape), "layout": t.layout.value},
        separators=(",", ":"),
    ).encode("utf-8")
    if t.dtype is DType.RATIONAL:
        payload = _rational_to_pairs(t.data.reshape(-1)).tobytes()
    else:
        payload = np.ascontiguousarray(t.data, dtype=_NUMPY_DTYPES[t.dtype]).tobytes()
    return MAGIC + struct.pack("<I", len(header)) + header + payload


def tensor_from_bytes(buf):
    if len(buf) < 8:
        raise TensorFormatError("file shorter than the fixed preamble", len(buf))
    if buf[:4] != MAGIC:
        raise TensorFormatError(f"bad magic {buf[:4]!r}", 0)
    (hlen,) = struct.unpack("<I", buf[4:8])
    if 8 + hlen > len(buf):
        raise TensorFormatError(f"header length {hlen} runs past end of file", 4)
    try:
        header = json.loads(buf[8:8 + hlen].decode("utf-8"))
        dtype = DType(header["dtype"])
        layout = Layout(header["layout"])
        shape = tuple(int(d) for d in header["shape"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise TensorFormatError(f"malformed header: {exc}", 8) from exc
    if any(d < 0 for d in shape):
        raise TensorFormatError(f"negative extent in shape {shape}", 8)
    count = int(np.prod(shape, dtype=np.int64))
    itemsize = 16 if dtype is DType.RATIONAL else _NUMPY_DTYPES[dtype].itemsize
    start = 8 + hlen
    payload = buf[start:]
    expected = count * itemsize
    if len(payload) < expected:
        stored = len(payload) // itemsize
        raise TensorFormatError(
            f"truncated payload: header declares {count} elements, {stored} stored",
            start + len(payload),
        )
    if len(payload) > expected:
        raise TensorFormatError(
            f"{len(payload) - expected} trailing bytes after payload", start + expected
        )
    if dtype is DType.RATIONAL:
        pairs = np.frombuffer(payload, dtype="<i8").reshape(count, 2)
        data = _pairs_to_rational(pairs).reshape(shape)
    else:
        data = np.frombuffer(payload, dtype=_NUMPY_DTYPES[dtype]).reshape(shape)
    try:
        return Tensor(data, layout, dtype)
    except ShapeError as exc:
        raise TensorFormatError(f"header/payload mismatch: {exc}", 8) from exc


def atomic_write_bytes(path, data):
    """Write ``data`` to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tensor(t, path):
    atomic_write_bytes(path, tensor_to_bytes(t))


def read_tensor(path):
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())
