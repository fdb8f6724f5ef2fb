"""Worst-case bit growth of 2-D Winograd transforms on signed integers.

A 2-D transform ``T x T^T`` applied to a tile of signed ``n``-bit values is
the linear map ``kron(T, T)`` on the flattened tile. Each output is a linear
form, so its extremes are reached coordinate by coordinate: positive
coefficients pick the largest input, negative ones the smallest.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import UnsupportedParameterError


def integer_scaled(mat):
    """Return ``(int matrix, scale)`` with ``int matrix == scale * mat``."""
    vals = [Fraction(v) for v in np.asarray(mat).flat]
    scale = math.lcm(*(v.denominator for v in vals)) if vals else 1
    arr = np.array([int(v * scale) for v in vals], dtype=object).reshape(np.shape(mat))
    return arr, scale


def signed_bits(lo, hi):
    """Smallest ``b`` such that ``[lo, hi]`` fits in a signed ``b``-bit integer."""
    b = 1
    while lo < -(1 << (b - 1)) or hi > (1 << (b - 1)) - 1:
        b += 1
    return b


def composite(T):
    t = np.asarray(T, dtype=object)
    return np.kron(t, t)


def output_range(T, n):
    """Exact ``(lo, hi)`` of ``kron(T, T) @ x`` over signed ``n``-bit ``x``, per output."""
    k = composite(T)
    qmin, qmax = -(1 << (n - 1)), (1 << (n - 1)) - 1
    lo, hi = [], []
    for row in k:
        pos = sum((c for c in row if c > 0), 0)
        neg = sum((-c for c in row if c < 0), 0)
        hi.append(pos * qmax - neg * qmin)
        lo.append(pos * qmin - neg * qmax)
    return lo, hi


def bit_growth(T, n):
    """Extra bits needed to compute the 2-D transform ``T`` bit-true on ``n``-bit inputs.

    ``T`` must be integer-valued (use :func:`integer_scaled` first for
    transforms with dyadic or other fractional entries).
    """
    if n < 1:
        raise UnsupportedParameterError(f"bit width must be >= 1, got {n}")
    if any(Fraction(v).denominator != 1 for v in np.asarray(T).flat):
        raise UnsupportedParameterError("bit_growth expects an integer-scaled transform")
    lo, hi = output_range(T, n)
    return max(signed_bits(a, b) for a, b in zip(lo, hi)) - n


def exhaustive_bits(T, n, brute=False):
    """Reference for :func:`bit_growth` by enumeration over input values.

    With ``brute=True`` every input tile is evaluated, which is only
    feasible for tiny ``T`` and ``n``. Otherwise each output is maximized
    by enumerating the ``2**n`` values of every coordinate separately.
    """
    k = composite(T).astype(np.int64)
    values = np.arange(-(1 << (n - 1)), 1 << (n - 1), dtype=np.int64)
    if brute:
        lo = np.full(k.shape[0], np.iinfo(np.int64).max)
        hi = np.full(k.shape[0], np.iinfo(np.int64).min)
        for chunk in _batched(itertools.product(values.tolist(), repeat=k.shape[1]), 1 << 14):
            y = np.asarray(chunk, dtype=np.int64) @ k.T
            lo = np.minimum(lo, y.min(axis=0))
            hi = np.maximum(hi, y.max(axis=0))
    else:
        contrib = k[:, :, None] * values[None, None, :]
        lo = contrib.min(axis=2).sum(axis=1)
        hi = contrib.max(axis=2).sum(axis=1)
    return max(signed_bits(int(a), int(b)) for a, b in zip(lo, hi)) - n


def _batched(it, size):
    while True:
        chunk = list(itertools.islice(it, size))
        if not chunk:
            return
        yield chunk


@dataclass(frozen=True)
class BitBudget:
    """Widths for a bit-true integer Winograd layer with ``n``-bit operands."""

    n: int
    input_extra: int
    weight_extra: int
    product_extra: int
    accumulation_extra: int
    output_extra: int

    @property
    def accumulator_bits(self):
        return self.n * 2 + self.product_extra + self.accumulation_extra

    def as_dict(self):
        return {
            "n": self.n,
            "input_extra": self.input_extra,
            "weight_extra": self.weight_extra,
            "product_extra": self.product_extra,
            "accumulation_extra": self.accumulation_extra,
            "output_extra": self.output_extra,
            "accumulator_bits": self.accumulator_bits,
        }


def bit_budget(ts, n=8, c_in=1):
    """Bit budget of every stage of ``ts`` for ``n``-bit inputs and weights.

    The weight transform is evaluated in its integer-scaled form. The
    product stage grows by the sum of the operand extensions, and the
    channel reduction by ``ceil(log2(c_in))``.
    """
    bt, _ = integer_scaled(ts.BT)
    g, _ = integer_scaled(ts.G)
    at, _ = integer_scaled(ts.AT)
    inp = bit_growth(bt, n)
    wt = bit_growth(g, n)
    return BitBudget(
        n=n,
        input_extra=inp,
        weight_extra=wt,
        product_extra=inp + wt,
        accumulation_extra=max(0, math.ceil(math.log2(c_in))) if c_in > 1 else 0,
        output_extra=bit_growth(at, n),
    )
