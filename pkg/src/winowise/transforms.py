"""Winograd transformation matrices for F(m x m, 3 x 3).

Matrices are held as exact ``Fraction`` object arrays. Float copies and an
integer-scaled weight transform (for integer-only pipelines) are derived
on construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ShapeError, UnsupportedParameterError

KERNEL = 3


def frac_matrix(rows):
    arr = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            arr[i, j] = Fraction(v)
    return arr


def is_dyadic(value):
    den = Fraction(value).denominator
    return den & (den - 1) == 0


_H = Fraction(1, 2)

PRINTED = {
    2: dict(
        BT=[[1, 0, -1, 0], [0, 1, 1, 0], [0, -1, 1, 0], [0, 1, 0, -1]],
        G=[[1, 0, 0], [_H, _H, _H], [_H, -_H, _H], [0, 0, 1]],
        AT=[[1, 1, 1, 0], [0, 1, -1, -1]],
    ),
    4: dict(
        BT=[
            [4, 0, -5, 0, 1, 0],
            [0, -4, -4, 1, 1, 0],
            [0, 4, -4, -1, 1, 0],
            [0, -2, -1, 2, 1, 0],
            [0, 2, -1, -2, 1, 0],
            [0, 4, 0, -5, 0, 1],
        ],
        # printed as 1/3 * [[3/4,0,0],[-1/2,-1/2,-1/2],...]
        G=[
            [Fraction(v, 3) for v in row]
            for row in (
                [Fraction(3, 4), 0, 0],
                [-_H, -_H, -_H],
                [-_H, _H, -_H],
                [Fraction(1, 8), Fraction(1, 4), _H],
                [Fraction(1, 8), Fraction(-1, 4), _H],
                [0, 0, 3],
            )
        ],
        AT=[
            [1, 1, 1, 1, 1, 0],
            [0, 1, -1, 2, -2, 0],
            [0, 1, 1, 4, 4, 0],
            [0, 1, -1, 8, -8, 1],
        ],
    ),
}

ROOT_POINTS = {
    2: (0, 1, -1),
    4: (0, 1, -1, Fraction(1, 2), Fraction(-1, 2)),
}


@dataclass(frozen=True)
class TransformSet:
    """Exact ``BT`` (t x t), ``G`` (t x 3) and ``AT`` (m x t) for tile size ``m``.

    ``g_int`` is ``G`` with every row multiplied by the smallest positive
    integer ``g_row_scale[i]`` that clears its denominators. Integer
    pipelines transform weights with ``g_int`` and undo the row scaling
    once per tap via :attr:`tap_correction`.
    """

    m: int
    BT: np.ndarray
    G: np.ndarray
    AT: np.ndarray
    source: str = "printed"
    r: int = KERNEL
    g_row_scale: np.ndarray = field(init=False, repr=False)
    g_int: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = self.t
        if self.BT.shape != (t, t) or self.G.shape != (t, self.r) or self.AT.shape != (self.m, t):
            raise ShapeError(
                f"inconsistent shapes BT{self.BT.shape} G{self.G.shape} AT{self.AT.shape} for m={self.m}"
            )
        scale = np.array(
            [math.lcm(*(Fraction(v).denominator for v in row)) for row in self.G], dtype=np.int64
        )
        g_int = np.array(
            [[int(Fraction(v) * int(c)) for v in row] for row, c in zip(self.G, scale)], dtype=np.int64
        )
        object.__setattr__(self, "g_row_scale", scale)
        object.__setattr__(self, "g_int", g_int)
        for arr in (self.BT, self.G, self.AT, scale, g_int):
            arr.setflags(write=False)

    @property
    def t(self):
        return self.m + self.r - 1

    @property
    def taps(self):
        return self.t * self.t

    @property
    def bt_f(self):
        return self.BT.astype(np.float64)

    @property
    def g_f(self):
        return self.G.astype(np.float64)

    @property
    def at_f(self):
        return self.AT.astype(np.float64)

    @property
    def bt_int(self):
        """``BT`` as int64; every supported set has integer input transforms."""
        if not all(Fraction(v).denominator == 1 for v in self.BT.flat):
            raise UnsupportedParameterError("input transform has non-integer entries")
        return self.BT.astype(np.int64)

    @property
    def tap_correction(self):
        """Per-tap factor mapping ``g_int``-domain weights back to ``G``-domain."""
        inv = 1.0 / self.g_row_scale.astype(np.float64)
        return np.outer(inv, inv)

    @property
    def is_dyadic(self):
        return all(is_dyadic(v) for mat in (self.BT, self.G, self.AT) for v in mat.flat)

    def mac_reduction(self):
        """Spatial MACs per output tile over Winograd-domain multiplies."""
        return Fraction(self.m * self.m * self.r * self.r, self.taps)


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_from_roots(roots):
    poly = [Fraction(1)]
    for p in roots:
        poly = _poly_mul(poly, [-Fraction(p), Fraction(1)])
    return poly


def toom_cook(m, points, r=KERNEL):
    """Build a correlation transform set from ``m + r - 2`` finite points plus infinity.

    Rows of ``BT`` are scaled to coprime integers with a positive leading
    entry; the matching factor is moved into the rows of ``G``.
    """
    n = m + r - 1
    pts = [Fraction(p) for p in points]
    if len(pts) != n - 1 or len(set(pts)) != len(pts):
        raise UnsupportedParameterError(f"need {n - 1} distinct finite points, got {points}")
    bt = np.empty((n, n), dtype=object)
    g = np.empty((n, r), dtype=object)
    at = np.empty((m, n), dtype=object)
    for i, p in enumerate(pts):
        others = pts[:i] + pts[i + 1:]
        f_i = math.prod((p - q for q in others), start=Fraction(1))
        row = _poly_from_roots(others) + [Fraction(0)]
        lam = math.lcm(*(v.denominator for v in row))
        row = [v * lam for v in row]
        gcd = math.gcd(*(int(v) for v in row))
        sign = 1 if next(v for v in row if v != 0) > 0 else -1
        lam = Fraction(lam * sign, gcd)
        bt[i, :] = [v * sign / gcd for v in row]
        g[i, :] = [p**k / f_i / lam for k in range(r)]
        at[:, i] = [p**j for j in range(m)]
    bt[n - 1, :] = _poly_from_roots(pts)
    g[n - 1, :] = [Fraction(0)] * (r - 1) + [Fraction(1)]
    at[:, n - 1] = [Fraction(0)] * (m - 1) + [Fraction(1)]
    return TransformSet(m=m, BT=bt, G=g, AT=at, source="toom-cook", r=r)


def _conv_valid_exact(x, f):
    k = f.shape[0]
    out_n = x.shape[0] - k + 1
    out = np.empty((out_n, out_n), dtype=object)
    for i in range(out_n):
        for j in range(out_n):
            out[i, j] = sum((x[i + a, j + b] * f[a, b] for a in range(k) for b in range(k)), Fraction(0))
    return out


def validate_transform_set(ts):
    """True iff the set reproduces valid correlation exactly on every basis pair.

    By bilinearity, agreement on all ``(e_ij, e_kl)`` input/filter pairs
    implies agreement on every input.
    """
    try:
        t, r = ts.t, ts.r
        zero_x = np.full((t, t), Fraction(0), dtype=object)
        zero_f = np.full((r, r), Fraction(0), dtype=object)
        # transform each basis element once
        vx = {}
        for i in range(t):
            for j in range(t):
                x = zero_x.copy()
                x[i, j] = Fraction(1)
                vx[i, j] = (x, ts.BT @ x @ ts.BT.T)
        for k in range(r):
            for l in range(r):
                f = zero_f.copy()
                f[k, l] = Fraction(1)
                u = ts.G @ f @ ts.G.T
                for x, v in vx.values():
                    y = ts.AT @ (u * v) @ ts.AT.T
                    if not np.array_equal(y, _conv_valid_exact(x, f)):
                        return False
        return True
    except (ValueError, TypeError, ArithmeticError):
        return False


@lru_cache(maxsize=None)
def make_transform_set(m):
    """Transform set for ``F(m x m, 3 x 3)``, ``m`` in {2, 4}.

    The printed matrices are used when they validate; otherwise the set is
    regenerated from the root points.
    """
    if m not in PRINTED:
        raise UnsupportedParameterError(f"tile size m={m} not supported (use 2 or 4)")
    spec = PRINTED[m]
    ts = TransformSet(m=m, BT=frac_matrix(spec["BT"]), G=frac_matrix(spec["G"]), AT=frac_matrix(spec["AT"]))
    if validate_transform_set(ts):
        return ts
    regen = toom_cook(m, ROOT_POINTS[m])
    if not validate_transform_set(regen):
        raise UnsupportedParameterError(f"could not construct a valid F{m} transform set")
    return regen


def _as_mats(tile, ts):
    arr = np.asarray(tile)
    if arr.dtype.kind == "f":
        return arr.astype(np.float64), (ts.bt_f, ts.g_f, ts.at_f)
    obj = np.empty(arr.shape, dtype=object)
    obj[...] = [[Fraction(v) for v in row] for row in arr.tolist()] if arr.ndim == 2 else arr
    return obj, (ts.BT, ts.G, ts.AT)


def input_transform(x_tile, ts):
    """``BT x B`` for one t x t input tile."""
    x, (bt, _, _) = _as_mats(x_tile, ts)
    if x.shape != (ts.t, ts.t):
        raise ShapeError(f"input tile must be {ts.t}x{ts.t}, got {x.shape}")
    return bt @ x @ bt.T


def weight_transform(f, ts):
    """``G f G^T`` for one 3 x 3 filter."""
    w, (_, g, _) = _as_mats(f, ts)
    if w.shape != (ts.r, ts.r):
        raise ShapeError(f"filter must be {ts.r}x{ts.r}, got {w.shape}")
    return g @ w @ g.T


def output_transform(yw, ts):
    """``AT Y A`` for one t x t Winograd-domain tile."""
    y, (_, _, at) = _as_mats(yw, ts)
    if y.shape != (ts.t, ts.t):
        raise ShapeError(f"Winograd tile must be {ts.t}x{ts.t}, got {y.shape}")
    return at @ y @ at.T
