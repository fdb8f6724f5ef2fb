# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Semantics match ``_pykernels`` exactly."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor

cnp.import_array()

ctypedef fused num_t:
    cnp.int64_t
    double


def conv2d_direct(num_t[:, :, :, ::1] x, num_t[:, :, :, ::1] w, Py_ssize_t stride):
    cdef Py_ssize_t n_b = x.shape[0], c_in = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t c_out = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h - kh) // stride + 1, wo = (wd - kw) // stride + 1
    cdef Py_ssize_t n, co, oy, ox, ci, ky, kx
    cdef num_t acc
    if num_t is double:
        out_arr = np.zeros((n_b, c_out, ho, wo), dtype=np.float64)
    else:
        out_arr = np.zeros((n_b, c_out, ho, wo), dtype=np.int64)
    cdef num_t[:, :, :, ::1] out = out_arr
    for n in range(n_b):
        for co in range(c_out):
            for oy in range(ho):
                for ox in range(wo):
                    acc = 0
                    for ci in range(c_in):
                        for ky in range(kh):
                            for kx in range(kw):
                                acc = acc + x[n, ci, oy * stride + ky, ox * stride + kx] * w[co, ci, ky, kx]
                    out[n, co, oy, ox] = acc
    return out_arr


def rel_error_grid(const double[::1] values, double mu, const double[::1] scales,
                   double qmin, double qmax):
    cdef Py_ssize_t i, j, n = values.shape[0], g = scales.shape[0]
    cdef double s, v, r, q, total
    out_arr = np.zeros(g, dtype=np.float64)
    cdef double[::1] out = out_arr
    for j in range(g):
        s = scales[j]
        total = 0.0
        for i in range(n):
            v = values[i]
            if v == 0.0:
                continue
            r = (v - mu) / s
            if r >= 0:
                q = floor(r + 0.5)
            else:
                q = -floor(-r + 0.5)
            if q < qmin:
                q = qmin
            elif q > qmax:
                q = qmax
            total += fabs(mu + s * q - v) / fabs(v)
        out[j] = total
    return out_arr


def quantize_shift(const cnp.int64_t[:, ::1] v, const cnp.int64_t[::1] shifts,
                   cnp.int64_t qmin, cnp.int64_t qmax):
    cdef Py_ssize_t i, t, m = v.shape[0], taps = v.shape[1]
    cdef cnp.int64_t k, a, q
    out_arr = np.empty((m, taps), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    for i in range(m):
        for t in range(taps):
            k = shifts[t]
            a = v[i, t]
            if k > 0:
                if a >= 0:
                    q = (a + ((<cnp.int64_t>1) << (k - 1))) >> k
                else:
                    q = -((-a + ((<cnp.int64_t>1) << (k - 1))) >> k)
            elif k == 0:
                q = a
            else:
                q = a << (-k)
            if q < qmin:
                q = qmin
            elif q > qmax:
                q = qmax
            out[i, t] = q
    return out_arr


def tap_accumulate(const cnp.int64_t[:, :, :, ::1] qx, const cnp.int64_t[:, :, ::1] qw):
    cdef Py_ssize_t n_b = qx.shape[0], c_in = qx.shape[1], p = qx.shape[2], taps = qx.shape[3]
    cdef Py_ssize_t c_out = qw.shape[0]
    cdef Py_ssize_t n, co, ci, i, t
    out_arr = np.zeros((n_b, c_out, p, taps), dtype=np.int64)
    cdef cnp.int64_t[:, :, :, ::1] out = out_arr
    for n in range(n_b):
        for co in range(c_out):
            for ci in range(c_in):
                for i in range(p):
                    for t in range(taps):
                        out[n, co, i, t] += qx[n, ci, i, t] * qw[co, ci, t]
    return out_arr
