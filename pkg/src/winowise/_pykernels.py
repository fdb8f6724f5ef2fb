"""Numpy implementations of the compiled kernels in ``_ckernels.pyx``."""
import numpy as np


def conv2d_direct(x, w, stride):
    n_b, c_in, h, wd = x.shape
    c_out, _, kh, kw = w.shape
    ho = (h - kh) // stride + 1
    wo = (wd - kw) // stride + 1
    if x.dtype == object:
        out = np.zeros((n_b, c_out, ho, wo), dtype=object)
        out[...] = 0
    else:
        out = np.zeros((n_b, c_out, ho, wo), dtype=x.dtype)
    # fixed order: channel-major, then kernel tap
    for ci in range(c_in):
        for ky in range(kh):
            for kx in range(kw):
                patch = x[:, ci, ky:ky + stride * (ho - 1) + 1:stride, kx:kx + stride * (wo - 1) + 1:stride]
                out += patch[:, None, :, :] * w[None, :, ci, ky, kx, None, None]
    return out


def rel_error_grid(values, mu, scales, qmin, qmax):
    v = values[values != 0.0]
    out = np.empty(len(scales))
    for j, s in enumerate(scales):
        r = (v - mu) / s
        q = np.clip(np.sign(r) * np.floor(np.abs(r) + 0.5), qmin, qmax)
        out[j] = np.sum(np.abs(mu + s * q - v) / np.abs(v))
    return out


def quantize_shift(v, shifts, qmin, qmax):
    v = np.asarray(v, dtype=np.int64)
    k = np.broadcast_to(np.asarray(shifts, dtype=np.int64), v.shape)
    pos = np.maximum(k, 0)
    half = np.where(pos > 0, np.left_shift(np.int64(1), np.maximum(pos - 1, 0)), 0)
    mag = np.right_shift(np.abs(v) + half, pos)
    down = np.where(v < 0, -mag, mag)
    up = np.left_shift(v, np.maximum(-k, 0))
    return np.clip(np.where(k >= 0, down, up), qmin, qmax)


def tap_accumulate(qx, qw):
    return np.einsum("ncpt,oct->nopt", qx, qw)
