from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from winowise.conv import direct_conv2d, input_transform_tensor, winograd_conv2d
from winowise.errors import ShapeError, UnsupportedParameterError, UnsupportedWorkloadError
from winowise.tensor import DType, Layout, Tensor, nchw_to_fractal
from winowise.transforms import (
    TransformSet,
    frac_matrix,
    input_transform,
    make_transform_set,
    output_transform,
    validate_transform_set,
    weight_transform,
)

F = Fraction


def _naive_conv(x, w, pad):
    x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    n, c, h, wd = x.shape
    co, _, k, _ = w.shape
    out = np.zeros((n, co, h - k + 1, wd - k + 1), dtype=np.int64)
    for a in range(n):
        for o in range(co):
            for i in range(h - k + 1):
                for j in range(wd - k + 1):
                    acc = 0
                    for ci in range(c):
                        for ky in range(k):
                            for kx in range(k):
                                acc += int(x[a, ci, i + ky, j + kx]) * int(w[o, ci, ky, kx])
                    out[a, o, i, j] = acc
    return out


# -- transform sets -----------------------------------------------------------


def test_f2_printed_rows():
    ts = make_transform_set(2)
    assert list(ts.BT[0]) == [1, 0, -1, 0]
    assert ts.AT.tolist() == [[1, 1, 1, 0], [0, 1, -1, -1]]
    assert ts.source == "printed"


@pytest.mark.parametrize("m", [2, 4])
def test_transform_sets_validate(m):
    ts = make_transform_set(m)
    assert ts.t == m + 2
    assert validate_transform_set(ts)


def test_f4_integer_weight_transform():
    ts = make_transform_set(4)
    assert ts.g_row_scale.tolist() == [4, 6, 6, 24, 24, 1]
    assert ts.g_int.tolist() == [[1, 0, 0], [-1, -1, -1], [-1, 1, -1], [1, 2, 4], [1, -2, 4], [0, 0, 1]]


def test_corrupted_set_fails_validation():
    ts = make_transform_set(2)
    bt = ts.BT.copy()
    bt[0, 0] = F(-1)
    bad = TransformSet(m=2, BT=bt, G=ts.G.copy(), AT=ts.AT.copy())
    assert not validate_transform_set(bad)


def test_unsupported_m():
    with pytest.raises(UnsupportedParameterError):
        make_transform_set(3)


@pytest.mark.parametrize("m,ratio", [(2, F(9, 4)), (4, F(4))])
def test_mac_reduction(m, ratio):
    assert make_transform_set(m).mac_reduction() == ratio


# -- single-tile transforms -----------------------------------------------------


def test_input_transform_examples():
    ts = make_transform_set(2)
    ones = input_transform(np.ones((4, 4), dtype=np.int64), ts)
    expected = np.zeros((4, 4), dtype=object)
    expected[1, 1] = 4
    assert np.array_equal(ones, expected)
    assert not input_transform(np.zeros((4, 4), dtype=np.int64), ts).any()
    e00 = np.zeros((4, 4), dtype=np.int64)
    e00[0, 0] = 1
    col = ts.BT[:, 0]
    assert np.array_equal(input_transform(e00, ts), np.outer(col, col))
    with pytest.raises(ShapeError):
        input_transform(np.ones((3, 3)), ts)


def test_weight_transform_examples():
    ts = make_transform_set(2)
    out = weight_transform(np.ones((3, 3), dtype=np.int64), ts)
    g1 = [F(1), F(3, 2), F(1, 2), F(1)]
    assert np.array_equal(out, np.outer(g1, g1))
    assert out[1, 1] == F(9, 4)
    assert not weight_transform(np.zeros((3, 3), dtype=np.int64), ts).any()
    e00 = np.zeros((3, 3), dtype=np.int64)
    e00[0, 0] = 1
    u = weight_transform(e00, ts)
    assert u[0, 0] == 1 and np.array_equal(u, np.outer(ts.G[:, 0], ts.G[:, 0]))


def test_output_transform_examples():
    ts = make_transform_set(2)
    e00 = np.zeros((4, 4), dtype=np.int64)
    e00[0, 0] = 1
    assert output_transform(e00, ts).tolist() == [[1, 0], [0, 0]]
    assert not output_transform(np.zeros((4, 4), dtype=np.int64), ts).any()
    assert output_transform(np.ones((4, 4), dtype=np.int64), ts).tolist() == [[9, -3], [-3, 1]]


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 4]), st.integers(-5, 5), st.integers(-5, 5), st.integers(0, 2**32 - 1))
def test_transform_linearity(m, a, b, seed):
    ts = make_transform_set(m)
    r = np.random.default_rng(seed)
    x, y = r.integers(-50, 50, (2, ts.t, ts.t))
    lhs = input_transform(a * x + b * y, ts)
    assert np.array_equal(lhs, a * input_transform(x, ts) + b * input_transform(y, ts))
    f, g = r.integers(-50, 50, (2, 3, 3))
    assert np.array_equal(weight_transform(a * f + b * g, ts), a * weight_transform(f, ts) + b * weight_transform(g, ts))


# -- direct convolution oracle ----------------------------------------------------


def test_direct_ones():
    out = direct_conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)))
    assert out.shape == (1, 1, 1, 1) and out[0, 0, 0, 0] == 9


def test_direct_impulse_response(rng):
    w = rng.integers((1, 1, 3, 3), -9, 10)
    x = np.zeros((1, 1, 7, 7), dtype=np.int64)
    x[0, 0, 3, 3] = 1
    out = direct_conv2d(x, w, padding="same")
    np.testing.assert_array_equal(out[0, 0, 2:5, 2:5], w[0, 0, ::-1, ::-1])
    assert out.sum() == w.sum()


@pytest.mark.parametrize("padding,pad", [("valid", 0), ("same", 1)])
def test_direct_matches_naive_loop(rng, padding, pad):
    x = rng.int8((2, 3, 6, 5))
    w = rng.int8((2, 3, 3, 3))
    np.testing.assert_array_equal(direct_conv2d(x, w, padding=padding), _naive_conv(x, w, pad))


def test_direct_stride2_and_errors(rng):
    x = rng.int8((1, 2, 7, 7))
    w = rng.int8((1, 2, 3, 3))
    np.testing.assert_array_equal(direct_conv2d(x, w, stride=2), _naive_conv(x, w, 0)[:, :, ::2, ::2])
    with pytest.raises(ShapeError):
        direct_conv2d(x, rng.int8((1, 3, 3, 3)))
    with pytest.raises(UnsupportedWorkloadError):
        direct_conv2d(x, w, stride=3)


# -- Winograd convolution -----------------------------------------------------------


@pytest.mark.parametrize("m", [2, 4])
def test_identity_kernel(m, rng):
    x = rng.uniform((1, 3, 9, 7))
    w = np.zeros((3, 3, 3, 3))
    for c in range(3):
        w[c, c, 1, 1] = 1.0
    np.testing.assert_allclose(winograd_conv2d(x, w, m=m), x, rtol=0, atol=1e-15)


@pytest.mark.parametrize("m", [2, 4])
def test_float_matches_direct(m, rng):
    x = rng.uniform((1, 2, 8, 8))
    w = rng.uniform((3, 2, 3, 3))
    y = winograd_conv2d(x, w, m=m)
    ref = direct_conv2d(x, w, padding="same")
    assert np.abs(y - ref).max() <= 1e-9 * np.abs(ref).max()


@pytest.mark.parametrize("m", [2, 4])
@pytest.mark.parametrize("padding", ["same", "valid"])
def test_integer_exact(m, padding, rng):
    x = rng.int8((2, 5, 11, 6))
    w = rng.int8((4, 5, 3, 3))
    y = winograd_conv2d(x, w, m=m, padding=padding)
    assert y.dtype == np.int64
    np.testing.assert_array_equal(y, direct_conv2d(x, w, padding=padding))


def test_rational_mode(rng):
    x = rng.integers((1, 2, 5, 5), -8, 8).astype(object) * F(1, 4)
    w = rng.integers((1, 2, 3, 3), -8, 8).astype(object) * F(1, 3)
    y = winograd_conv2d(x, w, m=4)
    assert np.array_equal(y, direct_conv2d(x, w, padding="same"))


def test_zero_input():
    y = winograd_conv2d(np.zeros((1, 2, 8, 8)), np.ones((3, 2, 3, 3)))
    assert y.shape == (1, 3, 8, 8) and not y.any()


def test_fractal_input_roundtrip(rng):
    x = rng.int8((1, 40, 6, 6))
    w = rng.int8((8, 40, 3, 3))
    y = winograd_conv2d(nchw_to_fractal(Tensor(x)), w)
    assert y.layout is Layout.FRACTAL
    ref = direct_conv2d(x, w, padding="same")
    np.testing.assert_array_equal(y.data[:, 0, :, :, :8].transpose(0, 3, 1, 2), ref)


def test_tensor_in_tensor_out(rng):
    x = Tensor(rng.uniform((1, 2, 4, 4)))
    y = winograd_conv2d(x, rng.uniform((2, 2, 3, 3)), m=2)
    assert isinstance(y, Tensor) and y.dtype is DType.F64


def test_input_transform_tensor_layout(rng):
    ts = make_transform_set(4)
    x = nchw_to_fractal(Tensor(rng.uniform((1, 3, 8, 8))))
    v = input_transform_tensor(x, ts)
    assert v.layout is Layout.WINO_TAPS
    assert v.shape == (36, 1, 1, 2, 2, 32)
    tile = np.pad(x.data[0, 0, :, :, 1], 1)[0:6, 0:6]
    np.testing.assert_allclose(v.data[:, 0, 0, 0, 0, 1].reshape(6, 6), ts.bt_f @ tile @ ts.bt_f.T, atol=1e-12)


def test_winograd_rejects_bad_workloads(rng):
    with pytest.raises(UnsupportedWorkloadError):
        winograd_conv2d(rng.uniform((1, 1, 8, 8)), rng.uniform((1, 1, 5, 5)))
    with pytest.raises(ShapeError):
        winograd_conv2d(rng.uniform((1, 2, 8, 8)), rng.uniform((1, 1, 3, 3)))


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 4]), st.integers(1, 6), st.integers(1, 6), st.integers(1, 13), st.integers(1, 13),
       st.integers(0, 2**32 - 1))
def test_integer_property(m, c_in, c_out, h, w, seed):
    r = np.random.default_rng(seed)
    x = r.integers(-128, 128, (1, c_in, h, w))
    f = r.integers(-128, 128, (c_out, c_in, 3, 3))
    np.testing.assert_array_equal(winograd_conv2d(x, f, m=m), direct_conv2d(x, f, padding="same"))
