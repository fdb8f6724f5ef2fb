import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from winowise.errors import ShapeError, UnsupportedParameterError
from winowise.qerror import (
    GAMMA_GRID,
    ErrorReport,
    all_reports,
    fit_unit,
    pseudo_inverse,
    quant_error_report,
    synthetic_weights,
    tap_scaled_g,
)
from winowise.transforms import make_transform_set

TS4 = make_transform_set(4)


def _penrose(a, ap):
    return [a @ ap @ a - a, ap @ a @ ap - ap, (a @ ap).T - a @ ap, (ap @ a).T - ap @ a]


def test_pinv_examples():
    np.testing.assert_array_equal(pseudo_inverse(np.eye(3)), np.eye(3))
    assert not pseudo_inverse(np.zeros((2, 4))).any()
    at = make_transform_set(2).at_f
    for cond in _penrose(at, pseudo_inverse(at)):
        assert np.abs(cond).max() < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_pinv_penrose_conditions(r, c, seed):
    a = np.random.default_rng(seed).normal(size=(r, c))
    for cond in _penrose(a, pseudo_inverse(a)):
        assert np.abs(cond).max() < 1e-10


def test_gamma_grid():
    assert GAMMA_GRID[0] == 0.5 and GAMMA_GRID[-1] == 8.0 and len(GAMMA_GRID) == 751


def test_fit_unit_degenerate():
    stat, q = fit_unit(np.zeros(9), 8)
    assert stat.gamma is None and not q.any()
    stat, q = fit_unit(np.full(9, 0.3), 8)
    assert stat.gamma is None and stat.sigma == 0.0
    np.testing.assert_array_equal(q, 0.3)


def test_fit_unit_minimizes_over_grid(nprng):
    v = nprng.normal(0, 1, 200)
    stat, q = fit_unit(v, 4)
    assert stat.gamma in GAMMA_GRID
    assert stat.mu == pytest.approx(v.mean())
    best = np.sum(np.abs(q - v) / np.abs(v))
    for g in (0.5, 2.0, 5.0):
        s = g * stat.sigma / 8
        qq = stat.mu + s * np.clip(np.sign((v - stat.mu) / s) * np.floor(np.abs((v - stat.mu) / s) + 0.5), -8, 7)
        assert best <= np.sum(np.abs(qq - v) / np.abs(v)) + 1e-12


@pytest.mark.parametrize("domain", ["spatial", "winograd"])
def test_constant_weights_tapwise_exact(domain):
    f = np.full((4, 3, 3, 3), 0.37)
    rep = quant_error_report(f, "channel_and_tap", domain, 8, TS4)
    assert rep.mean_rel_error == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("strategy", ["layer", "channel", "tap", "channel_and_tap"])
def test_constant_weights_spatial_exact(strategy):
    rep = quant_error_report(np.full((4, 3, 3, 3), -1.5), strategy, "spatial", 8)
    assert rep.mean_rel_error == 0.0
    assert rep.mean_log2_rel_error == -math.inf
    assert rep.as_dict()["mean_log2_rel_error"] is None


def test_unit_counts(nprng):
    f = nprng.normal(size=(4, 5, 3, 3))
    counts = {s: len(quant_error_report(f, s, "winograd", 8, TS4).units) for s in
              ("layer", "channel", "tap", "channel_and_tap")}
    assert counts == {"layer": 1, "channel": 4, "tap": 36, "channel_and_tap": 144}
    assert len(quant_error_report(f, "tap", "spatial").units) == 9


@pytest.mark.parametrize("seed", range(4))
def test_tap_scaled_separation(seed):
    f = synthetic_weights(16, 16, seed)
    g = tap_scaled_g(TS4)
    layer = quant_error_report(f, "layer", "winograd", 8, g).mean_log2_rel_error
    tap = quant_error_report(f, "tap", "winograd", 8, g).mean_log2_rel_error
    both = quant_error_report(f, "channel_and_tap", "winograd", 8, g).mean_log2_rel_error
    assert tap <= layer - 1.0
    assert both <= tap


@pytest.mark.parametrize("seed", range(3))
def test_refinement_helps_on_channel_scaled_weights(seed):
    # per-unit mu and sigma are refit, so finer units are not a superset of
    # the coarse choice; ordering is asserted where channel ranges differ
    r = np.random.default_rng(seed)
    f = r.normal(0, 1, (8, 4, 3, 3)) * (2.0 ** np.arange(8))[:, None, None, None]
    err = {s: quant_error_report(f, s, "spatial", 6).mean_rel_error for s in ("layer", "channel", "channel_and_tap")}
    assert err["channel"] < err["layer"]
    assert err["channel_and_tap"] <= err["channel"] * 1.05


def test_report_json(nprng):
    reps = all_reports(nprng.normal(size=(2, 2, 3, 3)), 8, TS4)
    assert len(reps) == 8
    assert {(r.domain, r.strategy) for r in reps} == {(d, s) for d in ("spatial", "winograd")
                                                     for s in ("layer", "channel", "tap", "channel_and_tap")}
    data = json.loads(reps[0].to_json())
    assert set(data) >= {"strategy", "domain", "n", "mean_log2_rel_error", "units"}
    assert set(data["units"][0]) == {"gamma", "sigma", "mu"}
    assert isinstance(reps[0], ErrorReport)


def test_report_errors(nprng):
    f = nprng.normal(size=(2, 2, 3, 3))
    with pytest.raises(UnsupportedParameterError):
        quant_error_report(f, "bogus")
    with pytest.raises(UnsupportedParameterError):
        quant_error_report(f, "layer", "winograd")
    with pytest.raises(ShapeError):
        quant_error_report(np.ones((2, 2, 5, 5)))


def test_synthetic_weights():
    f = synthetic_weights(8, 4, seed=3)
    assert f.shape == (8, 4, 3, 3)
    assert np.abs(f).min() >= 0.01
    np.testing.assert_array_equal(f, synthetic_weights(8, 4, seed=3))


def test_tap_scaled_g():
    g = tap_scaled_g(TS4)
    np.testing.assert_array_equal(g, np.diag(2.0 ** np.arange(6)) @ TS4.g_f)


def test_pooled_report_weights_by_count(nprng, tmp_path):
    from winowise.qerror import load_weight_archive, pooled_report

    a = nprng.normal(size=(2, 2, 3, 3))
    b = nprng.normal(size=(4, 4, 3, 3))
    ra = quant_error_report(a, "channel")
    rb = quant_error_report(b, "channel")
    pooled = pooled_report([a, b], "channel")
    assert pooled.mean_rel_error == pytest.approx((ra.mean_rel_error * a.size + rb.mean_rel_error * b.size)
                                                  / (a.size + b.size))
    assert len(pooled.units) == 6
    np.savez(tmp_path / "w.npz", conv1=a, conv2=b, fc=np.ones((3, 4)))
    loaded = load_weight_archive(tmp_path / "w.npz")
    assert len(loaded) == 2 and loaded[1].shape == (4, 4, 3, 3)
