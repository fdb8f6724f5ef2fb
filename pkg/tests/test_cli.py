import csv
import json

import numpy as np
import pytest

from winowise.cli import main
from winowise.conv import direct_conv2d
from winowise.prng import FixtureRNG
from winowise.tensor import DType, Layout, Tensor, read_tensor, write_tensor


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def _write(path, arr, dtype=None):
    write_tensor(Tensor(arr, Layout.NCHW, dtype), path)
    return path


def test_conv_random_float_verify(tmp_path, capsys):
    out = tmp_path / "y.wtns"
    code, summary = _run(capsys, "conv", "--random", "1,2,8,8,3", "--verify", "--out", out)
    assert code == 0
    assert summary["max_rel_error"] <= 1e-9 and summary["verified"]
    assert read_tensor(out).shape == (1, 3, 8, 8)


def test_conv_identity_kernel_files(tmp_path, capsys):
    x = FixtureRNG(2).int8((1, 3, 7, 9))
    w = np.zeros((3, 3, 3, 3), dtype=np.int8)
    for c in range(3):
        w[c, c, 1, 1] = 1
    xi, wi, yo = _write(tmp_path / "x.wtns", x), _write(tmp_path / "w.wtns", w), tmp_path / "y.wtns"
    code, summary = _run(capsys, "conv", "--input", xi, "--weights", wi, "--out", yo, "--m", 2, "--verify")
    assert code == 0 and summary["bit_exact"]
    np.testing.assert_array_equal(read_tensor(yo).data, x)


def test_conv_quantized_modes(capsys):
    for scales in ("uniform", "tapwise", "tapwise-pow2"):
        code, summary = _run(capsys, "conv", "--random", "1,8,8,8,4", "--dtype", "i8", "--scales", scales,
                             "--wino-bits", 10, "--verify")
        assert code == 0 and summary["mode"] == "quantized"
        assert summary["max_rel_error"] < 0.5


def test_conv_verification_failure_exit_code(capsys):
    code, summary = _run(capsys, "conv", "--random", "1,8,8,8,4", "--dtype", "i8", "--scales", "uniform",
                         "--wino-bits", 8, "--verify", "--tolerance", 1e-12)
    assert code == 1 and not summary["verified"]


def test_conv_missing_weight_file(tmp_path, capsys):
    x = _write(tmp_path / "x.wtns", np.zeros((1, 1, 4, 4)))
    assert main(["conv", "--input", str(x), "--weights", str(tmp_path / "nope.wtns")]) == 2
    assert "not found" in capsys.readouterr().err


def test_conv_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.wtns"
    bad.write_bytes(b"WTNS\x05\x00\x00\x00{oops")
    x = _write(tmp_path / "x.wtns", np.zeros((1, 1, 4, 4)))
    assert main(["conv", "--input", str(x), "--weights", str(bad)]) == 2
    assert "byte offset" in capsys.readouterr().err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as err:
        main(["conv", "--m", "3"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2
    assert main(["conv", "--random", "1,2,3"]) == 2


def test_calibrate_single_batch(tmp_path, capsys):
    from winowise.quant import winograd_domain_operands
    from winowise.transforms import make_transform_set

    x = FixtureRNG(4).int8((1, 4, 8, 8))
    w = FixtureRNG(5).int8((2, 4, 3, 3))
    xi, wi = _write(tmp_path / "x.wtns", x), _write(tmp_path / "w.wtns", w)
    out = tmp_path / "cal"
    code, _ = _run(capsys, "calibrate", "--input", xi, "--weights", wi, "--out", out, "--wino-bits", 10,
                   "--batch-size", 4)
    assert code == 0
    v, u, _ = winograd_domain_operands(x, w, make_transform_set(4))
    sb = read_tensor(out / "S_B.wtns").data
    np.testing.assert_allclose(sb, np.abs(v).max(axis=(0, 1, 2)).reshape(6, 6) / 512)
    sg = read_tensor(out / "S_G.wtns").data
    np.testing.assert_allclose(sg, np.abs(u).max(axis=(0, 1)).reshape(6, 6) / 512)
    p2 = read_tensor(out / "S_B_pow2.wtns").data
    assert np.all(np.frexp(p2)[0] == 0.5) and np.all(p2 >= sb)
    summary = json.loads((out / "calibration.json").read_text())
    assert summary["batches"] == 1
    np.testing.assert_array_equal(2.0 ** np.array(summary["input_shift"]), p2)


def test_calibrate_two_batches_running_average(tmp_path, capsys):
    from winowise.quant import winograd_domain_operands
    from winowise.transforms import make_transform_set

    x = FixtureRNG(6).int8((2, 2, 4, 4))
    w = FixtureRNG(7).int8((1, 2, 3, 3))
    xi, wi = _write(tmp_path / "x.wtns", x), _write(tmp_path / "w.wtns", w)
    out = tmp_path / "cal"
    code, summary = _run(capsys, "calibrate", "--input", xi, "--weights", wi, "--out", out, "--m", 2,
                         "--decay", 0.9)
    assert code == 0 and summary["batches"] == 2
    ts = make_transform_set(2)
    m0 = np.abs(winograd_domain_operands(x[:1], w, ts)[0]).max(axis=(0, 1, 2)).reshape(4, 4)
    m1 = np.abs(winograd_domain_operands(x[1:], w, ts)[0]).max(axis=(0, 1, 2)).reshape(4, 4)
    cal = json.loads((out / "calibration.json").read_text())
    np.testing.assert_allclose(cal["input_max"], 0.9 * m0 + 0.1 * m1)


def test_quant_error_all(tmp_path, capsys):
    out, table = tmp_path / "qe.json", tmp_path / "qe.csv"
    code, printed = _run(capsys, "quant-error", "--synthetic", "16,16", "--out", out, "--csv", table)
    assert code == 0 and len(printed) == 8
    reports = json.loads(out.read_text())
    assert len(reports) == 8
    lg = {(r["domain"], r["strategy"]): r["mean_log2_rel_error"] for r in reports}
    assert lg[("winograd", "tap")] <= lg[("winograd", "layer")] - 1.0
    assert len(list(csv.DictReader(table.open()))) == 8


def test_quant_error_constant_weights(tmp_path, capsys):
    w = _write(tmp_path / "w.wtns", np.full((2, 2, 3, 3), 0.25))
    code, printed = _run(capsys, "quant-error", "--weights", w, "--domain", "spatial")
    assert code == 0 and len(printed) == 4
    assert all(p["mean_log2_rel_error"] is None for p in printed)


def test_simulate_grid(tmp_path, capsys):
    out, bd = tmp_path / "grid.csv", tmp_path / "bd.csv"
    code, summary = _run(capsys, "simulate", "--grid", "--out", out, "--breakdown", bd)
    assert code == 0 and summary["cells"] == 72
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 72 and float(max(r["speedup"] for r in rows)) <= 4.0
    assert len(list(csv.DictReader(bd.open()))) == 144


def test_simulate_single_layer(tmp_path, capsys):
    out, js = tmp_path / "one.csv", tmp_path / "one.json"
    code, _ = _run(capsys, "simulate", "--layer", "8,32,32,128,128", "--out", out, "--json", js)
    assert code == 0
    assert len(list(csv.DictReader(out.open()))) == 1
    assert json.loads(js.read_text())[0]["algo"] == "wino_f4"


def test_simulate_network(tmp_path, capsys):
    net = tmp_path / "net.json"
    net.write_text(json.dumps([{"batch": 1, "height": 56, "width": 56, "c_in": 64, "c_out": 64},
                               {"batch": 1, "height": 56, "width": 56, "c_in": 64, "c_out": 256, "kernel": 1}]))
    out = tmp_path / "net.csv"
    code, summary = _run(capsys, "simulate", "--layers", net, "--out", out)
    assert code == 0 and summary["layers"] == 2
    rows = list(csv.DictReader(out.open()))
    assert rows[1]["choice"] == "im2col"


def test_simulate_bad_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{bad")
    assert main(["simulate", "--grid", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"gm_bandwidth": -1}))
    assert main(["simulate", "--grid", "--config", str(cfg)]) == 2
    assert main(["simulate", "--grid", "--layer", "1,2,3,4,5"]) == 2


def test_simulate_deterministic(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 11}))
    outs = []
    for i in range(2):
        p = tmp_path / f"g{i}.csv"
        assert main(["simulate", "--grid", "--config", str(cfg), "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
