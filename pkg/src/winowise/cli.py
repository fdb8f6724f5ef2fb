"""``winowise`` command-line interface.

Exit codes: 0 success, 1 verification failure, 2 usage or format error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .conv import direct_conv2d, winograd_conv2d
from .errors import WinowiseError
from .prng import FixtureRNG
from .qerror import DOMAINS, STRATEGIES, all_reports, synthetic_weights, tap_scaled_g
from .quant import (
    CalibState,
    calibrate_tap_scales,
    calibrate_update,
    pow2_round,
    quantized_winograd_conv2d,
    scales_from_maxima,
    uniform_scales,
    winograd_domain_operands,
)
from .tensor import DType, Layout, Tensor, atomic_write_bytes, read_tensor, write_tensor
from .transforms import make_transform_set

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def _dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _ints(text, count, name):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name} must be {count} comma-separated integers") from None
    if len(vals) != count or min(vals) < 1:
        raise UsageError(f"{name} must be {count} comma-separated positive integers")
    return vals


def _load(path, what):
    if not path:
        raise UsageError(f"missing {what} path")
    if not os.path.exists(path):
        raise UsageError(f"{what} file not found: {path}")
    return read_tensor(path)


def _nchw(t):
    if t.layout is Layout.FRACTAL:
        raise UsageError("pass NCHW tensors to the command line tools")
    return np.asarray(t.data)


def _random_operands(spec, dtype, seed):
    n, c, h, w, co = _ints(spec, 5, "--random")
    rng = FixtureRNG(seed)
    if dtype == "f64":
        return rng.uniform((n, c, h, w)), rng.uniform((co, c, 3, 3))
    return rng.int8((n, c, h, w)), rng.int8((co, c, 3, 3))


def _rel_errors(y, ref):
    y = np.asarray(y, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    denom = float(np.abs(ref).max()) if ref.size else 0.0
    diff = np.abs(y - ref)
    if denom == 0.0:
        return (0.0 if not diff.size or diff.max() == 0 else math.inf), 0.0
    return float(diff.max() / denom), float(diff.mean() / (np.abs(ref).mean() or 1.0))


def cmd_conv(args):
    if args.random:
        x, w = _random_operands(args.random, args.dtype, args.seed)
    else:
        w_t = _load(args.weights, "weight")
        x_t = _load(args.input, "input")
        x, w = _nchw(x_t), _nchw(w_t)
    ts = make_transform_set(args.m)
    integer = np.asarray(x).dtype.kind in "iu" and np.asarray(w).dtype.kind in "iu"
    if args.scales:
        if not integer:
            raise UsageError("--scales needs integer input and weights")
        b = args.wino_bits
        if args.scales == "uniform":
            s_b, s_g = uniform_scales(x, w, ts, b, pow2=False)
        else:
            s_b, s_g = calibrate_tap_scales(x, w, ts, b, pow2=args.scales == "tapwise-pow2")
        y = quantized_winograd_conv2d(x, w, ts, s_b, s_g, b, padding=args.padding)
        mode, tol = "quantized", math.inf
    else:
        y = winograd_conv2d(x, w, ts, padding=args.padding)
        mode, tol = ("exact", 0.0) if integer else ("float", 1e-9)
    if args.tolerance is not None:
        tol = args.tolerance
    if args.out:
        out = np.asarray(y)
        dtype = DType.F64 if out.dtype.kind == "f" else DType.I32
        write_tensor(Tensor(out, Layout.NCHW, dtype), args.out)
    status = EXIT_OK
    summary = {"mode": mode, "m": args.m, "shape": list(np.shape(y))}
    if args.verify:
        ref = direct_conv2d(x, w, padding=args.padding)
        max_rel, mean_rel = _rel_errors(y, ref)
        summary.update(max_rel_error=max_rel, mean_rel_error=mean_rel, tolerance=None if math.isinf(tol) else tol)
        if mode == "exact":
            summary["bit_exact"] = bool(np.array_equal(np.asarray(y), np.asarray(ref)))
        if max_rel > tol:
            status = EXIT_VERIFY
        summary["verified"] = status == EXIT_OK
    print(_dump_json(summary), end="")
    return status


def _batches(x, size):
    for start in range(0, x.shape[0], size):
        yield x[start:start + size]


def cmd_calibrate(args):
    if args.random:
        x, w = _random_operands(args.random, "i8", args.seed)
    else:
        x = _nchw(_load(args.input, "input"))
        w = _nchw(_load(args.weights, "weight"))
    if np.asarray(x).dtype.kind not in "iu" or np.asarray(w).dtype.kind not in "iu":
        raise UsageError("calibration needs integer input and weights")
    if not args.out:
        raise UsageError("--out directory is required")
    ts = make_transform_set(args.m)
    t, b = ts.t, args.wino_bits
    sb_state = CalibState.new(t, args.decay)
    for batch in _batches(np.asarray(x), args.batch_size):
        v, _, _ = winograd_domain_operands(batch, w[:1], ts)
        sb_state = calibrate_update(sb_state, v.reshape(-1, t, t))
    _, u, _ = winograd_domain_operands(np.asarray(x)[:1], w, ts)
    sg_state = calibrate_update(CalibState.new(t, args.decay), u.reshape(-1, t, t))
    s_b = scales_from_maxima(sb_state, b, "S_B")
    s_g = scales_from_maxima(sg_state, b, "S_G")
    p_b, p_g = pow2_round(s_b), pow2_round(s_g)
    os.makedirs(args.out, exist_ok=True)
    for name, s in (("S_B", s_b), ("S_G", s_g), ("S_B_pow2", p_b), ("S_G_pow2", p_g)):
        write_tensor(s.to_tensor(), os.path.join(args.out, f"{name}.wtns"))
    summary = {
        "m": args.m, "wino_bits": b, "decay": args.decay, "batches": sb_state.count,
        "input_max": sb_state.maxima.tolist(), "weight_max": sg_state.maxima.tolist(),
        "input_shift": p_b.log2.tolist(), "weight_shift": p_g.log2.tolist(),
    }
    _write_text(os.path.join(args.out, "calibration.json"), _dump_json(summary))
    print(_dump_json({"out": args.out, "batches": sb_state.count}), end="")
    return EXIT_OK


def cmd_quant_error(args):
    ts = make_transform_set(args.m)
    g = ts
    if args.synthetic:
        shape = _ints(args.synthetic, 2, "--synthetic")
        weights = synthetic_weights(shape[0], shape[1], args.seed)
        g = tap_scaled_g(ts)
    else:
        weights = np.asarray(_load(args.weights, "weight").data, dtype=np.float64)
    strategies = STRATEGIES if args.strategy == "all" else (args.strategy,)
    domains = DOMAINS if args.domain == "all" else (args.domain,)
    reports = all_reports(weights, args.bits, g, strategies, domains)
    payload = [r.as_dict() for r in reports]
    text = _dump_json(payload)
    if args.out:
        _write_text(args.out, text)
    if args.csv:
        lines = ["domain,strategy,mean_log2_rel_error"]
        for r in reports:
            lg = r.mean_log2_rel_error
            lines.append(f"{r.domain},{r.strategy},{lg if math.isfinite(lg) else ''}")
        _write_text(args.csv, "\n".join(lines) + "\n")
    print(_dump_json([{"domain": p["domain"], "strategy": p["strategy"],
                       "mean_log2_rel_error": p["mean_log2_rel_error"]} for p in payload]), end="")
    return EXIT_OK


def cmd_simulate(args):
    from .perf import SystemConfig, grid_table, network_sim
    from .perf.network import grid_shapes, layers_from_json, rows_to_csv
    from .perf.sim import breakdown, im2col_layer_sim, layer_sim
    from .tensor import LayerShape

    if args.config:
        if not os.path.exists(args.config):
            raise UsageError(f"config file not found: {args.config}")
        with open(args.config, encoding="utf-8") as fh:
            cfg = SystemConfig.from_json(fh.read())
    else:
        cfg = SystemConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if sum(bool(v) for v in (args.grid, args.layer, args.layers)) != 1:
        raise UsageError("choose exactly one of --grid, --layer, --layers")
    if args.layers:
        if not os.path.exists(args.layers):
            raise UsageError(f"layer file not found: {args.layers}")
        with open(args.layers, encoding="utf-8") as fh:
            try:
                layers = layers_from_json(json.load(fh))
            except json.JSONDecodeError as exc:
                raise UsageError(f"invalid layer JSON: {exc}") from exc
        report = network_sim(layers, cfg)
        if args.out:
            _write_text(args.out, report.to_csv())
        if args.json:
            _write_text(args.json, report.to_json() + "\n")
        print(_dump_json({"layers": len(report.layers), "speedup": report.speedup,
                          "total_cycles": report.total_cycles}), end="")
        return EXIT_OK
    if args.grid:
        shapes = grid_shapes()
    else:
        b, h, w, ci, co = _ints(args.layer, 5, "--layer")
        shapes = [LayerShape(b, h, w, ci, co)]
    rows = grid_table(args.m, cfg, shapes)
    if args.out:
        _write_text(args.out, rows_to_csv(rows))
    if args.breakdown:
        bd_rows = []
        for s in shapes:
            for algo in ("im2col", f"wino_f{args.m}"):
                rep = im2col_layer_sim(s, cfg) if algo == "im2col" else layer_sim(s, algo, cfg)
                bd_rows.append({"batch": s.batch, "height": s.height, "width": s.width, "c_in": s.c_in,
                                "c_out": s.c_out, "algo": algo, "total_cycles": rep.total_cycles,
                                **{f"pct_{k}": v for k, v in breakdown(rep).items()}})
        _write_text(args.breakdown, rows_to_csv(bd_rows))
    if args.json:
        reports = [layer_sim(s, f"wino_f{args.m}", cfg).as_dict() for s in shapes]
        _write_text(args.json, _dump_json(reports))
    print(_dump_json({"cells": len(rows), "min_speedup": min(r["speedup"] for r in rows),
                      "max_speedup": max(r["speedup"] for r in rows)}), end="")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="winowise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--m", type=int, choices=(2, 4), default=4, help="output tile size")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path")

    c = sub.add_parser("conv", help="run a Winograd convolution")
    common(c)
    c.add_argument("--input", help="NCHW input tensor")
    c.add_argument("--weights", help="(C_out, C_in, 3, 3) weight tensor")
    c.add_argument("--random", metavar="N,C,H,W,COUT", help="generate fixture operands instead")
    c.add_argument("--dtype", choices=("f64", "i8"), default="f64", help="fixture element type")
    c.add_argument("--padding", choices=("same", "valid"), default="same")
    c.add_argument("--bits", type=int, default=8)
    c.add_argument("--wino-bits", type=int, choices=(8, 9, 10), default=10)
    c.add_argument("--scales", choices=("uniform", "tapwise", "tapwise-pow2"))
    c.add_argument("--verify", action="store_true", help="compare against direct convolution")
    c.add_argument("--tolerance", type=float, help="max relative error accepted by --verify")
    c.set_defaults(func=cmd_conv)

    k = sub.add_parser("calibrate", help="calibrate tap-wise scales")
    common(k)
    k.add_argument("--input")
    k.add_argument("--weights")
    k.add_argument("--random", metavar="N,C,H,W,COUT")
    k.add_argument("--bits", type=int, default=8)
    k.add_argument("--wino-bits", type=int, choices=(8, 9, 10), default=10)
    k.add_argument("--decay", type=float, default=0.9)
    k.add_argument("--batch-size", type=int, default=1)
    k.set_defaults(func=cmd_calibrate)

    q = sub.add_parser("quant-error", help="weight quantization-error report")
    common(q)
    q.add_argument("--weights")
    q.add_argument("--synthetic", metavar="COUT,CIN", help="tap-scaled synthetic fixture")
    q.add_argument("--strategy", choices=STRATEGIES + ("all",), default="all")
    q.add_argument("--domain", choices=DOMAINS + ("all",), default="all")
    q.add_argument("--bits", type=int, default=8)
    q.add_argument("--csv", help="comparison table path")
    q.set_defaults(func=cmd_quant_error)

    s = sub.add_parser("simulate", help="accelerator performance model")
    s.add_argument("--m", type=int, choices=(2, 4), default=4)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="speedup table CSV")
    s.add_argument("--config", help="SystemConfig JSON")
    s.add_argument("--grid", action="store_true", help="the 72-cell layer grid")
    s.add_argument("--layer", metavar="B,H,W,CIN,COUT")
    s.add_argument("--layers", help="network layer list JSON")
    s.add_argument("--breakdown", help="cycle breakdown CSV")
    s.add_argument("--json", help="full SimReport JSON")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "batch_size", 1) is not None and getattr(args, "batch_size", 1) < 1:
        parser.error("--batch-size must be >= 1")
    try:
        return args.func(args)
    except (UsageError, WinowiseError, OSError, ValueError) as exc:
        print(f"winowise {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
