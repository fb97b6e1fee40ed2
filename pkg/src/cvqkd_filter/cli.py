"""Command-line front end.

Exit codes: 0 success, 1 error, 2 computed but not secure (the report is
still written).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import data, satellite
from .config import ConfigError, RunConfig, load_config
from .errors import CVQKDError, NeverSecure, NoPositiveRate
from .keyrate import _jsonable, keyrate_after_bob
from .optimize import SearchSpec, optimize_alice_gains, optimize_bob_cutoffs, optimize_vmod_gg02
from .params import Detection

EXIT_OK, EXIT_ERROR, EXIT_INSECURE = 0, 1, 2


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def _kv_csv(obj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "value"])
    for k, v in _flatten(_jsonable(obj)):
        w.writerow([k, repr(v) if isinstance(v, float) else ("" if v is None else v)])
    return buf.getvalue()


def _table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _truncation(value):
    if value is None:
        return None
    if value == "auto":
        return "auto"
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("truncation must be an integer or 'auto'") from None
    if n < 2:
        raise argparse.ArgumentTypeError("truncation must be >= 2")
    return n


def _config(args) -> RunConfig:
    return load_config(args.config, {
        "seed": args.seed, "threads": args.threads, "truncation": args.truncation, "delta_snu": args.delta,
    })


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_keyrate(args) -> int:
    cfg = _config(args)
    rep = keyrate_after_bob(cfg.modulation(), cfg.channel(), cfg.detection, cfg.filters(), None,
                            cfg.grid(), cfg.truncation, cfg.threads)
    d = rep.to_dict()
    _emit(_kv_csv(d) if args.format == "csv" else _dumps(d), args.out)
    return EXIT_OK if rep.secure else EXIT_INSECURE


def _spec(cfg, key, default_bounds, threads):
    o = cfg.section("optimize")
    b = [tuple(x) for x in o.get(key, default_bounds)]
    if len(b) == 1:
        b = b * 2
    return SearchSpec(tuple(b), o.get("resolution", 12), o.get("refinements", 3), threads)


def cmd_optimize(args) -> int:
    cfg = _config(args)
    ch, mod, det = cfg.channel(), cfg.modulation(), cfg.detection
    stages = cfg.section("optimize").get("stages", ["alice_gains"])
    gains = cfg.filters().gains
    summary, contours, secure = {}, {}, True
    for stage in ["vmod_gg02", "alice_gains", "bob_cutoffs"]:
        if stage not in stages:
            continue
        if stage == "vmod_gg02":
            spec = _spec(cfg, "vmod_bounds_snu", [[0.5, 20.0], [0.5, 20.0]], cfg.threads)
            try:
                best, rep, contour = optimize_vmod_gg02(ch, det, mod.beta, spec, return_contour=True)
            except NoPositiveRate as e:
                best, rep, contour = e.result
        elif stage == "alice_gains":
            spec = _spec(cfg, "gain_bounds", [[0.0, 0.436], [0.0, 0.436]], cfg.threads)
            res = optimize_alice_gains(mod, ch, det, mod.beta, spec)
            best, rep, contour = res.params, res.report, res.contour
            gains = best
        else:
            spec = _spec(cfg, "cutoff_bounds_snu", [[0.0, 8.95], [0.0, 8.95]], cfg.threads)
            res = optimize_bob_cutoffs(mod, ch, det, gains, mod.beta, spec, cfg.grid(), cfg.truncation)
            best, rep, contour = res.params, res.report, res.contour
        summary[stage] = {"params": list(best), "key_rate": rep.key_rate, "report": rep.to_dict()}
        contours[stage] = contour
        secure = rep.secure
    last = [s for s in ["vmod_gg02", "alice_gains", "bob_cutoffs"] if s in summary][-1]
    if args.format == "csv":
        _emit(_table_csv(["param1", "param2", "key_rate"], contours[last]), args.out)
    else:
        if args.out:
            out = Path(args.out)
            for stage, rows in contours.items():
                p = out.with_name(f"{out.stem}.{stage}.csv")
                p.write_text(_table_csv(["param1", "param2", "key_rate"], rows))
                summary[stage]["contour_csv"] = p.name
        _emit(_dumps({"detection": det.value, "stages": summary}), args.out)
    return EXIT_OK if secure else EXIT_INSECURE


def cmd_simulate(args) -> int:
    cfg = _config(args)
    s = cfg.section("simulate")
    if not s:
        raise ConfigError("simulate.n_samples is required")
    batch = data.simulate_channel(
        cfg.modulation(), cfg.channel(), cfg.detection, s["n_samples"], cfg.seed,
        (s.get("gain_x", 1.0), s.get("gain_p", 1.0)), s.get("v_sn", 1.0), s.get("v_dn", 0.0),
    )
    if args.format == "json":
        summary = {"metadata": batch.metadata(), "n": batch.n, "quadratures": {}}
        for q in ("x", "p"):
            a, b = batch.pairs(q)
            summary["quadratures"][q] = {"n": int(a.size), "cov": np.cov(a, b, bias=True).tolist()}
        _emit(_dumps(summary), args.out)
    elif args.out:
        data.write_batch(args.out, batch)
    else:
        sys.stdout.write(data.batch_to_csv(batch))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    c = cfg.section("calibrate")
    path = args.data or (cfg.path(c["data_csv"]) if "data_csv" in c else None)
    if path is None:
        raise ConfigError("no sample file: pass --data or set calibrate.data_csv")
    side = cfg.path(c["sidecar_json"]) if "sidecar_json" in c else None
    batch = data.read_batch(path, side)
    v_sn = c.get("v_sn", batch.v_sn)
    v_dn = c.get("v_dn", batch.v_dn)
    batch = data.calibrate_shot_noise(batch, v_sn, v_dn, c.get("subtract_dark", True))
    rep = data.calibration_report(batch, c.get("min_samples", data.MIN_GAIN_SAMPLES))
    d = {"calibration": rep.to_dict(), "n": batch.n, "v_sn": v_sn, "v_dn": v_dn,
         "subtract_dark": batch.dark_subtracted, "detection": batch.detection.value}
    _emit(_kv_csv(d) if args.format == "csv" else _dumps(d), args.out)
    return EXIT_OK


def cmd_satellite(args) -> int:
    cfg = _config(args)
    s = cfg.section("satellite")
    path = args.profile or (cfg.path(s["profile_csv"]) if "profile_csv" in s else None)
    if path is None:
        raise ConfigError("no elevation profile: pass --profile or set satellite.profile_csv")
    consts = satellite.LinkConstants(
        s.get("vmod_snu", 8.0), s.get("beta", 0.9), s.get("eta", 0.9), s.get("xi_d_snu", 0.0135),
        Detection(cfg.raw.get("detection", "homodyne")),
        s.get("r_earth_km", satellite.R_EARTH_KM), s.get("l_zenith_km", satellite.L_ZENITH_KM),
    )
    profile = satellite.ElevationProfile.read_csv(path, consts)
    rows = satellite.sweep_keyrates(profile, s.get("optimize_gains", True), threads=cfg.threads)
    thr = args.threshold if args.threshold is not None else s.get("threshold_bits_per_use", 1e-4)
    duty = {}
    for col in ("k_fixed", "k_optimized"):
        try:
            eps = satellite.threshold_crossing(rows, thr, col)
            duty[col] = satellite.duty_cycle_report(eps, consts.r_earth_km, consts.l_zenith_km)
        except NeverSecure:
            duty[col] = None
    if args.format == "csv":
        _emit(_table_csv(satellite.SWEEP_COLUMNS, [r.as_tuple() for r in rows]), args.out)
    else:
        _emit(_dumps({
            "threshold_bits_per_use": thr, "duty_cycle": duty,
            "rows": [dict(zip(satellite.SWEEP_COLUMNS, r.as_tuple())) for r in rows],
        }), args.out)
    return EXIT_OK if duty["k_optimized"] is not None else EXIT_INSECURE


# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that 2 keeps meaning "insecure"."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=["json", "csv"], default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--truncation", type=_truncation, default=None, help="Fock cut-off N or 'auto'")
    common.add_argument("--delta", type=float, default=None, help="discretisation step in SNU")

    p = _Parser(prog="cvqkd-filter", description="CV-QKD key rates with post-selection filters")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("keyrate", parents=[common], help="key rate for one configuration").set_defaults(
        func=cmd_keyrate, default_format="json")
    sub.add_parser("optimize", parents=[common], help="optimise gains, cut-offs or modulation").set_defaults(
        func=cmd_optimize, default_format="json")
    sp = sub.add_parser("calibrate", parents=[common], help="calibration report from a sample file")
    sp.add_argument("--data", help="sample CSV (sidecar JSON next to it)")
    sp.set_defaults(func=cmd_calibrate, default_format="json")
    sub.add_parser("simulate", parents=[common], help="draw a synthetic sample batch").set_defaults(
        func=cmd_simulate, default_format="csv")
    sp = sub.add_parser("satellite", parents=[common], help="key rate against elevation and duty cycle")
    sp.add_argument("--profile", help="elevation profile CSV")
    sp.add_argument("--threshold", type=float, default=None, help="key-rate threshold in bits/use")
    sp.set_defaults(func=cmd_satellite, default_format="json")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except (CVQKDError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
