"""Command-line front end.

Units: all variances are in shot-noise units. Alice's thresholds (--la/--ua)
are in amplitude units, Bob's (--lb/--ub) in raw heterodyne-record units.
"""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .channel import ChannelParams, ProtocolParams, record_covariance
from .errors import (NoClonerError, NoCorrelationError, OptimizationError,
                     RegionUnderflowError, UnphysicalStateError)
from .keyrate import keyrate
from .montecarlo import McConfig, simulate_pm, verify
from .optimize import OptimizationSpec, optimize_thresholds, sweep
from .postselection import PostSelectionRegion, postselected_stats

EXIT_INVALID = 2
EXIT_COMPUTE = 3
EXIT_IO = 4

COMPUTE_ERRORS = (UnphysicalStateError, NoCorrelationError, NoClonerError,
                  RegionUnderflowError, OptimizationError, ArithmeticError)

RATE_COLUMNS = ["T", "xi", "V_A", "beta", "L_A", "U_A", "L_B", "U_B", "P_ps", "p_e",
                "I_ab", "chi_ea", "keyrate_raw", "keyrate_clamped", "status"]
VERIFY_COLUMNS = ["statistic", "analytic", "empirical", "std_error", "z", "result"]

# defaults applied after merging the config file and the command line
DEFAULTS = {
    "t": None, "xi": 0.0, "va": 4.0, "beta": 1.0,
    "la": 0.0, "ua": math.inf, "lb": 0.0, "ub": math.inf,
    "t_min": 0.05, "t_max": 1.0, "t_steps": 20, "t_list": None,
    "optimize": False, "optimize_va": False,
    "resolution": 8, "tol": 1e-8, "max_evals": 2000, "n_starts": 4,
    "samples": 1_000_000, "seed": 0, "batch_size": 250_000, "z_max": 4.0,
    "symmetrise": False, "jobs": None, "output": None, "format": "csv",
}


class ConfigError(ValueError):
    pass


def fmt(x):
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.12g}"


def _json_value(x):
    if isinstance(x, str) or x is None:
        return x
    x = float(x)
    if not math.isfinite(x):
        return fmt(x)
    return float(f"{x:.12g}")


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated list of numbers: {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pscvqkd", description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with the same field names as the flags")
    common.add_argument("--output", "-o", default=argparse.SUPPRESS,
                        help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
    common.add_argument("--va", type=float, default=argparse.SUPPRESS,
                        help="Alice's modulation variance V_A (shot-noise units)")
    common.add_argument("--beta", type=float, default=argparse.SUPPRESS,
                        help="reconciliation efficiency in [0, 1]")

    channel = argparse.ArgumentParser(add_help=False)
    channel.add_argument("--t", type=float, default=argparse.SUPPRESS,
                         help="channel transmission T in (0, 1]")
    channel.add_argument("--xi", type=float, default=argparse.SUPPRESS,
                         help="excess noise referred to the channel output (SNU)")

    region = argparse.ArgumentParser(add_help=False)
    for flag, what in (("--la", "Alice lower threshold (amplitude units)"),
                       ("--ua", "Alice upper threshold (amplitude units, 'inf' allowed)"),
                       ("--lb", "Bob lower threshold (raw record units)"),
                       ("--ub", "Bob upper threshold (raw record units, 'inf' allowed)")):
        region.add_argument(flag, type=float, default=argparse.SUPPRESS, help=what)

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--optimize-va", action="store_true", default=argparse.SUPPRESS,
                        help="also optimise the modulation variance")
    search.add_argument("--resolution", type=int, default=argparse.SUPPRESS,
                        help="seed grid points per threshold axis")
    search.add_argument("--tol", type=float, default=argparse.SUPPRESS,
                        help="absolute key-rate tolerance of the local search (bits)")
    search.add_argument("--max-evals", type=int, default=argparse.SUPPRESS)
    search.add_argument("--n-starts", type=int, default=argparse.SUPPRESS)

    sub.add_parser("point", parents=[common, channel, region],
                   help="key rate for one channel and region")
    sub.add_parser("optimize", parents=[common, channel, search],
                   help="optimise the post-selection region for one channel")
    sw = sub.add_parser("sweep", parents=[common, region, search],
                        help="key rate against transmission for several noise levels")
    sw.add_argument("--xi", default=argparse.SUPPRESS,
                    help="comma-separated excess-noise levels")
    sw.add_argument("--t-min", type=float, default=argparse.SUPPRESS)
    sw.add_argument("--t-max", type=float, default=argparse.SUPPRESS)
    sw.add_argument("--t-steps", type=int, default=argparse.SUPPRESS)
    sw.add_argument("--t-list", default=argparse.SUPPRESS,
                    help="comma-separated transmissions (overrides --t-min/max/steps)")
    sw.add_argument("--optimize", action="store_true", default=argparse.SUPPRESS,
                    help="optimise the region at every point")
    sw.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                    help="worker processes (default: $PSCVQKD_JOBS or 1)")
    vf = sub.add_parser("verify", parents=[common, channel, region],
                        help="Monte Carlo check of the kept-ensemble statistics")
    vf.add_argument("--samples", type=int, default=argparse.SUPPRESS)
    vf.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    vf.add_argument("--batch-size", type=int, default=argparse.SUPPRESS)
    vf.add_argument("--z-max", type=float, default=argparse.SUPPRESS)
    vf.add_argument("--symmetrise", action="store_true", default=argparse.SUPPRESS,
                    help="apply random rotations before post-selection")
    return parser


def resolve_config(args):
    """Merge defaults, the optional JSON config file and explicit flags."""
    cfg = dict(DEFAULTS)
    given = vars(args)
    path = given.get("config")
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config field {key!r}")
            cfg[key] = value
    for key, value in given.items():
        if key in DEFAULTS:
            cfg[key] = value
    cfg["command"] = args.command
    if cfg["jobs"] is None:
        cfg["jobs"] = int(os.environ.get("PSCVQKD_JOBS", "1"))
    return cfg


def _float(cfg, key):
    try:
        return float(cfg[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {cfg[key]!r}")


def _protocol(cfg):
    return ProtocolParams(_float(cfg, "va"), _float(cfg, "beta"))


def _channel(cfg):
    if cfg["t"] is None:
        raise ConfigError("--t is required")
    return ChannelParams(_float(cfg, "t"), _float(cfg, "xi"))


def _region(cfg):
    return PostSelectionRegion(_float(cfg, "la"), _float(cfg, "ua"),
                               _float(cfg, "lb"), _float(cfg, "ub"))


def _spec(cfg):
    return OptimizationSpec(resolution=int(cfg["resolution"]), tol=_float(cfg, "tol"),
                            max_evals=int(cfg["max_evals"]), n_starts=int(cfg["n_starts"]),
                            optimize_va=bool(cfg["optimize_va"]))


def _t_grid(cfg):
    if cfg["t_list"] is not None:
        grid = _float_list(cfg["t_list"]) if not isinstance(cfg["t_list"], list) else [
            float(v) for v in cfg["t_list"]]
    else:
        steps = int(cfg["t_steps"])
        if steps < 1:
            raise ConfigError("t_steps must be >= 1")
        t_min, t_max = _float(cfg, "t_min"), _float(cfg, "t_max")
        grid = [t_min] if steps == 1 else [float(t) for t in np.linspace(t_min, t_max, steps)]
    if not grid:
        raise ConfigError("empty transmission grid")
    for t in grid:
        if not 0.0 < t <= 1.0:
            raise ConfigError(f"transmission must lie in (0, 1], got {t}")
    return grid


def _xi_list(cfg):
    xi = cfg["xi"]
    if isinstance(xi, list):
        values = [float(v) for v in xi]
    elif isinstance(xi, (int, float)):
        values = [float(xi)]
    else:
        values = _float_list(xi)
    if not values:
        raise ConfigError("empty noise list")
    for v in values:
        if not v >= 0.0:
            raise ConfigError(f"excess noise must be >= 0, got {v}")
    return values


def rate_record(T, xi, V_A, beta, region, report, status="ok"):
    rec = {"T": T, "xi": xi, "V_A": V_A, "beta": beta}
    if region is not None:
        rec.update(L_A=region.L_A, U_A=region.U_A, L_B=region.L_B, U_B=region.U_B)
    else:
        rec.update(L_A=math.nan, U_A=math.nan, L_B=math.nan, U_B=math.nan)
    if report is not None:
        rec.update(P_ps=report.P_ps, p_e=report.p_e, I_ab=report.I_ab_bits,
                   chi_ea=report.chi_ea_bits, keyrate_raw=report.key_rate,
                   keyrate_clamped=report.key_rate_clamped)
    else:
        rec.update(P_ps=math.nan, p_e=math.nan, I_ab=math.nan, chi_ea=math.nan,
                   keyrate_raw=math.nan, keyrate_clamped=math.nan)
    rec["status"] = status
    return rec


def render(records, columns, fmt_name):
    if fmt_name == "json":
        data = [{c: _json_value(r[c]) for c in columns} for r in records]
        return json.dumps(data, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        writer.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def run(cfg):
    """Execute one command; returns (records, columns)."""
    cmd = cfg["command"]
    p = _protocol(cfg)
    if cmd == "point":
        ch, region = _channel(cfg), _region(cfg)
        report = keyrate(p, ch, region)
        return [rate_record(ch.T, ch.xi, p.V_A, p.beta, region, report)], RATE_COLUMNS
    if cmd == "optimize":
        ch = _channel(cfg)
        res = optimize_thresholds(p, ch, _spec(cfg))
        return [rate_record(ch.T, ch.xi, res.protocol.V_A, p.beta, res.region,
                            res.report)], RATE_COLUMNS
    if cmd == "sweep":
        grid, xis = _t_grid(cfg), _xi_list(cfg)
        optimize = bool(cfg["optimize"])
        region = None if optimize else _region(cfg)
        spec = _spec(cfg)
        rows = sweep(p, xis, grid, spec, optimize=optimize, region=region,
                     jobs=int(cfg["jobs"]))
        return [rate_record(r.T, r.xi, r.V_A, r.beta, r.region, r.report, r.status)
                for r in rows], RATE_COLUMNS
    if cmd == "verify":
        ch, region = _channel(cfg), _region(cfg)
        mc = McConfig(sample_count=int(cfg["samples"]), seed=int(cfg["seed"]),
                      batch_size=int(cfg["batch_size"]), symmetrise=bool(cfg["symmetrise"]))
        analytic = postselected_stats(record_covariance(p, ch), region)
        empirical = simulate_pm(p, ch, region, mc)
        check = verify(analytic, empirical, _float(cfg, "z_max"))
        records = []
        for name in ("P_ps", "V_a", "V_b", "C", "p_e"):
            z = check.z_scores.get(name, math.nan)
            records.append({
                "statistic": name, "analytic": getattr(analytic, name),
                "empirical": empirical.estimates[name], "std_error": empirical.std_errors[name],
                "z": z, "result": "PASS" if abs(z) <= check.z_max else "FAIL"})
        cfg["_passed"] = check.passed
        return records, VERIFY_COLUMNS
    raise ConfigError(f"unknown command {cmd!r}")


def _fail(code, kind, exc):
    json.dump({"error": kind, "type": type(exc).__name__, "message": str(exc)}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        records, columns = run(cfg)
    except COMPUTE_ERRORS as exc:
        return _fail(EXIT_COMPUTE, "computation failed", exc)
    except (ValueError, TypeError) as exc:
        # ConfigError and the parameter checks of the domain types
        return _fail(EXIT_INVALID, "invalid configuration", exc)
    text = render(records, columns, cfg["format"])
    try:
        if cfg["output"]:
            with open(cfg["output"], "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        return _fail(EXIT_IO, "cannot write output", exc)
    if cfg["command"] == "verify" and not cfg.get("_passed", True):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
