"""Command-line front end: ``check``, ``simulate``, ``geodesic`` and ``report``.

Exit codes: 0 success or all checks pass, 1 a check fails, 2 inconclusive,
3 configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import defaults
from .benchmarks import by_name
from .conditions import (FAIL, INCONCLUSIVE, PASS, ConditionReport, _jsonable, check_a2, check_a3_nullity,
                         check_geodesic_monotonicity_direct, check_submersion)
from .errors import ConfigError, GeometryError, InsufficientSamples, LeftRegion, MissingArtifacts, NoConvergence
from .geodesics import geodesic_bvp_distance, geodesic_ivp
from .observer import (ObserverConfig, contraction_certificate, fit_decay_rate, scan_gain, simulate)
from .recipes import METRIC_RECIPE_SCHEMA, resolve_metric

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 3
CONDITIONS = ("a2", "a3-nullity", "a3-direct", "submersion")
BENCHMARKS = ("linear", "oscillator", "planar", "circle")
BENCHMARK_PARAMS = {"linear": {"q"}, "oscillator": {"epsilon", "level", "c", "weight"}, "planar": set(), "circle": set()}
DISCLAIMER = ("sampled verification: verdicts hold at the sampled points only and are not a "
              "certificate over the whole region")
CONVEXITY_NOTE = "weak geodesic convexity of the simulation region is user-asserted and not checked"

VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}

JOB_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "benchmark": {"enum": list(BENCHMARKS)},
        "benchmark_params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "level": {"type": "number", "exclusiveMinimum": 0},
                "c": {"type": "number", "exclusiveMinimum": 0},
                "q": {"type": "number", "exclusiveMinimum": 0},
                "weight": {"oneOf": [{"const": "identity"},
                                     {"type": "array", "items": VECTOR, "minItems": 4, "maxItems": 4}]},
            },
        },
        "metric": {"oneOf": [{"type": "string"}, METRIC_RECIPE_SCHEMA]},
        "conditions": {"type": "array", "items": {"enum": list(CONDITIONS)}, "minItems": 1},
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "count": {"type": "integer", "minimum": 1},
                "trials": {"type": "integer", "minimum": 1},
            },
        },
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x0": VECTOR,
                "xhat0": VECTOR,
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "sample_every": {"type": "integer", "minimum": 1},
                "gain": {"oneOf": [{"const": "scan"}, {"type": "number", "exclusiveMinimum": 0}]},
                "gains": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "distance": {"enum": ["geodesic", "constant-metric", "euclidean-bound"]},
                "rate": {"type": "number", "minimum": 0},
                "basin_radius": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "geodesic": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "start": VECTOR,
                "end": VECTOR,
                "velocity": VECTOR,
                "s_end": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["start"],
        },
        "out": {"type": "string"},
    },
}


# configuration

def _vector(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def load_config(path):
    """Read and parse a JSON job file; parse errors carry line and column."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None


def validate_config(cfg):
    validator = jsonschema.Draft202012Validator(JOB_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"field {where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def merged_config(args):
    """Config file overlaid with command-line flags, validated before any computation."""
    cfg = load_config(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if getattr(args, "benchmark", None):
        cfg["benchmark"] = args.benchmark
    if getattr(args, "metric", None):
        cfg["metric"] = args.metric
    if getattr(args, "condition", None):
        cfg["conditions"] = list(args.condition)
    sampling = dict(cfg.get("sampling", {}))
    if args.seed is not None:
        sampling["seed"] = args.seed
    if args.samples is not None:
        sampling["count"] = args.samples
    if sampling:
        cfg["sampling"] = sampling
    if args.tol is not None:
        cfg["tolerance"] = args.tol
    if args.out is not None:
        cfg["out"] = args.out
    if args.command == "simulate":
        sim = dict(cfg.get("simulation", {}))
        for key in ("x0", "xhat0", "gain", "horizon", "dt", "distance"):
            value = getattr(args, key, None)
            if value is not None:
                sim[key] = value
        cfg["simulation"] = sim
    if args.command == "geodesic":
        geo = dict(cfg.get("geodesic", {}))
        for key in ("start", "end", "velocity", "s_end"):
            value = getattr(args, key, None)
            if value is not None:
                geo[key] = value
        if geo:
            cfg["geodesic"] = geo
    validate_config(cfg)
    return cfg


def _benchmark(cfg, required=True):
    name = cfg.get("benchmark")
    if name is None:
        if required:
            raise ConfigError("no benchmark given (use --benchmark or the config key 'benchmark')")
        return None
    params = dict(cfg.get("benchmark_params", {}))
    extra = set(params) - BENCHMARK_PARAMS[name]
    if extra:
        raise ConfigError(f"benchmark {name} does not take parameters {sorted(extra)}")
    return by_name(name, **params)


def _metric(cfg, bench, dim=None):
    spec = cfg.get("metric")
    if spec is None:
        if bench is None:
            raise ConfigError("no metric given")
        spec = next(iter(bench.metrics))
    recipe = {"type": "builtin", "name": spec} if isinstance(spec, str) else spec
    name = recipe.get("name", recipe["type"])
    return name, resolve_metric(recipe, bench, dim)


def _out_dir(cfg):
    out = Path(cfg.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, payload):
    path.write_text(json.dumps(_jsonable(payload), indent=2) + "\n")


# commands

def _run_condition(cond, bench, P, metric_name, cfg):
    sampling = cfg.get("sampling", {})
    seed = int(sampling.get("seed", 0))
    count = int(sampling.get("count", defaults.SAMPLES))
    tol = cfg.get("tolerance")
    opts = bench.check_options(metric_name, cond)
    model, region = bench.model, bench.region
    if cond == "a2":
        if tol is not None:
            opts["q_min"] = tol
        return check_a2(model, P, region, samples=count, seed=seed, **opts)
    if tol is not None:
        opts["tol"] = tol
    if cond == "a3-nullity":
        return check_a3_nullity(model, P, bench.Q, region, samples=count, seed=seed, **opts)
    if cond == "submersion":
        return check_submersion(P, bench.Q, model.h, region, samples=count, seed=seed, **opts)
    trials = int(sampling.get("trials", 200))
    return check_geodesic_monotonicity_direct(P, bench.Q, model.h, region, trials=trials, seed=seed,
                                              gap=bench.gap, **opts)


def cmd_check(cfg):
    bench = _benchmark(cfg)
    conditions = cfg.get("conditions")
    if not conditions:
        raise ConfigError(f"name at least one condition among {list(CONDITIONS)}")
    metric_name, P = _metric(cfg, bench)
    reports = []
    for cond in conditions:
        try:
            rep = _run_condition(cond, bench, P, metric_name, cfg)
        except (GeometryError, np.linalg.LinAlgError) as err:
            rep = ConditionReport(cond, INCONCLUSIVE, math.nan, None, None, 0,
                                  cfg.get("sampling", {}).get("seed", 0), math.nan,
                                  {"error": f"{type(err).__name__}: {err}"})
        reports.append(rep)
        print(f"{cond}: {rep.verdict} (margin {rep.margin:.6g}, {rep.samples} samples)")
    out = _out_dir(cfg)
    _write_json(out / "report.json", {
        "disclaimer": DISCLAIMER,
        "benchmark": bench.name,
        "metric": metric_name,
        "reports": [r.to_dict() for r in reports],
    })
    print(DISCLAIMER)
    verdicts = [r.verdict for r in reports]
    if FAIL in verdicts:
        return EXIT_FAIL
    if INCONCLUSIVE in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _default_rate(bench):
    for key in ("q", "q_kernel", "q_scalar"):
        q = bench.params.get(key)
        if q is not None and np.isfinite(q) and q > 0:
            return q / 4.0
    return 0.0


def cmd_simulate(cfg):
    bench = _benchmark(cfg)
    metric_name, P = _metric(cfg, bench)
    if bench.gap is None:
        raise ConfigError(f"benchmark {bench.name} has no supported output gap for simulation")
    sim = cfg.get("simulation", {})
    seed = int(cfg.get("sampling", {}).get("seed", 0))
    model, region = bench.model, bench.region
    x0 = np.asarray(sim["x0"], float) if "x0" in sim else region.sample(seed, 1)[0]
    if "xhat0" in sim:
        xhat0 = np.asarray(sim["xhat0"], float)
    else:
        xhat0 = x0 + 0.02 * (region.upper - region.lower) * np.where(np.arange(x0.size) % 2 == 0, 1.0, -1.0)
    for label, v in (("x0", x0), ("xhat0", xhat0)):
        if v.size != model.n:
            raise ConfigError(f"{label} must have {model.n} entries, got {v.size}")
        if not region.contains(v):
            raise ConfigError(f"{label}={v.tolist()} lies outside the region {region.name}")
    rate = float(sim.get("rate", _default_rate(bench)))
    distance = sim.get("distance", "constant-metric" if P.is_constant else "geodesic")
    base = ObserverConfig(gain=1.0, basin_radius=sim.get("basin_radius", math.inf), dt=sim.get("dt", 0.01),
                          horizon=sim.get("horizon", 10.0), rate=rate,
                          sample_every=sim.get("sample_every", 10), distance=distance)
    gain = sim.get("gain", "scan")
    gains = sim.get("gains", list(defaults.GAIN_SCAN)) if gain == "scan" else [float(gain)]
    chosen, run, table = scan_gain(model, P, bench.gap, base, x0, xhat0, rate, gains=gains)
    try:
        cert = contraction_certificate(run, rate).to_dict()
    except InsufficientSamples as err:
        cert = {"verdict": INCONCLUSIVE, "rate": rate, "reason": str(err)}
    out = _out_dir(cfg)
    (out / "run.csv").write_text(run.to_csv())
    summary = {
        "benchmark": bench.name,
        "metric": metric_name,
        "gain": chosen if chosen is not None else run.gain,
        "gain_policy": "scan" if gain == "scan" else "fixed",
        "rate": rate,
        "certificate": cert,
        "fitted_decay_rate": fit_decay_rate(run),
        "initial_distance": float(run.distances[0]),
        "basin_radius": base.basin_radius,
        "distance_method": run.method,
        "valid_samples": run.valid_count,
        "missing_samples": run.missing,
        "exit_reason": run.exit_reason,
        "scan": table,
        "note": CONVEXITY_NOTE,
    }
    _write_json(out / "summary.json", summary)
    print(f"gain {summary['gain']}: certificate {cert['verdict']} at rate {rate:.6g}, "
          f"fitted decay rate {summary['fitted_decay_rate']:.6g}")
    if run.distances[0] >= base.basin_radius:
        print("warning: initial distance is not below the basin radius", file=sys.stderr)
    return {PASS: EXIT_OK, FAIL: EXIT_FAIL}.get(cert["verdict"], EXIT_INCONCLUSIVE)


def cmd_geodesic(cfg):
    geo_cfg = cfg.get("geodesic")
    if not geo_cfg:
        raise ConfigError("geodesic command needs a start point (--start) and an end point or velocity")
    start = np.asarray(geo_cfg["start"], float)
    if ("end" in geo_cfg) == ("velocity" in geo_cfg):
        raise ConfigError("give exactly one of end point and initial velocity")
    bench = _benchmark(cfg, required=False)
    _, P = _metric(cfg, bench, dim=start.size)
    if P.dim != start.size:
        raise ConfigError(f"start has {start.size} entries, metric dimension is {P.dim}")
    if "end" in geo_cfg:
        end = np.asarray(geo_cfg["end"], float)
        if end.size != start.size:
            raise ConfigError("start and end must have the same length")
        try:
            length, geo = geodesic_bvp_distance(P, start, end)
        except NoConvergence as err:
            print(f"no convergence: residual {err.residual}")
            return EXIT_FAIL
    else:
        v = np.asarray(geo_cfg["velocity"], float)
        if v.size != start.size:
            raise ConfigError("start and velocity must have the same length")
        geo = geodesic_ivp(P, start, v, float(geo_cfg.get("s_end", 1.0)))
        length = geo.length
    fmt = f"{{:.{defaults.CSV_DIGITS}g}}".format
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s"] + [f"x_{i + 1}" for i in range(start.size)] + ["speed"])
    for s, p, sp in zip(geo.s, geo.points, geo.speed_sq):
        writer.writerow([fmt(s)] + [fmt(v) for v in p] + [fmt(math.sqrt(max(sp, 0.0)))])
    out = _out_dir(cfg)
    (out / "geodesic.csv").write_text(buf.getvalue())
    print(f"{length:.12f}")
    return EXIT_OK


def _fmt_margin(value):
    return value if isinstance(value, str) else f"{value:.6g}"


def cmd_report(cfg):
    out = Path(cfg.get("out", "."))
    report_path, summary_path, run_path = out / "report.json", out / "summary.json", out / "run.csv"
    if not out.is_dir() or not any(p.exists() for p in (report_path, summary_path, run_path)):
        raise MissingArtifacts(f"no report.json, summary.json or run.csv in {out}")
    rows = []
    if report_path.exists():
        report = json.loads(report_path.read_text())
        for r in report["reports"]:
            witness = ""
            if r.get("witness"):
                pt = ", ".join(f"{v:.6g}" for v in r["witness"]["point"])
                witness = f"at ({pt})"
                if r["witness"].get("block"):
                    witness += f" [{r['witness']['block']}]"
            rows.append((r["condition"], r["verdict"], _fmt_margin(r["margin"]), str(r["samples"]), witness))
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        cert = summary["certificate"]
        rows.append(("contraction", cert["verdict"], _fmt_margin(cert.get("rate", "")),
                     str(cert.get("checked", 0)), f"gain {summary['gain']}"))
    header = ("condition", "verdict", "margin", "samples", "witness")
    widths = [max(len(str(row[i])) for row in rows + [header]) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header] + rows]
    text = "\n".join(lines) + "\n"
    if report_path.exists():
        text += DISCLAIMER + "\n"
    (out / "report.txt").write_text(text)
    sys.stdout.write(text)
    if run_path.exists():
        with run_path.open() as fh:
            reader = csv.DictReader(fh)
            data = [f"{row['t']} {row['dist']}" for row in reader
                    if row["valid"] == "1" and math.isfinite(float(row["dist"]))]
        (out / "dist_vs_t.dat").write_text("# t dist\n" + "\n".join(data) + "\n")
    return EXIT_OK


# entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON job file")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--samples", type=int, help="number of region samples")
    common.add_argument("--tol", type=float, help="pass threshold (q_min for a2)")
    common.add_argument("--benchmark", choices=BENCHMARKS)
    common.add_argument("--metric", help="metric name of the benchmark or a builtin")

    parser = argparse.ArgumentParser(prog="geodesic-observer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser("check", parents=[common], help="run condition checks")
    check.add_argument("--condition", action="append", choices=CONDITIONS)
    sim = sub.add_parser("simulate", parents=[common], help="simulate the observer")
    sim.add_argument("--x0", type=_vector)
    sim.add_argument("--xhat0", type=_vector)
    sim.add_argument("--gain", type=float)
    sim.add_argument("--horizon", type=float)
    sim.add_argument("--dt", type=float)
    sim.add_argument("--distance", choices=["geodesic", "constant-metric", "euclidean-bound"])
    geo = sub.add_parser("geodesic", parents=[common], help="compute a geodesic")
    geo.add_argument("--start", type=_vector)
    geo.add_argument("--end", type=_vector)
    geo.add_argument("--velocity", type=_vector)
    geo.add_argument("--s-end", dest="s_end", type=float)
    sub.add_parser("report", parents=[common], help="summarize outputs in --out")
    return parser


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "geodesic": cmd_geodesic, "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = merged_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, MissingArtifacts) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except LeftRegion as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
