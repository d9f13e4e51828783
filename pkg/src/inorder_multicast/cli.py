"""Command-line front end; all tabular output is CSV.

Subcommands: simulate, analyze, sweep, compare, trace. Settings come from a
flat JSON config (``--config``) overridden by flags. Config keys:

    p1, p2                 independent channels, or
    abcd / a, b, c, d      joint pattern probabilities
    scheme                 scheme string; may hold {placeholders} bound by axes
    horizon, seed, warmup  run settings
    drift_limit            stop a run when |state index| exceeds it (null: never)
    buffer_cap             abort (exit 3) when an out-of-order buffer exceeds it
    axes                   sweep grid, {"name": [values, ...]}
    mode                   sweep mode, "analyze" (default) or "simulate"
    preset                 sweep preset, "fixed-sweep" or "nm-family"
    tolerance              compare tolerance (default 0.01)
    script                 trace script, e.g. "u1,u2,both,u1,both"
    out                    output path (stdout when absent)
    workers                parallel processes for simulated sweeps

Exit codes: 0 ok, 2 configuration error, 3 run aborted, 4 comparison failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys

import numpy as np

from .analysis import scheme_tradeoff
from .core import ChannelParams, Undefined, is_defined, joint_probabilities
from .errors import ChainError, ChannelError, ProtocolViolation, SchemeError, SimulationAbort
from .schemes import GRAMMAR, parse_scheme
from .simulator import ScriptedChannel, SimConfig, SimResult, run_batch, run_simulation

log = logging.getLogger("inorder_multicast")

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_COMPARE = 0, 2, 3, 4
METRICS = ("tau", "sigma", "delta", "omega")
COUNTERS = ("X", "Y", "Z", "B", "required")
RUN_KEYS = ("scheme", "p1", "p2", "a", "b", "c", "d")

SIMULATE_COLUMNS = (
    list(RUN_KEYS) + ["horizon", "warmup", "seed"]
    + [f"u{u}_{m}" for u in (1, 2) for m in METRICS + COUNTERS]
    + ["converged", "status", "slots_run", "reason"]
)
ANALYZE_COLUMNS = (
    list(RUN_KEYS) + ["regime"] + [f"u{u}_{m}" for u in (1, 2) for m in METRICS] + ["reason"]
)
COMPARE_COLUMNS = list(RUN_KEYS) + [
    "horizon", "seed", "user", "metric", "simulated", "analytic", "abs_diff", "tolerance", "pass",
]
TRACE_COLUMNS = ["slot", "sent", "outcome", "u1_class", "u2_class", "u1_decoded",
                 "u2_decoded", "r1", "r2", "state", "scheme"]

DEFAULTS = {"horizon": 1_000_000, "seed": 0, "warmup": 0, "tolerance": 0.01,
            "drift_limit": 100_000, "buffer_cap": 10**7, "mode": "analyze", "workers": 1}

PRESETS = {
    "fixed-sweep": {
        "scheme": "fixed:u1",
        "axes": {"p1": [0.2, 0.4, 0.6, 0.8],
                 "p2": [round(x, 2) for x in np.arange(0.05, 1.0001, 0.05)]},
        "note": "sigma2 against p2 under fixed:u1 for four values of p1",
    },
    "nm-family": {
        "scheme": "nm:{N},{N}",
        "p1": 0.6, "p2": 0.6,
        "axes": {"N": list(range(1, 31))},
        "extra_schemes": [f"timeshare:[nm:1,1@{x:.1f},nm:30,30@{1 - x:.1f}]:10000"
                          for x in np.linspace(0.0, 1.0, 11)[1:-1]],
        "note": "(N, N) codes at p1 = p2 = 0.6; time-share points join (1,1) and (30,30)",
    },
}


class ConfigError(ValueError):
    pass


# -- formatting --------------------------------------------------------------


def fmt(value) -> str:
    if value is None or isinstance(value, Undefined):
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _reasons(values) -> str:
    seen = []
    for v in values:
        if isinstance(v, Undefined) and v.reason.value not in seen:
            seen.append(v.reason.value)
    return ";".join(seen)


def write_csv(rows, columns, out):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: fmt(row.get(k)) for k in columns})
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


# -- configuration -----------------------------------------------------------


def load_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        cfg.update(loaded)
    for key in ("scheme", "seed", "horizon", "warmup", "out", "p1", "p2", "tolerance",
                "script", "preset", "mode", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "abcd", None):
        cfg["abcd"] = args.abcd
    if getattr(args, "no_drift_limit", False):
        cfg["drift_limit"] = None
    return cfg


def channel_from(cfg: dict) -> ChannelParams:
    has_p = "p1" in cfg or "p2" in cfg
    joint = cfg.get("abcd")
    if joint is None and all(k in cfg for k in "abcd"):
        joint = [cfg[k] for k in "abcd"]
    if has_p and joint is not None:
        raise ConfigError("give either p1,p2 or a,b,c,d, not both")
    if joint is not None:
        if isinstance(joint, str):
            joint = joint.split(",")
        try:
            values = [float(x) for x in joint]
        except ValueError as exc:
            raise ConfigError(f"bad abcd values {joint!r}") from exc
        if len(values) != 4:
            raise ConfigError("abcd needs four values")
        return ChannelParams(*values)
    if "p1" not in cfg or "p2" not in cfg:
        raise ConfigError("channel missing: give p1 and p2, or abcd")
    return joint_probabilities(float(cfg["p1"]), float(cfg["p2"]))


def _int(cfg, key):
    value = cfg.get(key)
    if value is None:
        return None
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def sim_config_from(cfg: dict, **extra) -> SimConfig:
    return SimConfig(
        scheme=parse_scheme(str(cfg["scheme"])),
        channel=channel_from(cfg),
        horizon=_int(cfg, "horizon"),
        seed=_int(cfg, "seed"),
        warmup=_int(cfg, "warmup"),
        drift_limit=_int(cfg, "drift_limit"),
        buffer_cap=_int(cfg, "buffer_cap"),
        **extra,
    )


def _run_keys(cfg: dict, ch: ChannelParams) -> dict:
    return {"scheme": str(parse_scheme(str(cfg["scheme"]))), "p1": ch.p1, "p2": ch.p2,
            "a": ch.a, "b": ch.b, "c": ch.c, "d": ch.d}


# -- rows --------------------------------------------------------------------


def simulate_row(cfg: dict, result) -> dict:
    row = _run_keys(cfg, result.config.channel)
    row.update(horizon=result.config.horizon, warmup=result.config.warmup, seed=result.config.seed)
    if isinstance(result, SimResult):
        values = []
        for u in (1, 2):
            um = result.report.user(u)
            for m in METRICS:
                row[f"u{u}_{m}"] = getattr(um, m)
                values.append(getattr(um, m))
            for k in COUNTERS:
                row[f"u{u}_{k}"] = getattr(um.counters, k)
        reasons = [r for r in _reasons(values).split(";") if r]
        if any(n.startswith("null-recurrent") for n in result.notes):
            reasons.append("null-recurrent")
        row.update(converged=result.converged, status=result.status,
                   slots_run=result.slots_run, reason=";".join(reasons))
    return row


def analyze_row(cfg: dict, ch: ChannelParams) -> dict:
    scheme = parse_scheme(str(cfg["scheme"]))
    point = scheme_tradeoff(ch, scheme)
    row = _run_keys(cfg, ch)
    row["regime"] = point.regime
    values = []
    for u in (1, 2):
        for m in METRICS:
            v = getattr(point.user(u), m)
            row[f"u{u}_{m}"] = v
            values.append(v)
    row["reason"] = _reasons(values)
    return row


def compare_rows(cfg: dict, result: SimResult, tol: float):
    ch = result.config.channel
    point = scheme_tradeoff(ch, result.config.scheme)
    rows = []
    for u in (1, 2):
        for m in METRICS:
            sim = getattr(result.report.user(u), m)
            ana = getattr(point.user(u), m)
            row = _run_keys(cfg, ch)
            row.update(horizon=result.config.horizon, seed=result.config.seed, user=u,
                       metric=m, simulated=sim, analytic=ana, tolerance=tol)
            if is_defined(sim) and is_defined(ana):
                diff = abs(sim - ana)
                row.update(abs_diff=diff, **{"pass": diff <= tol})
            else:
                row["pass"] = None
            rows.append(row)
    return rows


# -- sweep grid --------------------------------------------------------------

SWEEPABLE = {"p1", "p2", "a", "b", "c", "d", "scheme", "seed", "horizon", "warmup"}


def sweep_points(cfg: dict):
    axes = cfg.get("axes") or {}
    if not isinstance(axes, dict):
        raise ConfigError("axes must map parameter names to value lists")
    template = str(cfg.get("scheme", ""))
    for name, values in axes.items():
        if name not in SWEEPABLE and "{" + name + "}" not in template:
            raise ConfigError(f"sweep axis {name!r} is neither a parameter nor a scheme placeholder")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep axis {name!r} needs a non-empty list")
    names = list(axes)
    for combo in itertools.product(*(axes[n] for n in names)):
        point = dict(cfg)
        bindings = dict(zip(names, combo))
        for n, v in bindings.items():
            if n in SWEEPABLE:
                point[n] = v
        placeholders = {n: v for n, v in bindings.items() if n not in SWEEPABLE}
        if placeholders:
            point["scheme"] = str(point["scheme"]).format(**placeholders)
        yield point
    for scheme in cfg.get("extra_schemes", []):
        point = dict(cfg)
        point["scheme"] = scheme
        yield point


def _apply_preset(cfg: dict) -> dict:
    name = cfg.get("preset")
    if not name:
        return cfg
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    merged = dict(PRESETS[name])
    for key, value in cfg.items():
        if key not in DEFAULTS or cfg[key] != DEFAULTS[key]:
            merged[key] = value
    for key, value in DEFAULTS.items():
        merged.setdefault(key, value)
    return merged


# -- commands ----------------------------------------------------------------


def cmd_simulate(cfg) -> int:
    result = run_simulation(sim_config_from(cfg))
    write_csv([simulate_row(cfg, result)], SIMULATE_COLUMNS, cfg.get("out"))
    return EXIT_OK


def cmd_analyze(cfg) -> int:
    write_csv([analyze_row(cfg, channel_from(cfg))], ANALYZE_COLUMNS, cfg.get("out"))
    return EXIT_OK


def cmd_sweep(cfg) -> int:
    cfg = _apply_preset(cfg)
    points = list(sweep_points(cfg))
    if not points:
        raise ConfigError("sweep produced no points")
    if cfg.get("mode", "analyze") == "simulate":
        configs = [sim_config_from(p) for p in points]
        results = run_batch(configs, workers=_int(cfg, "workers"))
        rows = []
        for p, r in zip(points, results):
            if isinstance(r, Exception):
                row = simulate_row(p, _Failed(configs[len(rows)]))
                row.update(status="error", reason=str(r))
                rows.append(row)
            else:
                rows.append(simulate_row(p, r))
        columns = SIMULATE_COLUMNS
    elif cfg.get("mode") == "analyze":
        rows = [analyze_row(p, channel_from(p)) for p in points]
        columns = ANALYZE_COLUMNS
    else:
        raise ConfigError(f"unknown sweep mode {cfg.get('mode')!r}")
    write_csv(rows, columns, cfg.get("out"))
    if cfg.get("note"):
        meta = {"preset": cfg.get("preset"), "note": cfg["note"], "axes": cfg.get("axes")}
        if cfg.get("out"):
            with open(cfg["out"] + ".meta.json", "w") as fh:
                json.dump(meta, fh, indent=2)
        else:
            print(f"# {json.dumps(meta)}", file=sys.stderr)
    return EXIT_OK


class _Failed:
    """Stand-in result for a sweep point whose run raised."""

    def __init__(self, config):
        self.config = config


def cmd_compare(cfg) -> int:
    tol = float(cfg.get("tolerance", 0.01))
    result = run_simulation(sim_config_from(cfg))
    rows = compare_rows(cfg, result, tol)
    write_csv(rows, COMPARE_COLUMNS, cfg.get("out"))
    failed = [r for r in rows if r["pass"] is False]
    checked = sum(r["pass"] is not None for r in rows)
    print(f"compare {rows[0]['scheme']}: {checked - len(failed)}/{checked} metrics within {tol}",
          file=sys.stderr)
    return EXIT_COMPARE if failed else EXIT_OK


def _decoded_cell(reception, outcome, user) -> str:
    if not outcome.receives(user):
        return "x"
    if reception.packet is None:
        return "-"
    return f"s{reception.packet}"


def cmd_trace(cfg) -> int:
    script = cfg.get("script")
    if script is None:
        raise ConfigError("trace needs a script, e.g. --script u1,u2,both,u1,both")
    try:
        channel = ScriptedChannel.parse(script) if isinstance(script, str) else \
            ScriptedChannel.parse(",".join(script))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    config = SimConfig(scheme=parse_scheme(str(cfg["scheme"])), script=channel,
                       trace_length=len(channel), seed=_int(cfg, "seed"))
    trace = run_simulation(config).trace or []
    rows = []
    for rec in trace:
        row = {"slot": rec.slot, "sent": str(rec.sent), "outcome": rec.outcome.name.lower(),
               "r1": rec.required[0], "r2": rec.required[1], "state": str(rec.state),
               "scheme": str(rec.scheme)}
        for u in (1, 2):
            reception = rec.receptions[u - 1]
            row[f"u{u}_class"] = reception.kind.value if reception else "erased"
            row[f"u{u}_decoded"] = _decoded_cell(reception, rec.outcome, u)
        rows.append(row)
    if cfg.get("out"):
        write_csv(rows, TRACE_COLUMNS, cfg["out"])
    width = max([4] + [len(r["sent"]) for r in rows])
    lines = [f"{'Time':>4} | {'Sent':<{width}} | {'U1':<4} | {'U2':<4}"]
    for r in rows:
        lines.append(f"{r['slot']:>4} | {r['sent']:<{width}} | {r['u1_decoded']:<4} | {r['u2_decoded']:<4}")
    print("\n".join(lines))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "sweep": cmd_sweep,
            "compare": cmd_compare, "trace": cmd_trace}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inorder-multicast", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--scheme", help=f"scheme string: {GRAMMAR}")
        p.add_argument("--p1", type=float)
        p.add_argument("--p2", type=float)
        p.add_argument("--abcd", help="joint pattern probabilities a,b,c,d")
        p.add_argument("--seed", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--warmup", type=int)
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--no-drift-limit", action="store_true",
                       help="never stop a run on state-index drift")
        if name == "compare":
            p.add_argument("--tolerance", type=float)
        if name == "trace":
            p.add_argument("--script", help="comma-separated outcomes: both,u1,u2,none")
        if name == "sweep":
            p.add_argument("--preset", choices=sorted(PRESETS))
            p.add_argument("--mode", choices=["analyze", "simulate"])
            p.add_argument("--workers", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        if "scheme" not in cfg and not (args.command == "sweep" and cfg.get("preset")):
            raise ConfigError(f"no scheme given; grammar: {GRAMMAR}")
        return COMMANDS[args.command](cfg)
    except (ConfigError, ChannelError, SchemeError, ChainError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationAbort, ProtocolViolation) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
