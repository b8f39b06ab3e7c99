"""Command-line surface: configure runs, execute pipelines, emit data files.

A run is described by a JSON config file with nested sections and/or flags
(flags override the file).  Unknown keys are rejected.  Output is CSV or
JSON with a fixed column set per mode; numbers are serialized with 9
significant digits, switching to scientific notation below 1e-4, so output
bytes are reproducible.

Exit codes: 0 success, 1 configuration or validation failure, 2 check-suite
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    a_star_estimate,
    bound_series,
    constants_snapshot,
    long_time_bound,
    regime_constants,
    short_time_bound,
    time_scales,
)
from .checks import run_checks
from .lattice import (
    ChainGeometry,
    arc_enumerate,
    chain_distance,
    derived_distance,
    is_sink,
)
from .moments import basis_vector, build_moment_matrix, discounted_history, fiducial_arcs
from .montecarlo import MAX_DENSE_DIM, eta_mc_grid
from .operators import LocalOperator, local_operator, model_constants

MODES = ("bound", "short", "long", "mc", "check", "astar")


class ConfigError(ValueError):
    """Invalid configuration; the message is anchored to the offending key."""


@dataclass
class RunConfig:
    mode: str
    L: int | None = None
    d: int = 2
    op_p: LocalOperator | None = None
    op_q: LocalOperator | None = None
    p: int = 0
    q_sites: list[int] | str = "all"
    times: list = field(default_factory=list)
    n_samples: int = 2000
    master_seed: int = 1
    out: str | None = None
    fmt: str = "csv"
    signed_axis: bool = False
    meta: bool = False
    threads: int = 1
    corrupt_m_diagonal: bool = False


def _expect_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _parse_matrix(spec, where: str) -> LocalOperator:
    """Row-major matrix of [re, im] pairs, or a {'diag': [...]} shorthand."""
    if isinstance(spec, dict):
        _expect_keys(spec, {"diag"}, where)
        return local_operator(np.diag(np.asarray(spec["diag"], dtype=float)))
    try:
        rows = []
        for row in spec:
            rows.append([complex(re, im) for re, im in row])
        return local_operator(np.array(rows))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected rows of [re, im] pairs ({exc})") from exc


def _parse_times(section, where: str) -> list:
    if isinstance(section, dict):
        _expect_keys(section, {"list", "geometric"}, where)
        if "list" in section and "geometric" in section:
            raise ConfigError(f"{where}: give either 'list' or 'geometric', not both")
        if "geometric" in section:
            sched = section["geometric"]
            _expect_keys(sched, {"start", "stop", "num"}, f"{where}.geometric")
            pts = np.geomspace(sched["start"], sched["stop"], int(sched["num"]))
            out = sorted({int(round(t)) for t in pts})
            return out
        section = section["list"]
    times = []
    for entry in section:
        if entry == "inf":
            times.append(math.inf)
        elif isinstance(entry, (int, float)) and float(entry) == math.inf:
            times.append(math.inf)
        else:
            try:
                t = int(entry)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{where}: bad time entry {entry!r}") from exc
            if t < 0:
                raise ConfigError(f"{where}: negative time {entry}")
            times.append(t)
    if not times:
        raise ConfigError(f"{where}: at least one time point required")
    return times


def load_config(path: str | None, args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(mode="bound")
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        except OSError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        _apply_file(cfg, raw)
    _apply_flags(cfg, args)
    _validate(cfg)
    return cfg


def _apply_file(cfg: RunConfig, raw: dict) -> None:
    _expect_keys(
        raw,
        {"geometry", "operators", "sites", "times", "mode", "mc", "output", "check"},
        "config",
    )
    if "geometry" in raw:
        _expect_keys(raw["geometry"], {"L", "d"}, "geometry")
        cfg.L = int(raw["geometry"]["L"])
        cfg.d = int(raw["geometry"].get("d", 2))
    if "operators" in raw:
        _expect_keys(raw["operators"], {"op_p", "op_q"}, "operators")
        if "op_p" in raw["operators"]:
            cfg.op_p = _parse_matrix(raw["operators"]["op_p"], "operators.op_p")
        if "op_q" in raw["operators"]:
            cfg.op_q = _parse_matrix(raw["operators"]["op_q"], "operators.op_q")
    if "sites" in raw:
        _expect_keys(raw["sites"], {"p", "q"}, "sites")
        cfg.p = int(raw["sites"].get("p", 0))
        q = raw["sites"].get("q", "all")
        cfg.q_sites = "all" if q == "all" else [int(s) for s in q]
    if "times" in raw:
        cfg.times = _parse_times(raw["times"], "times")
    if "mode" in raw:
        cfg.mode = str(raw["mode"])
    if "mc" in raw:
        _expect_keys(raw["mc"], {"n_samples", "master_seed"}, "mc")
        cfg.n_samples = int(raw["mc"].get("n_samples", cfg.n_samples))
        cfg.master_seed = int(raw["mc"].get("master_seed", cfg.master_seed))
    if "check" in raw:
        _expect_keys(raw["check"], {"corrupt_m_diagonal"}, "check")
        cfg.corrupt_m_diagonal = bool(raw["check"].get("corrupt_m_diagonal", False))
    if "output" in raw:
        _expect_keys(raw["output"], {"path", "format"}, "output")
        cfg.out = raw["output"].get("path", cfg.out)
        cfg.fmt = raw["output"].get("format", cfg.fmt)


def _parse_op_flag(text: str, where: str) -> LocalOperator:
    if text.startswith("diag:"):
        values = [float(v) for v in text[len("diag:") :].split(",")]
        return _parse_matrix({"diag": values}, where)
    return _parse_matrix(json.loads(text), where)


def _apply_flags(cfg: RunConfig, args: argparse.Namespace) -> None:
    if args.mode is not None:
        cfg.mode = args.mode
    if args.L is not None:
        cfg.L = args.L
    if args.d is not None:
        cfg.d = args.d
    if args.op_p is not None:
        cfg.op_p = _parse_op_flag(args.op_p, "--op-p")
    if args.op_q is not None:
        cfg.op_q = _parse_op_flag(args.op_q, "--op-q")
    if args.p is not None:
        cfg.p = args.p
    if args.q is not None:
        cfg.q_sites = "all" if args.q == "all" else [int(s) for s in args.q.split(",")]
    if args.times is not None:
        cfg.times = _parse_times(args.times.split(","), "--times")
    if args.t_geom is not None:
        try:
            start, stop, num = args.t_geom.split(":")
        except ValueError as exc:
            raise ConfigError("--t-geom: expected start:stop:num") from exc
        cfg.times = _parse_times(
            {"geometric": {"start": float(start), "stop": float(stop), "num": int(num)}},
            "--t-geom",
        )
    if args.n_samples is not None:
        cfg.n_samples = args.n_samples
    if args.master_seed is not None:
        cfg.master_seed = args.master_seed
    if args.out is not None:
        cfg.out = args.out
    if args.format is not None:
        cfg.fmt = args.format
    cfg.signed_axis = bool(args.signed_axis)
    cfg.meta = bool(args.meta)
    if args.threads is not None:
        cfg.threads = args.threads


def _validate(cfg: RunConfig) -> None:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {cfg.mode!r}")
    if cfg.mode == "check":
        return
    if cfg.L is None:
        raise ConfigError("geometry.L: required")
    geom = geometry(cfg)  # may raise on invalid L, d
    if not 0 <= cfg.p < geom.L:
        raise ConfigError(f"sites.p: {cfg.p} outside [0, {geom.L})")
    if not cfg.times:
        raise ConfigError("times: at least one time point required")
    if cfg.mode in ("bound", "short", "long", "mc"):
        if cfg.op_p is None or cfg.op_q is None:
            raise ConfigError("operators.op_p and operators.op_q: required")
        if cfg.op_p.dim != geom.d or cfg.op_q.dim != geom.d:
            raise ConfigError("operators: dimension must equal geometry d")
        for q in qs_for(cfg, geom):
            if not 0 <= q < geom.L:
                raise ConfigError(f"sites.q: {q} outside [0, {geom.L})")
            if q == cfg.p:
                raise ConfigError("sites.q: probe must differ from support site p")
    if cfg.mode == "mc":
        if geom.d**geom.L > MAX_DENSE_DIM:
            raise ConfigError(
                f"mc mode needs d**L <= {MAX_DENSE_DIM} (got {geom.d**geom.L}); "
                "use mode=bound for larger rings"
            )
        if cfg.n_samples < 2:
            raise ConfigError("mc.n_samples: need at least 2 samples")
        if any(math.isinf(t) for t in cfg.times):
            raise ConfigError("times: 'inf' is only valid for the bound path")


def geometry(cfg: RunConfig) -> ChainGeometry:
    try:
        return ChainGeometry(cfg.L, cfg.d)
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from exc


def qs_for(cfg: RunConfig, geom: ChainGeometry) -> list[int]:
    if cfg.q_sites == "all":
        return [q for q in range(geom.L) if q != cfg.p]
    return list(cfg.q_sites)


def fmt_num(x) -> str:
    """9 significant digits; scientific notation below 1e-4."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf"
    if x == 0:
        return "0"
    if abs(x) < 1e-4:
        return f"{x:.8e}"
    return f"{x:.9g}"


def _json_value(x):
    if isinstance(x, bool):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, (float, np.floating)):
        return float(fmt_num(float(x)))
    return x


def write_rows(path: str | None, columns: list[str], rows: list[list], fmt: str) -> str:
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(fmt_num(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = [dict(zip(columns, map(_json_value, row))) for row in rows]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        raise ConfigError(f"output.format: expected csv or json, got {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def write_meta(cfg: RunConfig, geom: ChainGeometry) -> None:
    if not cfg.meta or cfg.out is None:
        return
    snap = constants_snapshot(cfg.op_p, cfg.op_q, geom)
    payload = {
        "L": geom.L,
        "d": geom.d,
        "r": snap.r,
        "u": snap.u,
        "A": snap.A,
        "B": snap.B,
        "M_cal": snap.M_cal,
        "T1": snap.T1,
        "T2": snap.T2,
    }
    payload = {k: _json_value(v) for k, v in payload.items()}
    with open(cfg.out + ".meta.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _axis_label(cfg: RunConfig, geom: ChainGeometry, q: int) -> int:
    if not cfg.signed_axis:
        return q
    off = (q - cfg.p) % geom.L
    return off if off <= geom.L // 2 else off - geom.L


def cmd_bound(cfg: RunConfig) -> int:
    geom = geometry(cfg)
    qs = qs_for(cfg, geom)
    series = bound_series(cfg.op_p, cfg.op_q, geom, cfg.p, qs, cfg.times)
    rows = []
    for (q, t), val in zip(series.grid, series.values):
        rows.append(
            [
                geom.L,
                geom.d,
                cfg.p,
                _axis_label(cfg, geom, q),
                chain_distance(geom, cfg.p, q),
                t,
                float(val),
            ]
        )
    write_rows(cfg.out, ["L", "d", "p", "q", "D", "t", "eta_max_scaled"], rows, cfg.fmt)
    write_meta(cfg, geom)
    return 0


def cmd_envelope(cfg: RunConfig) -> int:
    geom = geometry(cfg)
    qs = qs_for(cfg, geom)
    consts = regime_constants(cfg.op_p, cfg.op_q, geom)
    model = model_constants(cfg.op_p, geom, cfg.op_q)
    rows = []
    for t in cfg.times:
        for q in qs:
            dist = chain_distance(geom, cfg.p, q)
            if cfg.mode == "short":
                rb = short_time_bound(consts, model, dist, t)
            else:
                rb = long_time_bound(consts, model, geom, dist, t)
            rows.append(
                [
                    geom.L,
                    geom.d,
                    cfg.p,
                    _axis_label(cfg, geom, q),
                    dist,
                    t,
                    rb.value,
                    rb.in_regime,
                ]
            )
    write_rows(
        cfg.out,
        ["L", "d", "p", "q", "D", "t", "bound_scaled", "in_regime"],
        rows,
        cfg.fmt,
    )
    write_meta(cfg, geom)
    return 0


def cmd_mc(cfg: RunConfig) -> int:
    geom = geometry(cfg)
    qs = qs_for(cfg, geom)
    times = [int(t) for t in cfg.times]
    means, stderrs = eta_mc_grid(
        cfg.op_p,
        cfg.op_q,
        geom,
        cfg.p,
        qs,
        times,
        cfg.n_samples,
        cfg.master_seed,
        threads=cfg.threads,
    )
    rows = []
    for ti, t in enumerate(times):
        for qi, q in enumerate(qs):
            rows.append(
                [
                    geom.L,
                    geom.d,
                    cfg.p,
                    _axis_label(cfg, geom, q),
                    chain_distance(geom, cfg.p, q),
                    t,
                    float(means[ti, qi]),
                    float(stderrs[ti, qi]),
                    cfg.n_samples,
                    cfg.master_seed,
                ]
            )
    write_rows(
        cfg.out,
        ["L", "d", "p", "q", "D", "t", "eta_mc_scaled", "stderr", "n_samples", "master_seed"],
        rows,
        cfg.fmt,
    )
    write_meta(cfg, geom)
    return 0


def cmd_check(cfg: RunConfig) -> int:
    geoms = ((4, 2), (5, 2)) if cfg.L is None else ((cfg.L, cfg.d),)
    results = run_checks(
        geoms=geoms,
        op_p=cfg.op_p,
        op_q=cfg.op_q,
        n_samples=cfg.n_samples,
        master_seed=cfg.master_seed,
        corrupt_m_diagonal=cfg.corrupt_m_diagonal,
    )
    lines = []
    for r in results:
        status = "pass" if r.passed else "fail"
        line = f"{r.name}\t{status}\t{fmt_num(r.measured)}\t{fmt_num(r.threshold)}"
        if r.detail:
            line += f"\t{r.detail}"
        lines.append(line)
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if cfg.out is not None:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    return 0 if all(r.passed for r in results) else 2


def cmd_astar(cfg: RunConfig) -> int:
    geom = geometry(cfg)
    # only the survival and move weights enter; operators are irrelevant here
    probe = local_operator(np.diag([1.0] + [0.0] * (geom.d - 1)))
    model = model_constants(probe, geom)
    mm = build_moment_matrix(geom)
    left, _ = fiducial_arcs(geom, cfg.p)
    arcs = arc_enumerate(geom)
    dists = np.array([derived_distance(geom, left, a) for a in arcs])
    nonsink = np.array([not is_sink(geom, a) for a in arcs])
    finite = sorted({int(t) for t in cfg.times if not math.isinf(t) and t > 0})
    if len(finite) != len(cfg.times):
        raise ConfigError("times: astar mode needs positive finite times")
    history = discounted_history(mm, basis_vector(geom, left), finite)
    rows = []
    for t in finite:
        a_vec = history[t]
        for dist in range(geom.L):
            members = nonsink & (dists == dist)
            a_exact = float(a_vec[members].min()) if members.any() else math.nan
            rows.append(
                [
                    geom.L,
                    geom.d,
                    dist,
                    t,
                    a_star_estimate(model, dist, t),
                    a_exact,
                ]
            )
    write_rows(cfg.out, ["L", "d", "D", "t", "a_star", "a_exact"], rows, cfg.fmt)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lrqc",
        description="Correlation-spreading bounds and Monte Carlo oracles "
        "for local random circuits on qudit rings.",
    )
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--L", type=int, help="ring length")
    parser.add_argument("--d", type=int, help="local dimension")
    parser.add_argument("--op-p", help="evolved operator: 'diag:a,b,..' or JSON [re,im] rows")
    parser.add_argument("--op-q", help="probe operator, same syntax as --op-p")
    parser.add_argument("--p", type=int, help="support site of the evolved operator")
    parser.add_argument("--q", help="probe sites: 'all' or comma-separated list")
    parser.add_argument("--times", help="comma-separated steps; 'inf' allowed for bound")
    parser.add_argument("--t-geom", help="geometric schedule start:stop:num")
    parser.add_argument("--n-samples", type=int)
    parser.add_argument("--master-seed", type=int)
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--signed-axis", action="store_true",
                        help="report q as signed offset from p")
    parser.add_argument("--meta", action="store_true",
                        help="write a constants sidecar next to the output")
    parser.add_argument("--threads", type=int,
                        help="worker cap for sampling; results are identical")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        if cfg.mode == "bound":
            return cmd_bound(cfg)
        if cfg.mode in ("short", "long"):
            return cmd_envelope(cfg)
        if cfg.mode == "mc":
            return cmd_mc(cfg)
        if cfg.mode == "check":
            return cmd_check(cfg)
        return cmd_astar(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
