"""Command-line front end for duration scans, one-shot replans, and experiments.

Subcommands: scan (classify the feasible-time set of a boundary pair and
write a feasibility band), replan (one projection call, JSON result),
fig1 / heatmap / bench (experiment CSVs with metadata sidecars).

Configuration is a flat ``key = value`` text file; ``#`` starts a comment.
Every key has a default, unknown or duplicate keys are rejected, and flags
override file values. omega and the per-axis CoP bounds default to values
derived from the geometry keys of the same file, so a config that only
changes the foot shape stays self-consistent; setting them explicitly
decouples the scan and replan commands from the gait geometry. All floats
are printed with 17 significant digits, so reruns are byte-identical.

Exit codes: 0 success, 1 bad arguments or config, 2 boundary-state
rejection (the pair sits on the region grid), 3 infeasible warm start.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .gait_sim import (StepConfig, VelocitySignal, _fmt, make_nominal_step,
                       run_bench, run_fig1_scenario, run_heatmap,
                       write_bench_csv, write_fig1_csv, write_heatmap_csv,
                       write_run_metadata)
from .lip_core import ControlBounds, DiagonalState, PendulumParams
from .qp.solver import QpNumericsError
from .replanner import InfeasibleGuess, Replanner, ReplanRequest
from .structure import (BoundaryPair, BoundaryStateError,
                        CertifiedFeasibility, TSetStructure, exhaustive_scan,
                        t_structure)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BOUNDARY = 2
EXIT_INFEASIBLE = 3

SCAN_HEADER = "t,s;feasible,0/1"

_AXIS_NAMES = ("sagittal", "lateral")


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the CLI, one flat namespace.

    Constructed directly the fields are taken as given; parse_config is
    the resolving entry point that derives omega and the bounds from the
    geometry when their keys are absent.
    """

    # step geometry; the gait experiments take pendulum and support
    # polygon from these, not from the keys below
    step_length: float = 0.2
    step_duration: float = 0.9
    com_height: float = 0.9
    foot_length: float = 0.2
    foot_width: float = 0.1
    step_width: float = 0.0
    gravity: float = 9.81
    # pendulum and per-axis CoP bounds for the scan and replan commands
    omega: float = math.sqrt(9.81 / 0.9)
    bound_x_min: float = -0.1
    bound_x_max: float = 0.1
    bound_y_min: float = -0.05
    bound_y_max: float = 0.05
    # patient velocity request
    signal_kind: str = "sinusoid"
    signal_magnitude: float = 1.5
    signal_period: float = 0.9
    signal_duration: float = 0.4
    signal_start: float = 0.0
    # replanning
    qp_nodes: int = 8
    bisect_iters: int = 10
    tick: float = 1e-3
    # experiments
    horizon: float = 10.0
    n_starts: int = 15
    bench_iters: int = 10000
    seed: int = 0
    out_dir: str = "."


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind == "int":
        return int(raw)
    if kind == "str":
        return raw
    return float(raw)


def _validate(cfg: RunConfig) -> None:
    """Re-run the model-level invariants on a merged config."""
    StepConfig(step_length=cfg.step_length, duration=cfg.step_duration,
               com_height=cfg.com_height, foot_length=cfg.foot_length,
               foot_width=cfg.foot_width, step_width=cfg.step_width,
               gravity=cfg.gravity)
    _signal_from(cfg)
    PendulumParams(cfg.omega)
    ControlBounds(cfg.bound_x_min, cfg.bound_x_max)
    ControlBounds(cfg.bound_y_min, cfg.bound_y_max)
    if cfg.qp_nodes < 2:
        raise ValueError(f"qp_nodes must be at least 2, got {cfg.qp_nodes}")
    if cfg.bisect_iters < 1:
        raise ValueError(f"bisect_iters must be at least 1, got {cfg.bisect_iters}")
    if cfg.tick <= 0.0:
        raise ValueError(f"tick must be positive, got {cfg.tick}")
    if cfg.horizon <= 0.0:
        raise ValueError(f"horizon must be positive, got {cfg.horizon}")
    if cfg.n_starts < 1:
        raise ValueError(f"n_starts must be at least 1, got {cfg.n_starts}")
    if cfg.bench_iters < 1:
        raise ValueError(f"bench_iters must be at least 1, got {cfg.bench_iters}")
    if cfg.seed < 0:
        raise ValueError(f"seed must be nonnegative, got {cfg.seed}")


def parse_config(text: str) -> RunConfig:
    """RunConfig from flat key = value text, with derived-key resolution."""
    given: dict[str, object] = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key or not val:
            raise ValueError(f"config line {ln}: expected 'key = value', got {raw!r}")
        if key not in _FIELD_TYPES:
            raise ValueError(f"config line {ln}: unknown key {key!r}")
        if key in given:
            raise ValueError(f"config line {ln}: duplicate key {key!r}")
        try:
            given[key] = _convert(key, val)
        except ValueError:
            raise ValueError(f"config line {ln}: bad {_FIELD_TYPES[key]} "
                             f"value {val!r} for {key}") from None
    base = RunConfig()
    geom = {k: given.get(k, getattr(base, k))
            for k in ("gravity", "com_height", "foot_length", "foot_width")}
    if geom["gravity"] <= 0.0 or geom["com_height"] <= 0.0:
        raise ValueError("gravity and com_height must be positive")
    given.setdefault("omega", math.sqrt(geom["gravity"] / geom["com_height"]))
    given.setdefault("bound_x_min", -0.5 * geom["foot_length"])
    given.setdefault("bound_x_max", 0.5 * geom["foot_length"])
    given.setdefault("bound_y_min", -0.5 * geom["foot_width"])
    given.setdefault("bound_y_max", 0.5 * geom["foot_width"])
    cfg = RunConfig(**given)
    _validate(cfg)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse_config inverts it exactly."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {_fmt(v) if f.type == 'float' else v}")
    return "\n".join(lines) + "\n"


def _signal_from(cfg: RunConfig) -> VelocitySignal:
    return VelocitySignal(cfg.signal_kind, cfg.signal_magnitude,
                          period=cfg.signal_period,
                          duration=cfg.signal_duration,
                          start=cfg.signal_start)


def _step_from(cfg: RunConfig):
    return make_nominal_step(StepConfig(
        step_length=cfg.step_length, duration=cfg.step_duration,
        com_height=cfg.com_height, foot_length=cfg.foot_length,
        foot_width=cfg.foot_width, step_width=cfg.step_width,
        gravity=cfg.gravity))


def _bounds2d(cfg: RunConfig) -> tuple[ControlBounds, ControlBounds]:
    return (ControlBounds(cfg.bound_x_min, cfg.bound_x_max),
            ControlBounds(cfg.bound_y_min, cfg.bound_y_max))


def _json_text(obj) -> str:
    """Deterministic JSON with floats at 17 significant digits."""
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _json_text(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{json.dumps(k)}: {_json_text(obj[k])}" for k in sorted(obj))
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _parse_state(text: str) -> np.ndarray:
    """Axis-major planar state 'x1_sag,x2_sag,x1_lat,x2_lat' -> (2, 2)."""
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"expected 4 comma-separated numbers, got {text!r}")
    vals = [float(p) for p in parts]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError(f"state components must be finite, got {text!r}")
    return np.array([[vals[0], vals[1]], [vals[2], vals[3]]])


def _parse_interval(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"expected 'min,max', got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_grid(text: str) -> np.ndarray:
    return np.array([float(p) for p in text.split(",")])


def _axis_pair(x0: np.ndarray, xf: np.ndarray, axis: int) -> BoundaryPair:
    return BoundaryPair(
        DiagonalState(float(x0[axis, 0]), float(x0[axis, 1])),
        DiagonalState(float(xf[axis, 0]), float(xf[axis, 1])))


def _format_structure(st: TSetStructure) -> str:
    if st.kind == TSetStructure.EMPTY:
        return "Empty"
    if st.kind == TSetStructure.BOUNDED:
        return f"Bounded t_min={_fmt(st.t_min)} t_max={_fmt(st.t_max)}"
    if st.kind == TSetStructure.HALF_LINE:
        tag = "attained" if st.t_min_attained else "infimum"
        return f"HalfLine t_min={_fmt(st.t_min)} ({tag})"
    return (f"TwoComponents t_min={_fmt(st.t_min)} a={_fmt(st.a)} "
            f"b={_fmt(st.b)} resolution={_fmt(st.resolution)}")


def _load_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with the given flags merged on top."""
    if args.config is not None:
        cfg = parse_config(Path(args.config).read_text())
    else:
        cfg = RunConfig()
    over = {}
    for name, val in vars(args).items():
        if name.startswith("cfg_") and val is not None:
            over[name[4:]] = val
    bx = over.pop("bounds_x", None)
    if bx is not None:
        over["bound_x_min"], over["bound_x_max"] = bx
    by = over.pop("bounds_y", None)
    if by is not None:
        over["bound_y_min"], over["bound_y_max"] = by
    if over:
        cfg = replace(cfg, **over)
        _validate(cfg)
    return cfg


def _out_path(args: argparse.Namespace, cfg: RunConfig, default: str) -> Path:
    return Path(args.out) if args.out is not None else Path(cfg.out_dir) / default


def cmd_scan(args: argparse.Namespace) -> None:
    """Classify each axis of the pair and scan a horizon grid."""
    cfg = _load_config(args)
    if args.dt <= 0.0 or args.tmax < args.dt:
        raise ValueError("need dt > 0 and tmax >= dt")
    params = PendulumParams(cfg.omega)
    bounds2d = _bounds2d(cfg)
    x0, xf = args.x0, args.xf
    for axis in range(2):
        check = CertifiedFeasibility((bounds2d[axis], bounds2d[axis]), params,
                                     P=cfg.qp_nodes)
        st = t_structure(_axis_pair(x0, xf, axis), bounds2d[axis], params,
                         feasibility=check, resolution=args.resolution)
        print(f"{_AXIS_NAMES[axis]}: {_format_structure(st)}")
    grid = args.dt * np.arange(1, int(round(args.tmax / args.dt)) + 1)
    planar = CertifiedFeasibility(bounds2d, params, P=cfg.qp_nodes)
    mask = exhaustive_scan(_axis_pair(x0, xf, 0), bounds2d, params, grid,
                           feasibility=lambda _pair, T: planar(x0, xf, T))
    out = _out_path(args, cfg, "scan.csv")
    lines = [SCAN_HEADER]
    lines += [f"{_fmt(t)};{int(ok)}" for t, ok in zip(grid, mask)]
    out.write_text("\n".join(lines) + "\n")
    print(f"scan: {int(mask.sum())} of {grid.size} horizons feasible -> {out}")


def cmd_replan(args: argparse.Namespace) -> None:
    """One projection of t_target onto the feasible set, printed as JSON."""
    cfg = _load_config(args)
    rp = Replanner(_bounds2d(cfg), PendulumParams(cfg.omega), P=cfg.qp_nodes)
    res = rp.project_duration(ReplanRequest(
        args.x0, args.xf, args.t_target, args.t_guess,
        max_iters=cfg.bisect_iters))
    print(_json_text({
        "t_star": res.t_star,
        "target_was_feasible": res.target_was_feasible,
        "iterations_used": res.iterations_used,
        "qp_calls": res.qp_calls,
        "plan": {"nodes": res.plan.nodes,
                 "values_x": res.plan.values_x,
                 "values_y": res.plan.values_y},
    }))


def cmd_fig1(args: argparse.Namespace) -> None:
    """Oscillating-request scenario trace."""
    cfg = _load_config(args)
    step = _step_from(cfg)
    rp = Replanner(step.support_polygon, PendulumParams(step.omega),
                   P=cfg.qp_nodes)
    report = run_fig1_scenario(step, _signal_from(cfg), tick=cfg.tick,
                               replanner=rp)
    out = _out_path(args, cfg, "fig1.csv")
    write_fig1_csv(report, out)
    write_run_metadata(out, cfg.seed, serialize_config(cfg))
    n_ok = int(np.sum(report.feasible))
    print(f"fig1: {report.tick.shape[0]} ticks, {n_ok} target-feasible -> {out}")


def cmd_heatmap(args: argparse.Namespace) -> None:
    """Square-wave disturbance grid, success rates per mode."""
    cfg = _load_config(args)
    step = _step_from(cfg)
    rows = run_heatmap(step, magnitudes=args.magnitudes,
                       durations=args.durations, n_starts=cfg.n_starts,
                       tick=cfg.tick, horizon=cfg.horizon, P=cfg.qp_nodes,
                       max_iters=cfg.bisect_iters, jobs=args.jobs)
    if args.mode != "both":
        rows = [r for r in rows if r.mode == args.mode]
    out = _out_path(args, cfg, "heatmap.csv")
    write_heatmap_csv(rows, out)
    write_run_metadata(out, cfg.seed, serialize_config(cfg))
    runs = sum(r.n_runs for r in rows)
    print(f"heatmap: {len(rows)} rows, {runs} runs -> {out}")


def cmd_bench(args: argparse.Namespace) -> None:
    """Replan-latency benchmark over seeded in-distribution requests."""
    cfg = _load_config(args)
    stats = run_bench(_step_from(cfg), P=cfg.qp_nodes,
                      max_iters=cfg.bisect_iters, n_iters=cfg.bench_iters,
                      seed=cfg.seed)
    out = _out_path(args, cfg, "bench.csv")
    write_bench_csv(stats, out)
    write_run_metadata(out, cfg.seed, serialize_config(cfg))
    sys.stdout.write(out.read_text())


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures on exit code 1 instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


_OVERRIDE_FLAGS = {
    "omega": ("--omega", float, "pendulum natural frequency, 1/s"),
    "qp_nodes": ("--qp-nodes", int, "transcription nodes P per axis"),
    "bisect_iters": ("--bisect-iters", int, "bisection depth N"),
    "tick": ("--tick", float, "control period, s"),
    "horizon": ("--horizon", float, "closed-loop run length, s"),
    "n_starts": ("--n-starts", int, "wave start times per grid cell"),
    "bench_iters": ("--bench-iters", int, "timed replan calls"),
    "seed": ("--seed", int, "rng seed, recorded in metadata"),
    "out_dir": ("--out-dir", str, "directory for default output paths"),
}


def _add_common(p: argparse.ArgumentParser, keys: tuple[str, ...],
                bounds: bool = False) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="flat key = value config file")
    for k in keys:
        flag, typ, help_ = _OVERRIDE_FLAGS[k]
        p.add_argument(flag, dest=f"cfg_{k}", type=typ, default=None,
                       metavar=k.upper(), help=help_)
    if bounds:
        p.add_argument("--bounds-x", dest="cfg_bounds_x", metavar="MIN,MAX",
                       type=_parse_interval, default=None,
                       help="sagittal CoP interval")
        p.add_argument("--bounds-y", dest="cfg_bounds_y", metavar="MIN,MAX",
                       type=_parse_interval, default=None,
                       help="lateral CoP interval")


def _add_pair(p: argparse.ArgumentParser) -> None:
    p.add_argument("--x0", type=_parse_state, required=True,
                   metavar="A,B,C,D", help="initial planar state, axis-major")
    p.add_argument("--xf", type=_parse_state, required=True,
                   metavar="A,B,C,D", help="terminal planar state, axis-major")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lipstep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True,
                               parser_class=_Parser)

    p = sub.add_parser("scan",
                       help="classify the feasible-time set and scan a grid")
    _add_pair(p)
    p.add_argument("--tmax", type=float, default=10.0, help="last horizon, s")
    p.add_argument("--dt", type=float, default=0.01, help="grid step, s")
    p.add_argument("--resolution", type=float, default=1e-4,
                   help="bisection width for split endpoints, s")
    p.add_argument("--out", type=Path, default=None, help="scan CSV path")
    _add_common(p, ("omega", "qp_nodes", "out_dir"), bounds=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("replan",
                       help="project one requested duration, print JSON")
    _add_pair(p)
    p.add_argument("--t-target", type=float, required=True,
                   help="requested step duration, s")
    p.add_argument("--t-guess", type=float, required=True,
                   help="known-feasible warm-start duration, s")
    _add_common(p, ("omega", "qp_nodes", "bisect_iters"), bounds=True)
    p.set_defaults(func=cmd_replan)

    p = sub.add_parser("fig1",
                       help="oscillating-request scenario trace CSV")
    p.add_argument("--out", type=Path, default=None, help="trace CSV path")
    _add_common(p, ("qp_nodes", "tick", "seed", "out_dir"))
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("heatmap",
                       help="disturbance-grid success rates CSV")
    p.add_argument("--out", type=Path, default=None, help="heatmap CSV path")
    p.add_argument("--mode", choices=("naive", "replan", "both"),
                   default="both", help="rows to keep (both modes always run)")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes for grid cells")
    p.add_argument("--magnitudes", type=_parse_grid, default=None,
                   metavar="M1,M2,...", help="velocity multipliers to sweep")
    p.add_argument("--durations", type=_parse_grid, default=None,
                   metavar="D1,D2,...", help="wave durations to sweep, s")
    _add_common(p, ("qp_nodes", "bisect_iters", "tick", "horizon",
                    "n_starts", "seed", "out_dir"))
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("bench",
                       help="replan-latency benchmark CSV")
    p.add_argument("--out", type=Path, default=None, help="stats CSV path")
    _add_common(p, ("qp_nodes", "bisect_iters", "bench_iters", "seed",
                    "out_dir"))
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except BoundaryStateError as e:
        print(f"lipstep: boundary-state rejection: {e}", file=sys.stderr)
        return EXIT_BOUNDARY
    except InfeasibleGuess as e:
        print(f"lipstep: infeasible warm start: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError, QpNumericsError) as e:
        print(f"lipstep: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
