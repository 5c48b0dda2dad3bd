"""Command-line front end.

Subcommands:
  run    solve one configuration and write report.json, control.csv,
         reached/desired grid dumps and trace.csv into the output directory
  sweep  run a whole actuator/subregion table and collect a summary CSV
  mlf    evaluate the Mittag-Leffler function (debugging aid)
  check  print controllability diagnostics without running the fixed point

Configurations come from a preset label, a key=value config file, or both
(file keys override the preset, flags override the file).  Everything is
deterministic: no randomness, fixed iteration order, floats printed with 17
significant digits, so identical configurations produce byte-identical
outputs.

Exit codes: 0 converged, 1 numerical failure, 2 not converged, 64 usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import models
from .fode import BlowUpError, NonlinearSpec, TimeMesh, gronwall_time_condition
from .fracops import FracParams, control_mesh, gram_matrix, sample_control
from .hum import HUMProblem, UncontrollableError, fixed_point, simulate_closed_loop
from .mlf import mittag_leffler
from .spectral import (
    Actuator,
    BoundarySegment,
    Rect,
    actuator_coefficients,
    eval_field,
    project_function,
    write_grid_dump,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64

_ENV_OUTDIR = "HUMFRAC_OUTDIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _sanitize(obj):
    """NaN/Inf -> None so reports stay strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# configuration


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key = value file; '#' starts a comment; keys are lowercase."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip().lower()] = val.strip()
    return out


def _parse_function(text: str, arity: int):
    """'name key=val ...' -> builtin NamedFunction."""
    parts = text.split()
    name = parts[0]
    params = {}
    for tok in parts[1:]:
        if "=" not in tok:
            raise UsageError(f"bad function parameter {tok!r} in {text!r}")
        k, v = tok.split("=", 1)
        params[k] = float(v)
    fn = models.builtin(name, **params)
    if fn.arity != arity:
        raise UsageError(f"function {name!r} has arity {fn.arity}, expected {arity}")
    return fn


def _parse_nonlinearity(text: str) -> NonlinearSpec:
    parts = text.split()
    kind = parts[0]
    kv = {}
    for tok in parts[1:]:
        k, v = tok.split("=", 1)
        kv[k.lower()] = float(v)
    if kind == "none":
        return NonlinearSpec.none()
    if kind == "logistic":
        return NonlinearSpec.logistic(
            C=kv.get("c", 1.0),
            Kcap=kv.get("kcap", 1.0),
            l_const=kv.get("l"),
            k_const=kv.get("k"),
        )
    raise UsageError(f"unknown nonlinearity {kind!r}")


def build_problem(cfg: dict[str, str], args: argparse.Namespace) -> HUMProblem:
    """Assemble the problem from preset, config keys and flag overrides."""
    label = getattr(args, "preset", None) or cfg.get("preset")
    if label is not None:
        try:
            base = models.preset(label).problem
        except KeyError as exc:
            raise UsageError(str(exc)) from None
    else:
        base = None

    def pick(key: str, flag_val, conv, default=None):
        if flag_val is not None:
            return conv(flag_val)
        if key in cfg:
            return conv(cfg[key])
        return default

    if base is None:
        required = ("alpha", "t", "omega", "gamma", "actuator", "y0", "y_d_ext")
        missing = [k for k in required if k not in cfg]
        if missing:
            raise UsageError(
                f"no preset given and config lacks keys: {', '.join(missing)}"
            )

    alpha = pick("alpha", getattr(args, "alpha", None), float,
                 base.p.alpha if base else None)
    horizon = pick("t", None, float, base.p.T if base else 2.0)
    strict = bool(
        pick("strict_alpha", getattr(args, "strict_alpha", None) or None,
             lambda v: str(v).lower() in ("1", "true", "yes"), False)
    )
    try:
        p = FracParams(alpha=alpha, T=horizon, strict=strict)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    order = pick("order", getattr(args, "order", None), int,
                 base.order if base else 12)
    steps = pick("steps", getattr(args, "steps", None), int,
                 base.mesh.steps if base else 256)
    grading = pick("grading", None, float, 2.0 / p.alpha)
    control_steps = pick("control_steps", getattr(args, "control_steps", None), int,
                         base.control_steps if base else 512)
    control_grading = pick("control_grading", None, float,
                           base.control_grading if base else 4.0)
    quad_order = pick("quad_order", getattr(args, "quad_order", None), int,
                      base.quad_order if base else 64)
    grid_points = pick("grid_points", getattr(args, "grid_points", None), int,
                       base.grid_points if base else 0)
    eps = pick("eps", getattr(args, "eps", None), float, base.eps if base else 1e-6)
    max_iters = pick("max_iters", getattr(args, "max_iters", None), int,
                     base.max_iters if base else 50)
    reg = pick("reg", getattr(args, "reg", None), float, base.reg if base else 0.0)
    rcond = pick("rcond", getattr(args, "rcond", None), float,
                 base.rcond if base else None)
    relax = pick("relax", getattr(args, "relax", None), float,
                 base.relax if base else 1.0)
    norm = pick("norm", getattr(args, "norm", None), str,
                base.norm if base else "L2")

    if "omega" in cfg:
        vals = [float(v) for v in cfg["omega"].split()]
        omega = Rect(*vals)
    else:
        omega = base.omega
    if "gamma" in cfg:
        parts = cfg["gamma"].split()
        gamma = BoundarySegment(parts[0], float(parts[1]), float(parts[2]))
    else:
        gamma = base.gamma
    if "actuator" in cfg:
        parts = cfg["actuator"].split()
        if parts[0] == "zonal":
            act = Actuator.zonal(Rect(*[float(v) for v in parts[1:5]]))
        elif parts[0] == "pointwise":
            act = Actuator.pointwise(float(parts[1]), float(parts[2]))
        else:
            raise UsageError(f"unknown actuator kind {parts[0]!r}")
    else:
        act = base.act
    y0 = _parse_function(cfg["y0"], 2) if "y0" in cfg else base.y0
    y_d_ext = _parse_function(cfg["y_d_ext"], 2) if "y_d_ext" in cfg else base.y_d_ext
    if "z_d" in cfg:
        if cfg["z_d"].strip() == "trace":
            if gamma.edge == "west":
                z_d = lambda c, _f=y_d_ext: _f(0.0, c)
            elif gamma.edge == "east":
                z_d = lambda c, _f=y_d_ext: _f(np.pi, c)
            elif gamma.edge == "south":
                z_d = lambda c, _f=y_d_ext: _f(c, 0.0)
            else:
                z_d = lambda c, _f=y_d_ext: _f(c, np.pi)
        else:
            z_d = _parse_function(cfg["z_d"], 1)
    else:
        z_d = base.z_d if base else None
    if z_d is None:
        raise UsageError("desired boundary data z_d missing")
    spec = _parse_nonlinearity(cfg["nonlinearity"]) if "nonlinearity" in cfg else (
        base.spec if base else NonlinearSpec.none()
    )

    try:
        return HUMProblem(
            p=p,
            order=order,
            omega=omega,
            gamma=gamma,
            act=act,
            y0=y0,
            y_d_ext=y_d_ext,
            z_d=z_d,
            spec=spec,
            mesh=TimeMesh.graded(p.T, steps, grading),
            control_steps=control_steps,
            control_grading=control_grading,
            quad_order=quad_order,
            grid_points=grid_points,
            eps=eps,
            max_iters=max_iters,
            reg=reg,
            rcond=rcond,
            relax=relax,
            norm=norm,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _config_echo(prob: HUMProblem, label: str | None) -> dict:
    act = prob.act
    if act.kind == "zonal":
        r = act.region
        act_desc = {"kind": "zonal", "rect": [r.x0, r.x1, r.y0, r.y1]}
    else:
        act_desc = {"kind": "pointwise", "point": [act.b1, act.b2]}
    return {
        "preset": label,
        "alpha": prob.p.alpha,
        "T": prob.p.T,
        "order": prob.order,
        "steps": prob.mesh.steps,
        "mesh_grading": prob.mesh.grading,
        "control_steps": prob.control_steps,
        "control_grading": prob.control_grading,
        "quad_order": prob.quad_order,
        "grid_points": prob.pseudo_grid,
        "eps": prob.eps,
        "max_iters": prob.max_iters,
        "reg": prob.reg,
        "rcond": prob.rcond,
        "relax": prob.relax,
        "norm": prob.norm,
        "omega": [prob.omega.x0, prob.omega.x1, prob.omega.y0, prob.omega.y1],
        "gamma": [prob.gamma.edge, prob.gamma.lo, prob.gamma.hi],
        "actuator": act_desc,
        "nonlinearity": prob.spec.kind,
    }


# ---------------------------------------------------------------------------
# output writers


def _write_control_csv(path: Path, times: np.ndarray, values: np.ndarray) -> None:
    lines = ["t,u"]
    for t, v in zip(times, values):
        lines.append(f"{_fmt(t)},{_fmt(v)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_trace_csv(path: Path, prob: HUMProblem, reached, samples: int = 129) -> None:
    coords = np.linspace(prob.gamma.lo, prob.gamma.hi, samples)
    x, y = prob.gamma.points(coords)
    vals = eval_field(reached, np.column_stack([x, y]))
    lines = ["s,reached,desired"]
    for c, v in zip(coords, vals):
        lines.append(f"{_fmt(c)},{_fmt(v)},{_fmt(float(prob.z_d(c)))}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_single(prob: HUMProblem, label: str | None, outdir: Path) -> tuple[int, dict]:
    """Run one problem, write all artifacts, return (exit code, report dict)."""
    outdir.mkdir(parents=True, exist_ok=True)
    phi0, report = fixed_point(prob)
    reached, _traj, _errors = simulate_closed_loop(prob, phi0)

    doc = {
        "config": _config_echo(prob, label),
        "report": _sanitize(report.to_dict()),
    }
    (outdir / "report.json").write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8"
    )
    b = actuator_coefficients(prob.act, prob.order)
    cmesh = control_mesh(prob.p, prob.control_steps, prob.control_grading)
    u = sample_control(phi0, b, prob.p, cmesh)
    _write_control_csv(outdir / "control.csv", u.times, u.values)
    write_grid_dump(reached, 65, outdir / "reached_state.txt")
    proj = project_function(prob.y_d_ext, prob.order, prob.pseudo_grid)
    write_grid_dump(proj.field, 65, outdir / "desired_state.txt")
    _write_trace_csv(outdir / "trace.csv", prob, reached)
    return (EXIT_OK if report.converged else EXIT_NOT_CONVERGED), doc["report"]


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args: argparse.Namespace) -> int:
    cfg = parse_config_file(args.config) if args.config else {}
    prob = build_problem(cfg, args)
    label = args.preset or cfg.get("preset")
    outdir = Path(args.out)
    try:
        code, report = _run_single(prob, label, outdir)
    except (BlowUpError, UncontrollableError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(
        f"{label or 'config'}: converged={report['converged']} "
        f"iterations={report['iterations']} "
        f"error_omega={report['error_omega']} error_gamma={report['error_gamma']}"
    )
    return code


def cmd_sweep(args: argparse.Namespace) -> int:
    table = args.table
    labels = [f"table{table}_row{i}" for i in range(1, 7)]
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for label in labels:
        prob = build_problem({}, argparse.Namespace(**{**vars(args), "preset": label}))
        act = prob.act
        if act.kind == "zonal":
            r = act.region
            act_desc = f"zonal [{r.x0:g},{r.x1:g}]x[{r.y0:g},{r.y1:g}]"
        else:
            act_desc = f"pointwise ({act.b1:g},{act.b2:g})"
        w = prob.omega
        region_desc = f"[{w.x0:g},{w.x1:g}]x[{w.y0:g},{w.y1:g}]"
        try:
            code, report = _run_single(prob, label, outdir / label)
            rows.append(
                (
                    act_desc,
                    region_desc,
                    report["error_gamma"],
                    report["error_omega"],
                    report["gram_min_eig"],
                    report["iterations"],
                    report["converged"],
                )
            )
        except (BlowUpError, UncontrollableError) as exc:
            print(f"{label}: failed ({exc})", file=sys.stderr)
            rows.append((act_desc, region_desc, None, None, None, 0, False))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["actuator", "region", "error_gamma", "error_omega", "gram_min_eig",
         "iterations", "converged"]
    )
    for act_desc, region_desc, eg, eo, gm, it, conv in rows:
        writer.writerow(
            [
                act_desc,
                region_desc,
                _fmt(eg) if eg is not None else "nan",
                _fmt(eo) if eo is not None else "nan",
                _fmt(gm) if gm is not None else "nan",
                it,
                conv,
            ]
        )
    (outdir / f"table{table}.csv").write_text(buf.getvalue(), encoding="utf-8")
    print(f"table {table}: {sum(1 for r in rows if r[6])}/6 rows converged")
    return EXIT_OK


def cmd_mlf(args: argparse.Namespace) -> int:
    try:
        val = mittag_leffler(args.alpha, args.beta, args.z)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(_fmt(val))
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    cfg = parse_config_file(args.config) if args.config else {}
    prob = build_problem(cfg, args)
    b = actuator_coefficients(prob.act, prob.order)
    gram = gram_matrix(b, prob.p, prob.order, prob.quad_order)
    eigs = np.linalg.eigvalsh(gram.entries)
    cond = float(eigs[-1] / eigs[0]) if eigs[0] > 0 else math.inf
    proj = project_function(prob.y0, prob.order, prob.pseudo_grid)
    gval, gsat = gronwall_time_condition(
        prob.m_const,
        prob.spec,
        prob.p,
        0.0,
        float(np.linalg.norm(proj.field.coeffs)),
        float(np.linalg.norm(b)),
    )
    if not prob.p.h1_satisfied:
        print(
            f"warning: alpha={prob.p.alpha} outside (2/3, 1]; semilinear "
            "estimates not guaranteed"
        )
    print(f"gram_min_eig = {_fmt(gram.min_eigenvalue)}")
    print(f"condition_number = {_fmt(cond)}")
    print(f"rank_estimate = {int(np.sum(eigs > max(eigs[-1], 0.0) * 1e-14))}")
    zm = " ".join(f"({m.j},{m.k})" for m in gram.zero_modes) or "none"
    print(f"zero_modes = {zm}")
    print(f"gronwall_value = {_fmt(gval)} (satisfied={gsat})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--preset", help="preset label from the catalog")
    sp.add_argument("--config", help="key = value configuration file")
    sp.add_argument(
        "--out",
        default=os.environ.get(_ENV_OUTDIR, "humfrac_out"),
        help=f"output directory (env {_ENV_OUTDIR} overrides the default)",
    )
    sp.add_argument("--alpha", type=float, help="fractional order override")
    sp.add_argument("-J", "--order", type=int, help="basis order override")
    sp.add_argument("-M", "--steps", type=int, help="time mesh steps override")
    sp.add_argument("--control-steps", type=int, dest="control_steps")
    sp.add_argument("--quad-order", type=int, dest="quad_order")
    sp.add_argument("--grid-points", type=int, dest="grid_points")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--max-iters", type=int, dest="max_iters")
    sp.add_argument("--reg", type=float)
    sp.add_argument("--rcond", type=float)
    sp.add_argument("--relax", type=float)
    sp.add_argument("--norm", choices=["L2", "H1"])
    sp.add_argument("--strict-alpha", action="store_true", dest="strict_alpha")


def build_parser() -> _Parser:
    ap = _Parser(prog="humfrac", description=__doc__,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    _add_common(p_run)
    p_run.set_defaults(fn=cmd_run)
    p_sweep = sub.add_parser("sweep", help="run a whole table")
    p_sweep.add_argument("--table", type=int, choices=[1, 2], required=True)
    _add_common(p_sweep)
    p_sweep.set_defaults(fn=cmd_sweep)
    p_mlf = sub.add_parser("mlf", help="evaluate E_{alpha,beta}(z)")
    p_mlf.add_argument("alpha", type=float)
    p_mlf.add_argument("beta", type=float)
    p_mlf.add_argument("z", type=float)
    p_mlf.set_defaults(fn=cmd_mlf)
    p_check = sub.add_parser("check", help="controllability diagnostics")
    _add_common(p_check)
    p_check.set_defaults(fn=cmd_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command in ("run", "check") and not (args.preset or args.config):
            raise UsageError("need --preset or --config")
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
