"""``thetascale`` command-line interface.

Each subcommand writes one CSV table (header row, LF endings) to stdout or
``--output``; some also draw an SVG with ``--plot``.  Any option may come
from a JSON ``--config`` file, keyed by option name; the command line wins.

Exit codes: 0 success, 2 bad arguments or specs, 3 domain, singularity or
divergence errors, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .csvio import csv_text
from .curves import (curve_length, curve_length_scaled, curve_length_scaled_path,
                     parse_curve)
from .dynamics import (SampledFunction, covariant_derivative, integrate_eom, kinetic_apply,
                       momentum_apply, parse_function, parse_lagrangian, scaled_action)
from .errors import ConvergenceError, DomainError, SpecParseError, ThetaScaleError
from .fields import (ConstantTheta, Point, line_integral, lightcone_scaling, parse_point,
                     parse_theta, parse_vector_field, retarded_time, scaling_factor)
from .geodesics import GeodesicConfig, geodesic
from .geometry import (Euclidean, parse_metric, scaled_line_element,
                       scaled_metric_tensor)
from .holes import PROFILE_HEADER, HoleSpec, hole_profile, length_readings
from .quadrature import QuadratureConfig
from .quantum import (GaussianPacket, SampledPacket, parse_packet, scaled_momentum,
                      scaled_norm, scaled_position)

EXIT_OK, EXIT_PARSE, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 2, 3, 4


class _Fail(Exception):
    """Missing option detected after config merging."""


def _floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise SpecParseError(f"--{name}: expected comma-separated numbers, got {text!r}",
                             token=str(text)) from None
    if not vals:
        raise SpecParseError(f"--{name}: no numbers in {text!r}", token=str(text))
    return vals


def _need(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise _Fail(f"missing required option --{name.rstrip('_').replace('_', '-')}")


def _quad(args) -> QuadratureConfig:
    kw = {}
    if args.rel_tol is not None:
        kw["rel_tol"] = args.rel_tol
    if args.abs_tol is not None:
        kw["abs_tol"] = args.abs_tol
    if args.clip is not None:
        kw["singularity_clip"] = args.clip
    return QuadratureConfig.from_env(**kw)


def _emit(args, header, rows):
    text = csv_text(header, rows)
    if args.output and args.output != "-":
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _plot(args, series, xlabel, ylabel, title=""):
    if getattr(args, "plot", None):
        from .plotting import line_plot
        line_plot(args.plot, series, xlabel, ylabel, title)


def _theta_or_zero(args):
    return parse_theta(args.theta) if args.theta is not None else ConstantTheta(0.0)


# --- subcommands ------------------------------------------------------------

def cmd_scale_factor(args):
    _need(args, "theta", "from_", "to")
    theta = parse_theta(args.theta)
    f = scaling_factor(theta, parse_point(args.to), parse_point(args.from_))
    _emit(args, ["factor"], [[f]])


def cmd_path_factor(args):
    _need(args, "field", "curve")
    field = parse_vector_field(args.field)
    e = line_integral(field, parse_curve(args.curve), _quad(args))
    if abs(e) > 700:
        raise DomainError(f"path scaling exponent {e:.6g} exceeds the overflow guard")
    _emit(args, ["line_integral", "factor"], [[e, math.exp(e)]])


def cmd_line_element(args):
    _need(args, "metric", "at")
    metric = parse_metric(args.metric)
    theta = _theta_or_zero(args)
    at = parse_point(args.at)
    ref = parse_point(args.ref) if args.ref is not None else at
    if args.tensor:
        g = metric.tensor(at)
        gs = scaled_metric_tensor(metric, theta, at, ref)
        rows = [[i, j, g[i, j], gs[i, j]] for i in range(g.shape[0]) for j in range(g.shape[1])]
        _emit(args, ["i", "j", "unscaled", "scaled"], rows)
        return
    _need(args, "disp")
    res = scaled_line_element(metric, theta, at, _floats(args.disp, "disp"), ref)
    _emit(args, ["unscaled", "scaled", "factor", "class"],
          [[res.unscaled, res.scaled, res.factor, str(res.causal_class)]])


def cmd_curve_length(args):
    _need(args, "curve")
    curve = parse_curve(args.curve)
    metric = parse_metric(args.metric) if args.metric else Euclidean(curve.ncoords - 1)
    quad = _quad(args)
    unscaled = curve_length(curve, metric, quad, args.interval)
    if args.field is not None:
        if args.theta is not None:
            raise SpecParseError("give --theta or --field, not both", token="--field")
        res = curve_length_scaled_path(curve, parse_vector_field(args.field), quad, metric)
        factor_of = None
    else:
        theta = _theta_or_zero(args)
        ref = parse_point(args.ref) if args.ref is not None else curve.start
        res = curve_length_scaled(curve, metric, theta, ref, quad, args.interval)
        factor_of = (theta, ref)
    _emit(args, ["unscaled", "scaled", "clipped"], [[unscaled, res.value, int(res.clipped)]])
    if factor_of is not None and getattr(args, "plot", None):
        theta, ref = factor_of
        s = np.linspace(0.0, 1.0, 401)
        lo, hi = (quad.singularity_clip, 1 - quad.singularity_clip) if res.clipped else (0.0, 1.0)
        s = np.clip(s, lo, hi)
        e = theta.value(curve.position(s)) - theta.value(ref)
        _plot(args, [("exp(theta - theta_ref)", s, np.exp(np.minimum(e, 700.0)))],
              "s", "scaling factor", args.curve)


def cmd_geodesic(args):
    _need(args, "theta", "from_", "to")
    theta = parse_theta(args.theta)
    frm, to = parse_point(args.from_), parse_point(args.to)
    metric = parse_metric(args.metric) if args.metric else None
    cfg = GeodesicConfig(residual_tol=args.residual_tol, max_iter=args.max_iter)
    res = geodesic(frm, to, theta, metric, args.N, _quad(args), cfg)
    if args.summary:
        _emit(args, ["length", "el_residual", "iterations", "converged"],
              [[res.length.value, res.el_residual, res.iterations, int(res.converged)]])
    else:
        nodes = res.curve.nodes
        d = nodes.shape[1] - 1
        header = ["s", "t"] + [f"x{i}" for i in range(1, d + 1)]
        _emit(args, header, [[s, *row] for s, row in zip(res.curve.s, nodes)])
    nodes = res.curve.nodes
    if nodes.shape[1] >= 3:
        chord = np.array([nodes[0], nodes[-1]])
        _plot(args, [("minimizer", nodes[:, 1], nodes[:, 2]), ("chord", chord[:, 1], chord[:, 2])],
              "x1", "x2", f"scaled length {res.length.value:.6f}")
    else:
        _plot(args, [("minimizer", res.curve.s, nodes[:, 1])], "s", "x1")


def cmd_distance(args):
    _need(args, "theta", "from_", "to")
    metric = parse_metric(args.metric) if args.metric else None
    cfg = GeodesicConfig(residual_tol=args.residual_tol, max_iter=args.max_iter)
    res = geodesic(parse_point(args.from_), parse_point(args.to), parse_theta(args.theta),
                   metric, args.N, _quad(args), cfg)
    _emit(args, ["distance"], [[res.length.value]])


def cmd_action(args):
    _need(args, "curve", "lagrangian")
    curve = parse_curve(args.curve)
    theta = _theta_or_zero(args)
    ref = parse_point(args.ref) if args.ref is not None else curve.start
    S = scaled_action(curve, parse_lagrangian(args.lagrangian), theta, ref, _quad(args))
    _emit(args, ["action"], [[S]])


def cmd_eom(args):
    _need(args, "theta", "lagrangian", "x0", "v0", "t_end", "dt")
    theta = parse_theta(args.theta)
    L = parse_lagrangian(args.lagrangian)
    try:
        traj = integrate_eom(L, theta, _floats(args.x0, "x0"), _floats(args.v0, "v0"),
                             args.t_end, args.dt, args.t0)
    except DomainError as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            _emit(args, partial.header(), partial.rows())
        raise
    _emit(args, traj.header(), traj.rows())
    series = [(f"x{i + 1}", traj.times, traj.positions[:, i]) for i in range(traj.dim)]
    series += [(f"v{i + 1}", traj.times, traj.velocities[:, i]) for i in range(traj.dim)]
    _plot(args, series, "t", "position / velocity", args.lagrangian)


def cmd_covariant_derivative(args):
    theta = _theta_or_zero(args)
    if args.psi is not None:
        if args.f is not None:
            raise SpecParseError("give --f or --psi, not both", token="--psi")
        psi = SampledPacket.from_csv(args.psi[1:] if args.psi.startswith("@") else args.psi)
        if args.operator == "momentum":
            out = momentum_apply(psi.psi, psi.grid, theta, args.hbar, t=args.t)
        else:
            out = kinetic_apply(psi.psi, psi.grid, theta, args.hbar, args.mass, t=args.t)
        _emit(args, ["y", "re", "im"], [[y, z.real, z.imag] for y, z in zip(psi.grid, out)])
        return
    _need(args, "f", "at")
    at = parse_point(args.at)
    f, df = parse_function(args.f, theta, args.axis)
    if isinstance(f, SampledFunction):
        value = covariant_derivative(f, theta, at, args.axis)
    else:
        value = covariant_derivative(f, theta, at, args.axis, df)
    _emit(args, ["value"], [[value]])


def cmd_qm_expect(args):
    _need(args, "packet")
    psi = parse_packet(args.packet)
    theta = _theta_or_zero(args)
    ref = parse_point(args.ref) if args.ref is not None else Point(0.0, (0.0,) * psi.dim)
    quad = _quad(args)
    want = args.quantity
    rows = []
    norm = pos = None
    if want in ("norm", "ratio", "all"):
        norm = scaled_norm(psi, theta, ref, quad).value
        if want != "ratio":
            rows.append(["norm", norm])
    if want in ("position", "ratio", "all"):
        pos = scaled_position(psi, theta, ref, args.axis, quad).value
        if want != "ratio":
            rows.append([f"position:{args.axis}", pos])
    if want in ("ratio", "all"):
        rows.append([f"ratio:{args.axis}", pos / norm])
    if want == "momentum" or (want == "all" and isinstance(psi, SampledPacket)):
        if not isinstance(psi, SampledPacket):
            raise DomainError("momentum expectations need a sampled packet")
        m = scaled_momentum(psi, theta, ref, args.hbar)
        rows += [["momentum", m.value], ["momentum:imag", m.imag]]
    _emit(args, ["quantity", "value"], rows)
    if getattr(args, "plot", None) and psi.dim == 1:
        if isinstance(psi, GaussianPacket):
            y = np.linspace(psi.mu[0] - 6 * psi.sigma[0], psi.mu[0] + 6 * psi.sigma[0], 801)
            rho = psi.density_axis(0, y)
        else:
            y, rho = psi.grid, np.abs(psi.psi) ** 2
        e = theta.value(np.column_stack([np.full(y.size, ref.t), y])) - theta.value(ref)
        _plot(args, [("|psi|^2", y, rho), ("scaled", y, rho * np.exp(np.minimum(e, 700.0)))],
              "y", "density", args.packet)


def cmd_transfer(args):
    _need(args, "theta", "value", "from_", "to")
    f = scaling_factor(parse_theta(args.theta), parse_point(args.from_), parse_point(args.to))
    _emit(args, ["value", "factor"], [[args.value * f, f]])


def cmd_hole_profile(args):
    _need(args, "K")
    spec = HoleSpec(args.K, args.l, args.direction, args.l_prime)
    rows = hole_profile(spec, args.samples, _quad(args), args.w_max)
    _emit(args, PROFILE_HEADER, [r.as_tuple() for r in rows])
    finite = [r for r in rows if not r.divergent]
    if len(finite) > 1:
        note = length_readings(finite[-1], spec)
        print(f"w={note['w']:.6g}: scaled/l={note['scaled_over_l']:.6g}, "
              f"scaled/unscaled={note['scaled_over_unscaled']:.6g}", file=sys.stderr)
    _plot(args, [("unscaled", [r.w for r in finite], [r.unscaled for r in finite]),
                 ("scaled", [r.w for r in finite], [r.scaled for r in finite])],
          "w", "length", f"{spec.kind} hole, {spec.direction}, K={spec.K:g}, l={spec.l:g}")


def cmd_lightcone_scale(args):
    _need(args, "theta", "observer", "event")
    theta = parse_theta(args.theta)
    observer = parse_point(args.observer)
    event = _floats(args.event, "event")
    t_ret = retarded_time(observer, event, args.c)
    f = lightcone_scaling(theta, observer, event, args.c)
    _emit(args, ["retarded_time", "factor"], [[t_ret, f]])


# --- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser, plot: bool = False):
    p.add_argument("-o", "--output", help="CSV output file (default: stdout)")
    p.add_argument("--config", help="JSON file supplying option values")
    p.add_argument("--rel-tol", type=float, help="quadrature relative tolerance")
    p.add_argument("--abs-tol", type=float, help="quadrature absolute tolerance")
    p.add_argument("--clip", type=float, help="singular-endpoint clip width")
    if plot:
        p.add_argument("--plot", metavar="SVG", help="also draw an SVG plot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thetascale",
        description="Scaling factors, scaled lengths, dynamics and expectations for theta fields.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("scale-factor", help="exp(theta(to) - theta(from))")
    _common(p)
    p.add_argument("--theta")
    p.add_argument("--from", dest="from_", metavar="POINT")
    p.add_argument("--to", metavar="POINT")
    p.set_defaults(func=cmd_scale_factor)

    p = sub.add_parser("path-factor", help="exp of the line integral of a vector field")
    _common(p)
    p.add_argument("--field", help="grad:<theta>, rotational:<omega> or a theta spec")
    p.add_argument("--curve")
    p.set_defaults(func=cmd_path_factor)

    p = sub.add_parser("line-element", help="scaled ds^2 and causal class")
    _common(p)
    p.add_argument("--metric")
    p.add_argument("--theta")
    p.add_argument("--at", metavar="POINT")
    p.add_argument("--ref", metavar="POINT", help="reference point (default: --at)")
    p.add_argument("--disp", help="displacement in the metric's coordinates")
    p.add_argument("--tensor", action="store_true", help="print the metric tensor instead")
    p.set_defaults(func=cmd_line_element)

    p = sub.add_parser("curve-length", help="unscaled and scaled curve length")
    _common(p, plot=True)
    p.add_argument("--curve")
    p.add_argument("--metric")
    p.add_argument("--theta")
    p.add_argument("--field", help="path-dependent scaling from a vector field")
    p.add_argument("--ref", metavar="POINT", help="reference point (default: curve start)")
    p.add_argument("--interval", choices=["proper-time", "proper-length"], default="proper-time")
    p.set_defaults(func=cmd_curve_length)

    for name, func, helptext in (("geodesic", cmd_geodesic, "minimum scaled-length curve"),
                                 ("distance", cmd_distance, "scaled distance between points")):
        p = sub.add_parser(name, help=helptext)
        _common(p, plot=(name == "geodesic"))
        p.add_argument("--theta")
        p.add_argument("--from", dest="from_", metavar="POINT")
        p.add_argument("--to", metavar="POINT")
        p.add_argument("--metric")
        p.add_argument("--N", type=int, default=64, help="interior nodes")
        p.add_argument("--residual-tol", type=float, default=GeodesicConfig.residual_tol)
        p.add_argument("--max-iter", type=int, default=GeodesicConfig.max_iter)
        if name == "geodesic":
            p.add_argument("--summary", action="store_true",
                           help="print length and residual instead of nodes")
        p.set_defaults(func=func)

    p = sub.add_parser("action", help="scaled action along a (t, x) path")
    _common(p)
    p.add_argument("--curve")
    p.add_argument("--lagrangian", help="free:<m> or harmonic:<m>;<k>")
    p.add_argument("--theta")
    p.add_argument("--ref", metavar="POINT", help="reference point (default: path start)")
    p.set_defaults(func=cmd_action)

    p = sub.add_parser("eom", help="integrate the scaled equations of motion")
    _common(p, plot=True)
    p.add_argument("--theta")
    p.add_argument("--lagrangian")
    p.add_argument("--x0")
    p.add_argument("--v0")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_eom)

    p = sub.add_parser("covariant-derivative",
                       help="D_j f at a point, or the momentum/kinetic operator on samples")
    _common(p)
    p.add_argument("--theta")
    p.add_argument("--f", help="poly:<c..>, exp:<k>, exp-neg-theta or table:<csv>")
    p.add_argument("--at", metavar="POINT")
    p.add_argument("--axis", type=int, default=1)
    p.add_argument("--psi", help="@<csv of y,re,im> to apply an operator to")
    p.add_argument("--operator", choices=["momentum", "kinetic"], default="momentum")
    p.add_argument("--hbar", type=float, default=1.0)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--t", type=float, default=0.0, help="time at which theta is evaluated")
    p.set_defaults(func=cmd_covariant_derivative)

    p = sub.add_parser("qm-expect", help="scaled norm and position of a wave packet")
    _common(p, plot=True)
    p.add_argument("--packet")
    p.add_argument("--theta")
    p.add_argument("--ref", metavar="POINT", help="reference point (default: origin)")
    p.add_argument("--axis", type=int, default=1)
    p.add_argument("--quantity", choices=["norm", "position", "ratio", "momentum", "all"],
                   default="all")
    p.add_argument("--hbar", type=float, default=1.0)
    p.set_defaults(func=cmd_qm_expect)

    p = sub.add_parser("transfer", help="re-reference a scaled length or expectation")
    _common(p)
    p.add_argument("--theta")
    p.add_argument("--value", type=float)
    p.add_argument("--from", dest="from_", metavar="POINT", help="current reference")
    p.add_argument("--to", metavar="POINT", help="new reference")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("hole-profile", help="scaled distance profile near a scaling hole")
    _common(p, plot=True)
    p.add_argument("--K", type=float)
    p.add_argument("--l", type=float, default=1.0)
    p.add_argument("--direction", choices=["inward", "outward"], default="inward")
    p.add_argument("--l-prime", type=float)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--w-max", type=float, default=1.0)
    p.set_defaults(func=cmd_hole_profile)

    p = sub.add_parser("lightcone-scale", help="scaling factor to an event on the past light cone")
    _common(p)
    p.add_argument("--theta", help="time-only theta field")
    p.add_argument("--observer", metavar="POINT")
    p.add_argument("--event", help="spatial position of the event")
    p.add_argument("--c", type=float, default=1.0)
    p.set_defaults(func=cmd_lightcone_scale)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecParseError(f"cannot read config {known.config!r}: {exc}",
                             token=known.config) from exc
    if not isinstance(cfg, dict):
        raise SpecParseError("config file must hold a JSON object", token=known.config)
    defaults = {}
    for key, value in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        defaults["from_" if dest == "from" else dest] = value
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in defaults.items() if k in dests})
    known_dests = {a.dest for sp in subparsers.choices.values() for a in sp._actions}
    unknown = sorted(set(defaults) - known_dests)
    if unknown:
        raise SpecParseError(f"unknown config key(s): {', '.join(unknown)}", token=unknown[0])


def _error(msg: str, code: int) -> int:
    print(f"thetascale: error: {msg}", file=sys.stderr)
    return code


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except SpecParseError as exc:
        return _error(str(exc), EXIT_PARSE)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return _error("a subcommand is required", EXIT_PARSE)
    try:
        args.func(args)
    except _Fail as exc:
        return _error(str(exc), EXIT_PARSE)
    except SpecParseError as exc:
        token = f" (at {exc.token!r})" if exc.token is not None else ""
        return _error(f"{exc}{token}", EXIT_PARSE)
    except ConvergenceError as exc:
        return _error(str(exc), EXIT_CONVERGENCE)
    except ThetaScaleError as exc:
        return _error(str(exc), EXIT_DOMAIN)
    except OSError as exc:
        return _error(str(exc), EXIT_DOMAIN)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
