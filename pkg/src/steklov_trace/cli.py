"""Command-line front end: ``steklov-trace {mesh,spectrum,verify}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 an inequality
was violated beyond tolerance.  A flat ``key = value`` config file
(``--config``) supplies defaults for the long flags; flags given on the
command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import fem, hodge, spectra, verify
from .mesh import MeshError, load_mesh, measures, topology, write_mesh

log = logging.getLogger("steklov_trace")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2, 3

SHAPES = ("disk", "annulus", "ellipse", "rectangle")
KINDS = {"steklov0": "steklov-0", "steklov1": "steklov-1", "blap": "boundary-laplace"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config file


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _coerce(parser: argparse.ArgumentParser, values: dict) -> dict:
    actions = {a.dest: a for a in parser._actions}
    out = {}
    for key, text in values.items():
        act = actions.get(key)
        if act is None:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(act, argparse._StoreTrueAction):
            out[key] = text.lower() in ("1", "true", "yes", "on")
        elif act.type is not None:
            out[key] = act.type(text)
        else:
            out[key] = text
        if act.choices is not None and out[key] not in act.choices:
            raise UsageError(f"config key {key}: invalid choice {text!r}")
    return out


# ---------------------------------------------------------------------------
# parser


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v

    conv.__name__ = kind.__name__
    return conv


pfloat, pint = _positive(float), _positive(int)


def _domain_args(p: argparse.ArgumentParser, need_h: bool):
    p.add_argument("--shape", choices=SHAPES)
    p.add_argument("--load", metavar="OFF", help="read a mesh from an OFF file")
    p.add_argument("--h", type=pfloat, default=None if not need_h else 0.05, help="target mesh size")
    p.add_argument("--radius", type=pfloat, default=1.0)
    p.add_argument("--inner", type=pfloat, default=0.5)
    p.add_argument("--outer", type=pfloat, default=1.0)
    p.add_argument("--a", type=pfloat, default=2.0, help="ellipse semi-axis along x")
    p.add_argument("--b", type=pfloat, default=1.0, help="ellipse semi-axis along y")
    p.add_argument("--width", type=pfloat, default=1.0)
    p.add_argument("--height", type=pfloat, default=1.0)
    p.add_argument("-o", "--out", default=".", help="output directory")
    p.add_argument("--config", help="key = value defaults file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steklov-trace", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    pm = sub.add_parser("mesh", help="generate or load a mesh; write OFF + topology.json")
    _domain_args(pm, need_h=True)
    pm.add_argument("--export-mm", action="store_true", help="also write stiffness and boundary mass (Matrix Market)")

    ps = sub.add_parser("spectrum", help="compute a spectrum and write CSV")
    _domain_args(ps, need_h=True)
    ps.add_argument("--kind", choices=sorted(KINDS), default="steklov0")
    ps.add_argument("--count", type=pint, default=10)

    pv = sub.add_parser("verify", help="run inequality checks")
    _domain_args(pv, need_h=False)
    pv.add_argument("--suite", choices=["default"], help="run the full default suite")
    pv.add_argument("--check", choices=verify.CHECK_NAMES)
    for name in ("m", "n", "r", "s", "q", "i"):
        pv.add_argument(f"--{name}", type=pint, default=1)
    pv.add_argument("--p", type=int, default=1)
    pv.add_argument("--f", default="t", help="t, t2, t3, expm1, hinge:c, affine:a,b")
    pv.add_argument("--statement", type=int, choices=[1, 2], default=1)
    pv.add_argument("--format", default="json,csv,svg", help="comma list of json, csv, svg")
    pv.add_argument("--self-test", action="store_true", help="invert every inequality (negative control)")
    pv.add_argument("--c-tol", type=pfloat, default=verify.C_TOL)
    pv.add_argument("--seed", type=int, default=0, help="reserved for randomized checks")
    return parser


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        # reparse with defaults suppressed so only flags given on the command line show up
        saved = {a.dest: a.default for a in subparser._actions}
        for a in subparser._actions:
            a.default = argparse.SUPPRESS
        try:
            explicit = vars(subparser.parse_args(argv[argv.index(args.command) + 1:]))
        finally:
            for a in subparser._actions:
                a.default = saved[a.dest]
        cfg = _coerce(subparser, read_config(args.config))
        for key, value in cfg.items():
            if key not in explicit:
                setattr(args, key, value)
    return args


# ---------------------------------------------------------------------------
# domain construction


def _shape_params(args) -> list:
    return {
        "disk": [args.radius],
        "annulus": [args.inner, args.outer],
        "ellipse": [args.a, args.b],
        "rectangle": [args.width, args.height],
    }[args.shape]


def _mesh_from_args(args):
    if args.shape and args.load:
        raise UsageError("--shape and --load are mutually exclusive")
    if args.load:
        return load_mesh(args.load)
    if not args.shape:
        raise UsageError("give --shape or --load")
    if args.h is None:
        raise UsageError("--h is required for a mesh")
    if args.shape == "annulus" and not args.inner < args.outer:
        raise UsageError("--inner must be smaller than --outer")
    return verify.make_mesh(args.shape, _shape_params(args), args.h)


def _domain_from_args(args) -> verify.Domain:
    if args.load or args.h is not None:
        return verify.MeshDomain(_mesh_from_args(args))
    if args.shape == "disk":
        return verify.AnalyticDisk(args.radius)
    if args.shape == "annulus":
        if not args.inner < args.outer:
            raise UsageError("--inner must be smaller than --outer")
        return verify.AnalyticAnnulus(args.inner, args.outer)
    if args.shape is None:
        raise UsageError("give --shape or --load")
    raise UsageError(f"{args.shape} has no closed form; give --h")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_mesh(args) -> int:
    mesh = _mesh_from_args(args)
    out = _outdir(args)
    stem = args.shape or Path(args.load).stem
    write_mesh(mesh, out / f"{stem}.off")
    top, meas = topology(mesh), measures(mesh)
    info = {
        "shape": mesh.describe(),
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "h": mesh.h,
        "b0": top.b0,
        "b1": top.b1,
        "boundary_loops": top.boundary_component_count,
        "euler_characteristic": top.euler_characteristic,
        "area": meas.area,
        "boundary_length": meas.boundary_length,
        "loop_lengths": list(meas.loop_lengths),
    }
    (out / "topology.json").write_text(json.dumps(info, indent=2) + "\n")
    if args.export_mm:
        fem.export_matrix_market(fem.stiffness_scalar(mesh), out / "stiffness.mtx")
        fem.export_matrix_market(fem.mass_boundary(mesh), out / "boundary_mass.mtx")
    print(f"{stem}: {mesh.n_vertices} vertices, {top.boundary_component_count} boundary loops, b1 = {top.b1}")
    return EXIT_OK


def _oracle(args, mesh, kind: str, count: int):
    if args.load or args.shape not in ("disk", "annulus"):
        return None
    if args.shape == "disk":
        r = args.radius
        if kind == "steklov-0":
            return spectra.disk_steklov_analytic(r, count)
        if kind == "boundary-laplace":
            return spectra.circle_laplace_analytic(2 * math.pi * r, count)
        return spectra.disk_steklov_1form_radial(r, count)
    a, b = args.inner, args.outer
    if kind == "steklov-0":
        return spectra.annulus_steklov_analytic(a, b, count)
    if kind == "boundary-laplace":
        return spectra.circles_laplace_analytic([2 * math.pi * a, 2 * math.pi * b], count)
    return None


def cmd_spectrum(args) -> int:
    mesh = _mesh_from_args(args)
    kind = KINDS[args.kind]
    fn = {
        "steklov-0": spectra.steklov_functions,
        "steklov-1": spectra.steklov_1forms_planar,
        "boundary-laplace": spectra.boundary_laplace,
    }[kind]
    sp = fn(mesh, args.count)
    oracle = _oracle(args, mesh, kind, args.count)
    out = _outdir(args)
    stem = args.shape or Path(args.load).stem
    path = out / f"{stem}_{args.kind}.csv"
    spectra.write_spectrum_csv(sp, path, oracle)
    print(f"wrote {path} ({len(sp)} values, {sp.zero_modes} zero modes)")
    return EXIT_OK


def _single_check(args, dom: verify.Domain):
    name = args.check
    thunks = {
        "weinstock": lambda: verify.check_weinstock(dom),
        "hps-product": lambda: verify.check_hps_product(dom, args.p, args.q),
        "hps-linear": lambda: verify.check_hps_linear(dom, args.p),
        "hps-inverse-trace": lambda: verify.check_hps_inverse_trace(dom, args.n),
        "dittmar": lambda: verify.check_dittmar(dom, args.n),
        "dittmar-trend": lambda: verify.dittmar_trend(dom, max(args.n, 2))[0],
        "surface-inverse-trace": lambda: verify.check_surface_inverse_trace(dom, args.m, args.n, args.f),
        "split-inverse-trace": lambda: verify.check_split_inverse_trace(dom, args.r, args.s, args.m, args.f, args.statement),
        "parallel-trace": lambda: verify.check_parallel_trace(dom, args.p),
        "parallel-single": lambda: verify.check_parallel_single(dom, args.p, args.i),
        "brock": lambda: verify.check_brock(dom, args.p),
        "subspace-minmax": lambda: verify.check_subspace_minmax(_mesh_of(dom), args.m, args.n),
        "subspace-diagonal": lambda: verify.check_subspace_diagonal(_mesh_of(dom), args.m, args.n),
    }
    params = {k: getattr(args, k) for k in ("m", "n", "r", "s", "p", "q", "i", "f", "statement")}
    return verify.run_checks([(name, params, thunks[name])], dom.label, dom.h)


def _mesh_of(dom):
    if not isinstance(dom, verify.MeshDomain):
        raise verify.OutOfScope("the subspace replay needs a mesh (give --h or --load)")
    return dom.mesh


def _write_outputs(args, reports, tables, out: Path):
    formats = {x.strip() for x in args.format.split(",") if x.strip()}
    bad = formats - {"json", "csv", "svg"}
    if bad:
        raise UsageError(f"unknown output format(s): {', '.join(sorted(bad))}")
    if "json" in formats:
        verify.reports_to_json(reports, out / "reports.json")
    if "csv" in formats:
        verify.reports_to_csv(reports, out / "reports.csv")
    for t in tables:
        stem = f"convergence_{t.shape.split('(')[0]}_{t.target.replace(':', '')}"
        t.to_csv(out / f"{stem}.csv")
        if "svg" in formats:
            t.to_svg(out / f"{stem}.svg")


def cmd_verify(args) -> int:
    if bool(args.suite) == bool(args.check):
        raise UsageError("give exactly one of --suite or --check")
    out = _outdir(args)
    if args.suite:
        cfg = verify.SuiteConfig(self_test=args.self_test, c_tol=args.c_tol)
        res = verify.run_suite(cfg)
        reports, tables, summary = res.reports, res.convergence, res.summary
    else:
        dom = _domain_from_args(args)
        dom.c_tol = args.c_tol
        reports = _single_check(args, dom)
        if args.self_test:
            reports = [r.inverted() for r in reports]
        tables = []
        summary = verify.summarize(reports)
        if args.check.startswith("subspace") and isinstance(dom, verify.MeshDomain) and reports[0].slack is not None:
            sub = hodge.build_proof_subspace(dom.mesh, args.m, args.n)
            hodge.dump_subspace_json(sub, out / f"subspace_m{args.m}_n{args.n}.json")
    _write_outputs(args, reports, tables, out)
    for r in reports:
        if r.slack is None:
            print(f"{r.name:24s} {r.domain:24s} {r.status}: {r.note}")
        else:
            print(f"{r.name:24s} {r.domain:24s} {r.status:9s} lhs={r.lhs:.10g} rhs={r.rhs:.10g} slack={r.slack:.3e}")
    print(" ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_VIOLATION if summary.get("violated", 0) else EXIT_OK


COMMANDS = {"mesh": cmd_mesh, "spectrum": cmd_spectrum, "verify": cmd_verify}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeshError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
