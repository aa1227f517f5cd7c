"""Command-line driver: ``crafem solve|adapt|reproduce|check``.

Exit status: 0 success, 1 usage error, 2 solver (or check) failure, 3 I/O failure.
"""
import argparse
import logging
import os
import sys

from .adaptivity import (PROBLEMS, AdaptiveRunError, RunConfig, adaptive_solve,
                         resolve_problem, tolerance_table)
from .estimator import estimate
from .femspace import build_space
from .linalg import SolverError
from .mesh import TriMesh, refine, unit_square_initial
from .solver import solve
from .reporting import FORMATS, csv_text, export_run, fmt, write_csv, write_svg, write_vtk
from .verification import effectivity, exact_errors

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("crafem")

TABLE3_TOLERANCES = (20.0, 10.0, 5.0, 2.5, 1.25, 0.625, 0.3125)
REPRODUCIBLE = ("table1", "table2", "table3", "fig6", "fig11")
FIGURE_ELEMENT_BUDGET = 20000

# option name -> (converter, default)
_OPTIONS = {
    "problem": (str, "example1"),
    "bc": (str, None),
    "epsilon": (float, 1e-5),
    "theta": (float, 0.5),
    "tol": (float, None),
    "max_iters": (int, 16),
    "max_elements": (int, None),
    "indicator": (str, "psi"),
    "solver_tol": (float, 1e-10),
    "out": (str, "."),
    "formats": (str, "csv"),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def read_config(path):
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _OPTIONS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
    return values


def _merged(args):
    """Defaults, then the config file, then explicit CLI flags."""
    raw = {k: d for k, (_, d) in _OPTIONS.items()}
    if getattr(args, "config", None):
        try:
            raw.update(read_config(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    for key in _OPTIONS:
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    out = {}
    for key, (conv, _) in _OPTIONS.items():
        val = raw[key]
        if isinstance(val, str) and val.lower() in ("none", ""):
            val = None
        try:
            out[key] = None if val is None else conv(val)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {val!r}") from exc
    fmts = tuple(s.strip() for s in (out["formats"] or "").split(",") if s.strip())
    bad = set(fmts) - set(FORMATS)
    if bad:
        raise UsageError(f"unknown formats: {', '.join(sorted(bad))}")
    out["formats"] = fmts
    return out


def _run_config(opts, **overrides):
    kw = dict(problem=opts["problem"], epsilon=opts["epsilon"], theta=opts["theta"],
              indicator_mode=opts["indicator"], max_iters=opts["max_iters"], tol=opts["tol"],
              solver_tol=opts["solver_tol"], bc=opts["bc"],
              max_elements=opts["max_elements"])
    kw.update(overrides)
    try:
        return RunConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_common(p):
    p.add_argument("--config", help="key = value file; flags given here override it")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--bc", choices=("navier", "clamped"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--max-elements", dest="max_elements", type=int,
                   help="stop once the mesh has at least this many triangles")
    p.add_argument("--indicator", choices=("psi", "psi_u"))
    p.add_argument("--solver-tol", dest="solver_tol", type=float)
    p.add_argument("--out", help="output directory")
    p.add_argument("--formats", help=f"comma separated subset of {','.join(FORMATS)}")


def build_parser():
    parser = _Parser(prog="crafem", description="Adaptive mixed FEM for eps^2 Lap^2 u - Lap u = f")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every iteration")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("solve", help="solve once on a fixed mesh and print norms")
    _add_common(p)
    p.add_argument("--mesh", help="mesh text file (default: the eight-triangle unit square)")
    p.add_argument("--refine", type=int, default=0, help="uniform refinements before solving")
    p.add_argument("--save-mesh", help="write the mesh in text format")
    p.add_argument("--export-matrix", help="write the system matrix in MatrixMarket format")

    p = sub.add_parser("adapt", help="run the adaptive loop")
    _add_common(p)

    p = sub.add_parser("reproduce", help="rerun a fixed table or figure configuration")
    p.add_argument("artifact", choices=REPRODUCIBLE)
    _add_common(p)

    p = sub.add_parser("check", help="run the built-in invariant checks")
    p.add_argument("--quick", action="store_true", help="skip the slower checks")
    return parser


# ---------------------------------------------------------------------------
# subcommands


def _print_records(run, stream):
    stream.write(csv_text([vars(r) for r in run.records]))


def cmd_solve(args, opts):
    mesh = TriMesh.load(args.mesh) if args.mesh else unit_square_initial()
    for _ in range(args.refine):
        mesh = refine(mesh, range(mesh.n_triangles))
    try:
        prob = resolve_problem(opts["problem"], opts["epsilon"], opts["bc"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    space = build_space(mesh)
    sol = solve(space, prob.f, opts["epsilon"], prob.bc_kind, tol=opts["solver_tol"])
    ind = estimate(space, sol, prob.f)
    print(f"problem      {prob.name} ({prob.bc_kind})")
    print(f"epsilon      {fmt(opts['epsilon'])}")
    print(f"n_tri        {mesh.n_triangles}")
    print(f"n_dof        {space.n_dofs}")
    print(f"eta_psi      {fmt(ind.eta_psi_global)}")
    print(f"eta_u        {fmt(ind.eta_u_global)}")
    print(f"eta_total    {fmt(ind.eta_total_global)}")
    if prob.exact is not None:
        err = exact_errors(space, sol, prob.exact)
        print(f"err_psi_E    {fmt(err['energy_psi'])}")
        print(f"err_u_h1     {fmt(err['h1_u'])}")
        print(f"err_combined {fmt(err['combined'])}")
        try:
            eff = effectivity(ind.eta_psi_global, ind.eta_u_global, err)
            print(f"eff_psi      {fmt(eff['eff_psi'])}")
            print(f"eff_combined {fmt(eff['eff_combined'])}")
        except ZeroDivisionError:
            pass
    if args.save_mesh:
        mesh.save(args.save_mesh)
    if args.export_matrix:
        _export_matrix(space, prob, opts, args.export_matrix)
    if opts["formats"] and args.out and (set(opts["formats"]) & {"vtk", "svg"}):
        os.makedirs(opts["out"], exist_ok=True)
        base = os.path.join(opts["out"], "solve")
        if "vtk" in opts["formats"]:
            write_vtk(base + ".vtk", mesh, {"eta_psi": ind.eta_psi, "eta_u": ind.eta_u},
                      {"psi_h": sol.psi, "u_h": sol.u})
        if "svg" in opts["formats"]:
            write_svg(base + ".svg", mesh, ind.eta_psi)
    return EXIT_OK


def _export_matrix(space, prob, opts, path):
    from .assembly import assemble_clamped_block, assemble_operator
    from .sparse import restrict
    eps = opts["epsilon"]
    if prob.bc_kind == "clamped":
        matrix, _ = assemble_clamped_block(space, eps, prob.f)
    else:
        K = assemble_operator(space, "stiffness")
        M = assemble_operator(space, "mass")
        inner = space.interior_dofs
        matrix = restrict(K.scale(eps ** 2).add(M), inner, inner)
    matrix.write_matrix_market(path)


def _write_outputs(run, opts, stem):
    paths = export_run(run, opts["out"], opts["formats"] or ("csv",), stem=stem)
    for p in paths:
        log.info("wrote %s", p)
    return paths


def _adapt(config, opts, stem):
    try:
        run = adaptive_solve(config)
    except AdaptiveRunError as exc:
        # keep what was computed before the failure
        if exc.run.records:
            _write_outputs(exc.run, opts, stem + "_partial")
        raise
    _write_outputs(run, opts, stem)
    return run


def cmd_adapt(args, opts):
    run = _adapt(_run_config(opts), opts, "adapt")
    _print_records(run, sys.stdout)
    return EXIT_OK


def _explicit(args, name):
    return getattr(args, name, None) is not None


def cmd_reproduce(args, opts):
    art = args.artifact
    # artifact defaults, unless overridden on the command line or in a config
    cfg_keys = set(read_config(args.config)) if args.config else set()

    def pick(name, default):
        return opts[name] if (_explicit(args, name) or name in cfg_keys) else default

    os.makedirs(opts["out"], exist_ok=True)
    if art in ("table1", "table2"):
        mode = "psi" if art == "table1" else "psi_u"
        config = _run_config(opts, problem="example1", bc=None, epsilon=pick("epsilon", 1e-5),
                             theta=pick("theta", 0.5), indicator_mode=pick("indicator", mode),
                             max_iters=pick("max_iters", 16), tol=pick("tol", None))
        run = _adapt(config, opts, art)
        keep = (lambda k: k % 2 == 0) if art == "table1" else (lambda k: k % 2 == 1)
        cols = (("iter", "err_psi_E", "eta_psi", "eff_psi") if art == "table1"
                else ("iter", "err_combined", "eta_sum", "eff_combined"))
        rows = [dict(vars(r), eta_sum=r.eta_sum) for r in run.records if keep(r.iter)]
        path = write_csv(os.path.join(opts["out"], f"{art}_rows.csv"), rows, cols)
        log.info("wrote %s", path)
        sys.stdout.write(csv_text(rows, cols))
        return EXIT_OK
    if art == "table3":
        config = _run_config(opts, problem="example2", bc=None, epsilon=pick("epsilon", 1e-5),
                             theta=pick("theta", 0.4), indicator_mode=pick("indicator", "psi"),
                             max_iters=pick("max_iters", 60),
                             tol=pick("tol", TABLE3_TOLERANCES[-1]))
        run = _adapt(config, opts, art)
        rows = []
        for tol, rec in tolerance_table(run, TABLE3_TOLERANCES):
            row = {"TOL": tol}
            if rec is not None:
                row.update(k=rec.iter, eta=rec.monitored(config.indicator_mode),
                           n_dof=rec.n_dof, h_min=rec.h_min)
            rows.append(row)
        cols = ("TOL", "k", "eta", "n_dof", "h_min")
        path = write_csv(os.path.join(opts["out"], "table3_rows.csv"), rows, cols)
        log.info("wrote %s", path)
        sys.stdout.write(csv_text(rows, cols))
        return EXIT_OK
    if art == "fig6":
        problem, epsilons = "example1", (1e-5, 1e-6)
    else:
        problem, epsilons = "example2", (1e-4, 1e-5, 1e-6, 1e-7)
    if _explicit(args, "epsilon") or "epsilon" in cfg_keys:
        epsilons = (opts["epsilon"],)
    modes = (opts["indicator"],) if (_explicit(args, "indicator") or "indicator" in cfg_keys) \
        else ("psi", "psi_u")
    for eps in epsilons:
        for mode in modes:
            config = _run_config(opts, problem=problem, bc=None, epsilon=eps,
                                 theta=pick("theta", 0.3), indicator_mode=mode,
                                 max_iters=pick("max_iters", 30), tol=pick("tol", None),
                                 max_elements=pick("max_elements", FIGURE_ELEMENT_BUDGET))
            run = _adapt(config, opts, f"{art}_eps{eps:.0e}_{mode}")
            last = run.records[-1]
            print(f"{art} eps={fmt(eps)} mode={mode}: {len(run.records)} iterations, "
                  f"{last.n_tri} triangles, eta_total={fmt(last.eta_total)}")
    return EXIT_OK


def cmd_check(args):
    from .checks import run_checks
    results = run_checks(quick=args.quick)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_SOLVER


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "check":
            return cmd_check(args)
        opts = _merged(args)
        handler = {"solve": cmd_solve, "adapt": cmd_adapt, "reproduce": cmd_reproduce}
        return handler[args.command](args, opts)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
