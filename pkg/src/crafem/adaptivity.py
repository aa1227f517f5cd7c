"""Dörfler marking and the adaptive solve / estimate / mark / refine loop."""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .estimator import estimate
from .femspace import build_space
from .linalg import DEFAULT_TOL, SolverError
from .mesh import prolongate, refine_with_parents, unit_square_initial
from .solver import BC_KINDS, solve
from .verification import (effectivity, exact_errors, example1, example2_source,
                           plate_polynomial_solution, sine_solution)

log = logging.getLogger(__name__)

INDICATOR_MODES = ("psi", "psi_u")
_MODE_ALIASES = {"psi": "psi", "psi_only": "psi", "psi_u": "psi_u", "psi_plus_u": "psi_u"}
PROBLEMS = ("example1", "example2", "sine", "plate_poly")


def dorfler_mark(eta_sq, theta):
    """Smallest set of elements carrying a ``theta`` share of ``sum(eta_sq)``.

    Elements are taken greedily by decreasing ``eta_sq``; equal values are
    taken in increasing index order.  Returns a sorted index array.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    eta_sq = np.asarray(eta_sq, dtype=float)
    if np.any(eta_sq < 0) or not np.all(np.isfinite(eta_sq)):
        raise ValueError("squared indicators must be finite and nonnegative")
    total = eta_sq.sum()
    if total == 0.0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(eta_sq)), -eta_sq))
    csum = np.cumsum(eta_sq[order])
    # a relative slack absorbs the rounding difference between sum and cumsum
    target = theta * total * (1.0 - 1e-12)
    count = min(int(np.searchsorted(csum, target, side="left")) + 1, len(order))
    return np.sort(order[:count])


@dataclass(frozen=True)
class Problem:
    f: callable
    bc_kind: str
    exact: object = None
    name: str = "custom"


def resolve_problem(name, epsilon, bc=None):
    """Map a problem name to its source, boundary condition and exact solution.

    ``bc`` overrides the problem's natural boundary condition where the
    exact solution allows it (``plate_poly`` satisfies both).
    """
    if name == "example1":
        ex = example1(epsilon)
        kind = ex.bc_kind
    elif name == "example2":
        kind = "navier"
        if bc not in (None, kind):
            raise ValueError("example2 is posed with navier conditions")
        return Problem(example2_source(), kind, None, name)
    elif name == "sine":
        ex = sine_solution(epsilon)
        kind = ex.bc_kind
    elif name == "plate_poly":
        ex = plate_polynomial_solution(epsilon)
        kind = bc or "clamped"
    else:
        raise ValueError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}")
    if bc is not None and bc != kind:
        raise ValueError(f"{name} is posed with {kind} conditions, not {bc}")
    if kind not in BC_KINDS:
        raise ValueError(f"unknown boundary condition {kind!r}")
    return Problem(ex.f, kind, ex, name)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one adaptive run.

    ``tol`` stops the run once the monitored estimator drops to it: the
    global eta_psi in ``psi`` mode, eta_total in ``psi_u`` mode.
    ``max_elements`` stops it after the first iteration whose mesh has at
    least that many triangles.
    """

    problem: str = "example1"
    epsilon: float = 1e-5
    theta: float = 0.5
    indicator_mode: str = "psi"
    max_iters: int = 16
    tol: float = None
    solver_tol: float = DEFAULT_TOL
    degree: int = 1
    bc: str = None
    warm_start: bool = True
    max_elements: int = None

    def __post_init__(self):
        mode = _MODE_ALIASES.get(self.indicator_mode)
        if mode is None:
            raise ValueError(f"unknown indicator mode {self.indicator_mode!r}")
        object.__setattr__(self, "indicator_mode", mode)
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.solver_tol > 0:
            raise ValueError("solver_tol must be positive")
        if self.max_elements is not None and self.max_elements < 1:
            raise ValueError("max_elements must be positive")
        if self.degree != 1:
            raise ValueError("only degree 1 elements are implemented")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class IterationRecord:
    iter: int
    n_tri: int
    n_dof: int
    eta_psi: float
    eta_u: float
    eta_total: float
    err_psi_E: float = None
    err_u_h1: float = None
    err_combined: float = None
    eff_psi: float = None
    eff_combined: float = None
    h_min: float = None

    @property
    def eta_sum(self):
        return self.eta_psi + self.eta_u

    def monitored(self, mode):
        return self.eta_psi if mode == "psi" else self.eta_total


@dataclass
class AdaptiveRun:
    config: RunConfig
    records: list = field(default_factory=list)
    mesh: object = None
    solution: object = None
    indicators: object = None
    stop_reason: str = ""

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def has_exact(self):
        return bool(self.records) and self.records[0].err_psi_E is not None


class AdaptiveRunError(SolverError):
    """A solver failure during an adaptive run; ``run`` holds the completed part."""

    def __init__(self, message, run, report=None):
        super().__init__(message, report)
        self.run = run


def adaptive_solve(config, mesh=None, problem=None, callback=None):
    """Run the adaptive loop described by ``config``.

    Parameters
    ----------
    config : RunConfig
    mesh : TriMesh, optional
        Starting mesh; the eight-triangle unit square by default.
    problem : Problem, optional
        Overrides ``config.problem`` (used for custom sources).
    callback : callable, optional
        Called as ``callback(record, space, solution, indicators)`` after
        every estimate.

    Returns
    -------
    AdaptiveRun
    """
    if problem is None:
        problem = resolve_problem(config.problem, config.epsilon, config.bc)
    mesh = unit_square_initial() if mesh is None else mesh
    run = AdaptiveRun(config)
    guess = None
    for k in range(1, config.max_iters + 1):
        space = build_space(mesh, config.degree)
        try:
            sol = solve(space, problem.f, config.epsilon, problem.bc_kind,
                        tol=config.solver_tol, x0=guess)
        except SolverError as exc:
            run.stop_reason = "solver failure"
            raise AdaptiveRunError(f"iteration {k}: {exc}", run, exc.report) from exc
        ind = estimate(space, sol, problem.f)
        rec = IterationRecord(k, mesh.n_triangles, space.n_dofs, ind.eta_psi_global,
                              ind.eta_u_global, ind.eta_total_global, h_min=mesh.h_min)
        if problem.exact is not None:
            err = exact_errors(space, sol, problem.exact)
            rec.err_psi_E, rec.err_u_h1, rec.err_combined = (
                err["energy_psi"], err["h1_u"], err["combined"])
            try:
                eff = effectivity(rec.eta_psi, rec.eta_u, err)
                rec.eff_psi, rec.eff_combined = eff["eff_psi"], eff["eff_combined"]
            except ZeroDivisionError:
                pass
        run.records.append(rec)
        run.mesh, run.solution, run.indicators = mesh, sol, ind
        log.info("iter %d: %d triangles, %d dofs, eta_psi=%.4e eta_u=%.4e h_min=%.3e",
                 k, rec.n_tri, rec.n_dof, rec.eta_psi, rec.eta_u, rec.h_min)
        if callback is not None:
            callback(rec, space, sol, ind)
        if config.tol is not None and rec.monitored(config.indicator_mode) <= config.tol:
            run.stop_reason = "tolerance reached"
            break
        if k == config.max_iters:
            run.stop_reason = "iteration limit"
            break
        if config.max_elements is not None and rec.n_tri >= config.max_elements:
            run.stop_reason = "element limit"
            break
        marked = dorfler_mark(ind.marking_weights(config.indicator_mode), config.theta)
        if len(marked) == 0:
            run.stop_reason = "nothing to refine"
            break
        mesh, parents = refine_with_parents(mesh, marked)
        guess = None
        if config.warm_start:
            guess = (prolongate(sol.psi, parents), prolongate(sol.u, parents))
    return run


def tolerance_table(run, tolerances):
    """First record meeting each tolerance on the monitored estimator.

    Returns a list of ``(tol, record or None)``.
    """
    mode = run.config.indicator_mode
    out = []
    for tol in tolerances:
        hit = next((r for r in run.records if r.monitored(mode) <= tol), None)
        out.append((tol, hit))
    return out


def loglog_slope(n, values, last=5):
    """Least-squares slope of log(values) against log(n) over the last points."""
    n = np.asarray(n, dtype=float)[-last:]
    v = np.asarray(values, dtype=float)[-last:]
    if len(n) < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(np.log(n), np.log(v), 1)[0])
