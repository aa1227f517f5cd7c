"""Invariant checks behind ``crafem check``.

Each check returns ``(passed, detail)``; the oracles here are deliberately
naive (dense loops, brute force) so they share no code path with the
production kernels they test.
"""
import itertools

import numpy as np

from .adaptivity import dorfler_mark
from .assembly import assemble_operator
from .estimator import estimate
from .femspace import build_space
from .mesh import is_conforming, min_angles, refine, unit_square_initial
from .quadrature import triangle_rule
from .solver import galerkin_residuals, solve
from .verification import example1, exact_errors, sine_solution


def dense_oracle(mesh):
    """Dense stiffness and mass matrices from a per-triangle quadrature loop."""
    n = mesh.n_vertices
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    rule = triangle_rule(2)
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        jac = np.array([p[1] - p[0], p[2] - p[0]]).T
        det = abs(np.linalg.det(jac))
        ref_grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        grads = ref_grads @ np.linalg.inv(jac)
        for bary, w in zip(rule.points, rule.weights):
            for a in range(3):
                for b in range(3):
                    K[tri[a], tri[b]] += w * det * grads[a] @ grads[b]
                    M[tri[a], tri[b]] += w * det * bary[a] * bary[b]
    return K, M


def check_reference_matrices():
    mesh = unit_square_initial()
    space = build_space(mesh)
    K = assemble_operator(space, "stiffness").to_dense()
    M = assemble_operator(space, "mass").to_dense()
    Kd, Md = dense_oracle(mesh)
    err = max(np.abs(K - Kd).max(), np.abs(M - Md).max())
    return err < 1e-12, f"max deviation {err:.2e}"


def check_assembly_refined(rng):
    mesh = unit_square_initial()
    for _ in range(2):
        mesh = refine(mesh, rng.choice(mesh.n_triangles, size=3, replace=False))
    space = build_space(mesh)
    Kd, Md = dense_oracle(mesh)
    err = max(np.abs(assemble_operator(space, "stiffness").to_dense() - Kd).max(),
              np.abs(assemble_operator(space, "mass").to_dense() - Md).max())
    return err < 1e-12, f"{mesh.n_triangles} triangles, max deviation {err:.2e}"


def check_refinement(rng, rounds=20):
    mesh = unit_square_initial()
    for _ in range(rounds):
        k = max(1, mesh.n_triangles // 10)
        mesh = refine(mesh, rng.choice(mesh.n_triangles, size=k, replace=False))
    angle = float(min_angles(mesh).min())
    ok = is_conforming(mesh) and angle >= 22.5
    return ok, f"{mesh.n_triangles} triangles, min angle {angle:.2f} deg"


def check_zero_data():
    mesh = refine(unit_square_initial(), range(8))
    space = build_space(mesh)
    worst = 0.0
    for kind in ("navier", "clamped"):
        zero = lambda x, y: 0.0 * x  # noqa: E731
        sol = solve(space, zero, 1e-3, kind)
        ind = estimate(space, sol, zero)
        worst = max(worst, np.abs(sol.psi).max(), np.abs(sol.u).max(),
                    ind.eta_psi.max(), ind.eta_u.max())
    return worst == 0.0, f"max |value| {worst:.1e}"


def check_galerkin():
    mesh = unit_square_initial()
    for _ in range(4):
        mesh = refine(mesh, range(mesh.n_triangles))
    space = build_space(mesh)
    worst = 0.0
    for exact in (sine_solution(1e-2), example1(1e-3)):
        sol = solve(space, exact.f, exact.epsilon, exact.bc_kind, tol=1e-12)
        worst = max(worst, *galerkin_residuals(space, sol, exact.f))
    return worst <= 1e-9, f"max relative residual {worst:.2e}"


def check_sine_rate(levels=4):
    """Energy error reduction per uniform refinement (two bisection rounds).

    The sequence starts from the 32-triangle mesh; the eight-triangle mesh
    has a single interior vertex and is far from the asymptotic regime.
    """
    exact = sine_solution(1.0)
    mesh = unit_square_initial()
    errs = []
    for _ in range(levels + 1):
        for _ in range(2):
            mesh = refine(mesh, range(mesh.n_triangles))
        space = build_space(mesh)
        sol = solve(space, exact.f, 1.0, "navier", tol=1e-12)
        errs.append(exact_errors(space, sol, exact)["energy_psi"])
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    ok = bool(np.all((ratios >= 1.6) & (ratios <= 2.4)))
    return ok, "reduction factors " + ", ".join(f"{r:.3f}" for r in ratios)


def _five_point(g, x, y, h):
    return (g(x + h, y) + g(x - h, y) + g(x, y + h) + g(x, y - h) - 4 * g(x, y)) / h ** 2


def check_finite_differences(rng, n=100, eps=1e-3):
    """Closed-form gradient, psi and f of example 1 against centred differences."""
    ex = example1(eps)
    h = max(eps, 1e-4)
    x, y = rng.uniform(0.05, 0.95, size=(2, n))

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / max(np.abs(b).max(), 1e-300))

    gx = (ex.u(x + h, y) - ex.u(x - h, y)) / (2 * h)
    gy = (ex.u(x, y + h) - ex.u(x, y - h)) / (2 * h)
    ax, ay = ex.grad_u(x, y)
    worst = max(rel(gx, ax), rel(gy, ay), rel(-_five_point(ex.u, x, y, h), ex.psi(x, y)))
    f_fd = -eps ** 2 * _five_point(ex.psi, x, y, h) + ex.psi(x, y)
    worst = max(worst, rel(f_fd, ex.f(x, y)))
    return worst <= 1e-4, f"max relative deviation {worst:.2e}"


def check_dorfler(rng, trials=200):
    for _ in range(trials):
        n = int(rng.integers(1, 11))
        eta = rng.random(n) ** 3
        theta = float(rng.uniform(0.05, 1.0))
        marked = dorfler_mark(eta, theta)
        need = theta * eta.sum() * (1 - 1e-12)
        best = next(k for k in range(n + 1)
                    if any(eta[list(c)].sum() >= need for c in itertools.combinations(range(n), k)))
        if len(marked) != best or eta[marked].sum() < need:
            return False, f"eta={eta}, theta={theta}: got {len(marked)}, optimum {best}"
    return True, f"{trials} random cases"


def run_checks(quick=False, seed=0):
    rng = np.random.default_rng(seed)
    checks = [
        ("reference element matrices", check_reference_matrices),
        ("assembly against dense oracle", lambda: check_assembly_refined(rng)),
        ("refinement conformity and angles", lambda: check_refinement(rng)),
        ("zero data gives zero solution", check_zero_data),
        ("Galerkin residuals", check_galerkin),
        ("example 1 finite differences", lambda: check_finite_differences(rng)),
        ("Dorfler minimality", lambda: check_dorfler(rng)),
    ]
    if not quick:
        checks.append(("sine energy error reduction", check_sine_rate))
    out = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
