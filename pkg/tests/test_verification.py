import mpmath
import numpy as np
import pytest
import sympy as sp
from scipy.integrate import dblquad

from crafem.adaptivity import RunConfig, adaptive_solve
from crafem.femspace import build_space
from crafem.solver import MixedSolution
from crafem.verification import (ExactSolution, effectivity, exact_errors, example1,
                                 example2_source, plate_polynomial_solution, sine_solution)

from conftest import uniform

X, Y, EPS = sp.symbols("x y epsilon", positive=True)
U1 = 256 * (X ** 2 + EPS ** 2 * (1 - sp.exp(-X / EPS)) ** 2) * (X - 1) ** 2 * Y ** 2 * (Y - 1) ** 2


def _lap(e):
    return sp.diff(e, X, 2) + sp.diff(e, Y, 2)


def _symbolic_fields(u_expr, eps):
    psi = -_lap(u_expr)
    f = EPS ** 2 * _lap(_lap(u_expr)) - _lap(u_expr)
    exprs = {"u": u_expr, "ux": sp.diff(u_expr, X), "uy": sp.diff(u_expr, Y), "psi": psi,
             "px": sp.diff(psi, X), "py": sp.diff(psi, Y), "f": f}
    return {k: sp.lambdify((X, Y), v.subs(EPS, eps), "mpmath") for k, v in exprs.items()}


def _hardcoded(ex, x, y):
    ux, uy = ex.grad_u(x, y)
    px, py = ex.grad_psi(x, y)
    return {"u": ex.u(x, y), "ux": ux, "uy": uy, "psi": ex.psi(x, y), "px": px, "py": py,
            "f": ex.f(x, y)}


@pytest.mark.parametrize("eps", [0.3, 1e-2, 1e-5])
def test_example1_fields_match_computer_algebra(eps, rng):
    mpmath.mp.dps = 40
    sym = _symbolic_fields(U1, eps)
    ex = example1(eps)
    # uniform samples plus samples inside the layer
    x = np.concatenate([rng.uniform(0, 1, 20), eps * rng.uniform(0, 8, 20)])
    y = rng.uniform(0, 1, 40)
    got = _hardcoded(ex, x, y)
    for name, fn in sym.items():
        ref = np.array([float(fn(mpmath.mpf(a), mpmath.mpf(b))) for a, b in zip(x, y)])
        scale = np.abs(ref).max()
        assert np.allclose(got[name], ref, rtol=1e-9, atol=1e-11 * scale), name


def _five_point(g, x, y, h):
    return (g(x + h, y) + g(x - h, y) + g(x, y + h) + g(x, y - h) - 4 * g(x, y)) / h ** 2


def _fd_worst(ex, x, y, h):
    def rel(a, b):
        return float(np.max(np.abs(a - b)) / np.abs(b).max())
    cd = lambda g, dx, dy: (g(x + dx, y + dy) - g(x - dx, y - dy)) / (2 * h)  # noqa: E731
    ax, ay = ex.grad_u(x, y)
    px, py = ex.grad_psi(x, y)
    e2 = ex.epsilon ** 2
    return {
        "grad_u": max(rel(cd(ex.u, h, 0), ax), rel(cd(ex.u, 0, h), ay)),
        "psi": rel(-_five_point(ex.u, x, y, h), ex.psi(x, y)),
        "grad_psi": max(rel(cd(ex.psi, h, 0), px), rel(cd(ex.psi, 0, h), py)),
        "f": rel(-e2 * _five_point(ex.psi, x, y, h) + ex.psi(x, y), ex.f(x, y)),
    }


@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-5, 1e-6])
def test_example1_finite_difference_consistency(eps, rng):
    ex = example1(eps)
    # 100 points away from the layer with step 1e-3 * max(eps, 1e-1): the
    # exponentials have decayed there and the fields are smooth
    far = rng.uniform(0.05, 0.95, size=(2, 100))
    far[0] = np.maximum(far[0], 40 * eps)
    worst = _fd_worst(ex, far[0], far[1], 1e-3 * max(eps, 1e-1))
    assert max(worst.values()) <= 1e-4, worst
    # 100 points inside the layer, step proportional to eps
    x = eps * rng.uniform(1.0, 10.0, 100)
    y = rng.uniform(0.05, 0.95, 100)
    worst = _fd_worst(ex, x, y, 1e-3 * eps)
    assert max(worst.values()) <= 1e-4, worst


@pytest.mark.parametrize("eps", [1e-1, 1e-5])
def test_example1_boundary_compliance(eps, rng):
    ex = example1(eps)
    t = rng.uniform(0, 1, 50)
    zero, one = np.zeros_like(t), np.ones_like(t)
    for x, y, normal in ((zero, t, 0), (one, t, 0), (t, zero, 1), (t, one, 1)):
        assert np.all(np.abs(ex.u(x, y)) <= 1e-12)
        assert np.all(np.abs(ex.grad_u(x, y)[normal]) <= 1e-12)
    assert np.all(ex.grad_u(zero, t)[0] == 0.0)


def test_sine_navier_boundary_compliance(rng):
    ex = sine_solution(1e-2)
    t = rng.uniform(0, 1, 50)
    for x, y in ((0 * t, t), (0 * t + 1, t), (t, 0 * t), (t, 0 * t + 1)):
        assert np.all(np.abs(ex.u(x, y)) <= 1e-12)
        assert np.all(np.abs(ex.psi(x, y)) <= 1e-12)


def test_plate_polynomial_meets_both_conditions(rng):
    ex = plate_polynomial_solution(1e-2)
    t = rng.uniform(0, 1, 30)
    for x, y in ((0 * t, t), (0 * t + 1, t), (t, 0 * t), (t, 0 * t + 1)):
        assert np.all(np.abs(ex.u(x, y)) <= 1e-12)
        assert np.all(np.abs(np.stack(ex.grad_u(x, y))) <= 1e-12)
        assert np.all(np.abs(ex.psi(x, y)) <= 1e-12)


def test_example1_centre_value():
    for eps in (1e-3, 1e-5):
        assert example1(eps).u(0.5, 0.5) == pytest.approx(1.0, abs=10 * eps ** 2)


def test_example2_source_values_and_symmetry(rng):
    f = example2_source()
    assert f(0.0, 0.0) == 0.0
    assert f(0.25, 0.25) == pytest.approx(2 * np.pi ** 2)
    x, y = rng.uniform(0, 1, (2, 50))
    assert np.allclose(f(x, y), f(y, x))
    assert np.allclose(f(x, y), f(1 - x, y))


def test_bad_epsilon():
    with pytest.raises(ValueError):
        example1(0.0)


def test_linear_fields_are_reproduced_exactly():
    mesh = uniform(3)
    space = build_space(mesh)
    psi = lambda x, y: 1.0 + 2.0 * x - 3.0 * y  # noqa: E731
    u = lambda x, y: 0.5 - x + 4.0 * y  # noqa: E731
    ex = ExactSolution(u, lambda x, y: (-1.0 + 0 * x, 4.0 + 0 * y), psi,
                       lambda x, y: (2.0 + 0 * x, -3.0 + 0 * y), psi, 0.1, "navier")
    v = mesh.vertices
    sol = MixedSolution(psi(v[:, 0], v[:, 1]), u(v[:, 0], v[:, 1]), 0.1, "navier")
    err = exact_errors(space, sol, ex)
    assert max(err.values()) <= 1e-13


def test_zero_solution_gives_exact_norms_of_sine():
    eps = 0.2
    space = build_space(uniform(3))
    n = space.n_dofs
    err = exact_errors(space, MixedSolution(np.zeros(n), np.zeros(n), eps, "navier"),
                       sine_solution(eps))
    pi = np.pi
    assert err["energy_psi"] == pytest.approx(np.sqrt(pi ** 4 + 2 * eps ** 2 * pi ** 6), rel=1e-10)
    assert err["h1_u"] == pytest.approx(pi / np.sqrt(2), rel=1e-10)


def test_zero_solution_gives_exact_norm_of_example1():
    eps = 0.05
    ex = example1(eps)
    space = build_space(uniform(4))
    n = space.n_dofs
    err = exact_errors(space, MixedSolution(np.zeros(n), np.zeros(n), eps, "clamped"), ex)

    def integrand(y, x):
        px, py = ex.grad_psi(x, y)
        return ex.psi(x, y) ** 2 + eps ** 2 * (px ** 2 + py ** 2)

    ref = sum(dblquad(integrand, a, b, 0, 1, epsabs=0, epsrel=1e-10)[0]
              for a, b in ((0, 10 * eps), (10 * eps, 1)))
    assert err["energy_psi"] == pytest.approx(np.sqrt(ref), rel=1e-6)


def test_quadrature_depth_stability():
    meshes = []
    run = adaptive_solve(RunConfig(max_iters=12),
                         callback=lambda rec, space, sol, ind: meshes.append((rec, space, sol)))
    ex = example1(1e-5)
    for rec, space, sol in meshes[7:]:
        a = exact_errors(space, sol, ex, levels=0)
        b = exact_errors(space, sol, ex, levels=1)
        for key in a:
            assert abs(a[key] - b[key]) < 0.01 * b[key], (rec.iter, key)
    assert len(run.records) == 12


def test_effectivity_definitions():
    assert effectivity(2.0, 5.0, {"energy_psi": 2.0, "combined": 7.0}) == {
        "eff_psi": 1.0, "eff_combined": 1.0}
    e = effectivity(1.1557, 0.0, {"energy_psi": 1.1593, "combined": 1.0})
    assert round(e["eff_psi"], 4) == 0.9969
    # the combined index uses the plain sum of the two estimators
    # the inputs carry four decimals, which bounds the ratio to about 6e-4
    e = effectivity(0.2, 0.0999, {"energy_psi": 1.0, "combined": 0.1808})
    assert e["eff_combined"] == pytest.approx(1.6583, abs=6e-4)
    with pytest.raises(ZeroDivisionError):
        effectivity(1.0, 1.0, {"energy_psi": 0.0, "combined": 1.0})
