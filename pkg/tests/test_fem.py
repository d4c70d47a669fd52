from math import factorial

import numpy as np
import pytest
import sympy as sy
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import line_mass, p1_stiffness_mass
from robin_dd import fem, mesh, pstructure
from robin_dd.problems import MANUFACTURED


@pytest.mark.parametrize("dim,order", [(1, 1), (1, 4), (1, 7), (2, 2), (2, 4), (2, 6)])
def test_quadrature_exact_on_monomials(dim, order):
    q = fem.make_quadrature(dim, order)
    assert np.all(q.weights > 0)
    if dim == 1:
        x = q.points[:, 1]
        for k in range(order + 1):
            assert q.weights @ x**k == pytest.approx(1 / (k + 1), rel=1e-13)
    else:
        x, y = q.points[:, 1], q.points[:, 2]
        for a in range(order + 1):
            for b in range(order + 1 - a):
                exact = factorial(a) * factorial(b) / factorial(a + b + 2)
                assert q.weights @ (x**a * y**b) == pytest.approx(exact, rel=1e-12)


def test_quadrature_rejects_order_zero():
    with pytest.raises(ValueError):
        fem.make_quadrature(1, 0)


def test_integral_of_x_squared():
    m = mesh.build_interval_mesh(0, 1, 7)
    ps = pstructure.p_laplacian(2.0, 1.0, r=2.0)
    # ||x||_{L^2}^2 = 1/3, P1 interpolation of x is exact
    assert fem.norm_lr(m, m.points[:, 0], ps) ** 2 == pytest.approx(1 / 3, rel=1e-14)
    assert fem.load_vector(m, lambda X: X[..., 0] ** 2).sum() == pytest.approx(1 / 3, rel=1e-14)


@pytest.mark.parametrize("build", [lambda: mesh.build_interval_mesh(0, 1, 6),
                                   lambda: mesh.build_rect_mesh(1.0, 2.0, 3, 4)])
def test_linear_residual_and_jacobian_match_dense_oracle(build):
    m = build()
    lam = 1.7
    K, Mm = p1_stiffness_mass(m)
    u = np.random.default_rng(0).normal(size=m.num_vertices)
    f = lambda X: 1 + 2 * X[..., 0]  # noqa: E731
    r = fem.residual_vector(pstructure.linear(lam), m, u, f)
    np.testing.assert_allclose(r, (K + lam * Mm) @ u - Mm @ f(m.points), atol=1e-12)
    J = fem.jacobian_matrix(pstructure.linear(lam), m, u).toarray()
    np.testing.assert_allclose(J, K + lam * Mm, atol=1e-12)


def test_scalar_and_missing_source():
    m = mesh.build_interval_mesh(0, 2, 4)
    np.testing.assert_allclose(fem.load_vector(m, 3.0).sum(), 6.0)
    np.testing.assert_array_equal(fem.load_vector(m, None), 0.0)


def test_assembled_residual_masks_dirichlet():
    m = mesh.build_rect_mesh(1, 1, 3, 3)
    r = fem.assemble_residual(pstructure.reaction(3), m, np.ones(m.num_vertices), 1.0)
    assert np.all(r[m.dirichlet_mask()] == 0)
    J = fem.assemble_jacobian(pstructure.reaction(3), m, np.ones(m.num_vertices)).toarray()
    d = np.flatnonzero(m.dirichlet_mask())
    np.testing.assert_array_equal(J[d][:, d], np.eye(len(d)))
    free = np.flatnonzero(~m.dirichlet_mask())
    assert np.all(J[np.ix_(d, free)] == 0)


@pytest.mark.parametrize("ps", [pstructure.resolvent(3), pstructure.reaction(4), pstructure.reaction(3)],
                         ids=["res3", "react4", "react3"])
@pytest.mark.parametrize("dim", [1, 2])
def test_assembled_jacobian_matches_finite_differences(ps, dim):
    m = mesh.build_interval_mesh(0, 1, 8) if dim == 1 else mesh.build_rect_mesh(1, 1, 4, 4)
    rng = np.random.default_rng(5)
    u = rng.normal(size=m.num_vertices) + 0.5 * m.points.sum(axis=1)
    J = fem.jacobian_matrix(ps, m, u, eps_reg=0.0).toarray()
    h = 1e-6
    fd = np.empty_like(J)
    for k in range(m.num_vertices):
        e = np.zeros(m.num_vertices)
        e[k] = h
        fd[:, k] = (fem.residual_vector(ps, m, u + e) - fem.residual_vector(ps, m, u - e)) / (2 * h)
    assert np.max(np.abs(J - fd)) <= 1e-4 * np.max(np.abs(fd))


def test_interface_mass_matches_line_oracle(dec2d):
    Mg = fem.interface_mass(dec2d)
    # full line mass on the cut, then drop the two boundary endpoints
    ys = np.linspace(0, 1, 9)
    full = line_mass(np.column_stack([np.full(9, 0.5), ys]))
    np.testing.assert_allclose(Mg, full[1:-1, 1:-1], atol=1e-15)
    assert not Mg.flags.writeable


def test_interface_mass_1d_is_point_pairing(dec1d):
    np.testing.assert_array_equal(fem.interface_mass(dec1d), [[1.0]])
    assert fem.l2_gamma_norm(fem.interface_mass(dec1d), np.array([-3.0])) == 3.0


def test_seminorm_exact_for_linear_function():
    m = mesh.build_rect_mesh(2, 1, 3, 3)
    u = 3 * m.points[:, 0] + 4 * m.points[:, 1]
    ps = pstructure.reaction(3)
    assert fem.seminorm_grad_lp(m, u, ps) == pytest.approx((2 * 5.0**3) ** (1 / 3))


def test_function_shape_checked():
    m = mesh.build_interval_mesh(0, 1, 4)
    with pytest.raises(ValueError):
        fem.residual_vector(pstructure.linear(), m, np.zeros(3))


def test_manufactured_sources_match_symbolic_oracle():
    x, y = sy.symbols("x y", real=True)
    rng = np.random.default_rng(2)
    for mms in MANUFACTURED.values():
        sol = sy.sympify(mms.solution.replace("^", "**"), locals={"x": x, "y": y})
        syms = (x,) if mms.dim == 1 else (x, y)
        grad = [sy.diff(sol, v) for v in syms]
        norm = sy.sqrt(sum(g**2 for g in grad))
        div = sum(sy.diff(norm ** (mms.p - 2) * g, v) for g, v in zip(grad, syms))
        g_of_u = mms.lam * sol if mms.preset != "reaction" else mms.lam * sy.Abs(sol) ** (mms.p - 2) * sol
        f_sym = sy.lambdify(syms, -div + g_of_u, "numpy")
        X = rng.uniform(0.01, 0.99, size=(50, mms.dim))
        X = X[np.abs(X[:, 0] - 0.5) > 1e-3]  # |1-2x| is kinked at 1/2
        np.testing.assert_allclose(mms.f()(X), f_sym(*X.T), rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.sampled_from([2.0, 3.0, 4.0]))
def test_residual_monotone_nonnegative(seed, p):
    # <R(u) - R(v), u - v> >= 0 for any monotone alpha, g
    m = mesh.build_rect_mesh(1, 1, 3, 3)
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, m.num_vertices))
    ps = pstructure.reaction(p)
    diff = fem.residual_vector(ps, m, u) - fem.residual_vector(ps, m, v)
    assert diff @ (u - v) >= -1e-12


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_residual_of_constant_has_zero_flux_part(a, b):
    # with alpha only, constants are in the kernel; g = lam u then gives lam * M 1 c
    m = mesh.build_interval_mesh(0, 1, 5)
    r = fem.residual_vector(pstructure.linear(1.0), m, np.full(m.num_vertices, a), b)
    np.testing.assert_allclose(r, (a - b) * fem.load_vector(m, 1.0), atol=1e-12)


def test_zero_state_zero_source_zero_residual():
    for m in (mesh.build_interval_mesh(0, 1, 4), mesh.build_rect_mesh(1, 1, 3, 3)):
        for ps in (pstructure.linear(), pstructure.reaction(3), pstructure.resolvent(4)):
            assert not fem.residual_vector(ps, m, np.zeros(m.num_vertices), None).any()


def test_mms_residual_of_interpolant_decays():
    # discrete residual of the interpolated exact solution measured in the dual-scaled norm h^{-1/2} |r|
    mms = MANUFACTURED["p3_1d"]
    ps = pstructure.resolvent(3)
    norms = []
    for n in (16, 32, 64, 128):
        m = mesh.build_interval_mesh(0, 1, n)
        r = fem.assemble_residual(ps, m, mms.exact()(m.points), mms.f())
        norms.append(np.linalg.norm(r) * np.sqrt(n))
    rates = np.log2(np.array(norms[:-1]) / np.array(norms[1:]))
    assert np.all(rates > 0.9)


def test_jacobian_directional_fd_and_symmetry():
    m = mesh.build_rect_mesh(1, 1, 5, 5)
    ps = pstructure.reaction(3)
    rng = np.random.default_rng(11)
    u = m.points[:, 0] ** 2 + 2 * m.points[:, 1] + 0.1 * rng.normal(size=m.num_vertices)
    J = fem.jacobian_matrix(ps, m, u, eps_reg=0.0)
    assert abs(J - J.T).max() <= 1e-12
    for _ in range(5):
        d = rng.normal(size=m.num_vertices)
        h = 1e-6
        fd = (fem.residual_vector(ps, m, u + h * d, 1.0) - fem.residual_vector(ps, m, u - h * d, 1.0)) / (2 * h)
        assert np.linalg.norm(J @ d - fd) <= 1e-4 * np.linalg.norm(fd)


def test_interface_mass_total_and_definiteness():
    dec = mesh.decompose(mesh.build_rect_mesh(1, 1, 4, 4), "x", 0.5)
    Mg = fem.interface_mass(dec)
    np.testing.assert_allclose(Mg, Mg.T)
    # total is the integral of (sum of interior hats)^2: 1/2 plateau plus two ramps of h/3
    assert Mg.sum() == pytest.approx(0.5 + 2 * 0.25 / 3, abs=1e-14)
    np.testing.assert_allclose(fem.interface_weights(dec), [0.25 - 1 / 24, 0.25, 0.25 - 1 / 24])
    assert np.all(np.linalg.eigvalsh(Mg) > 0)


def test_norm_examples():
    m1 = mesh.build_interval_mesh(0, 1, 8)
    assert fem.seminorm_grad_lp(m1, m1.points[:, 0], pstructure.resolvent(3)) == pytest.approx(1.0)
    assert fem.norm_w1p(m1, np.zeros(m1.num_vertices), pstructure.resolvent(3)) == 0.0
    m2 = mesh.build_rect_mesh(1, 1, 6, 6)
    val = fem.norm_lr(m2, m2.points[:, 0], pstructure.resolvent(3)) ** 2
    assert abs(val - 1 / 3) <= 1e-12
