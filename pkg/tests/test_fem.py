import math

import numpy as np
import pytest

from imexl1.fem import (
    CoefficientError,
    CoefficientSet,
    assemble_a0,
    assemble_a1,
    assemble_load,
    assemble_mass,
    build_fe_space,
    build_interval_mesh,
    build_unit_square_mesh,
    error_norm,
    export_mesh_tables,
    fe_eval,
    fe_grad_eval,
    fe_norm,
    interpolate,
    interval_rule,
    l2_project,
    poincare_constant,
    ritz_project,
    triangle_rule,
)


def unit_coeffs(dim):
    if dim == 1:
        return CoefficientSet(A=lambda x, t: np.ones_like(x))
    eye = np.eye(2)
    return CoefficientSet(A=lambda x, t: np.broadcast_to(eye, (x.shape[0], 2, 2)).copy())


def ex1_coeffs():
    # 1D variable coefficients: A=2+x^2+sin t, b=1+x^2+t^2, c=1+2x^2+sin t
    return CoefficientSet(
        A=lambda x, t: 2.0 + x**2 + math.sin(t),
        b=lambda x, t: 1.0 + x**2 + t**2,
        c=lambda x, t: 1.0 + 2.0 * x**2 + math.sin(t),
    )


# ----------------------------------------------------------------- meshes

def test_interval_mesh_basic():
    mesh = build_interval_mesh(0.0, 1.0, 4)
    np.testing.assert_allclose(mesh.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    space = build_fe_space(mesh)
    assert space.h == pytest.approx(0.25)
    assert list(space.interior) == [1, 2, 3]


def test_interval_mesh_h_and_measure():
    mesh = build_interval_mesh(-1.5, 1.5, 3)
    space = build_fe_space(mesh)
    assert space.h == pytest.approx(1.0)
    lengths = np.diff(mesh.nodes)
    assert lengths.sum() == pytest.approx(3.0)


def test_interval_mesh_errors():
    with pytest.raises(ValueError):
        build_interval_mesh(1.0, 0.0, 4)
    with pytest.raises(ValueError):
        build_interval_mesh(0.0, 1.0, 1)


def test_unit_square_counts():
    mesh = build_unit_square_mesh(2)
    assert mesh.n_nodes == 9
    assert mesh.n_elements == 8
    assert int(mesh.boundary.sum()) == 8
    coords = mesh.nodes[mesh.elements]
    v0 = coords[:, 0]
    d1 = coords[:, 1] - v0
    d2 = coords[:, 2] - v0
    areas = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    np.testing.assert_allclose(areas, 1.0 / 8.0, rtol=1e-14)
    assert areas.sum() == pytest.approx(1.0, rel=1e-14)


def test_unit_square_errors():
    with pytest.raises(ValueError):
        build_unit_square_mesh(1)


def test_mesh_export(tmp_path):
    mesh = build_unit_square_mesh(2)
    npath, epath = export_mesh_tables(mesh, str(tmp_path / "dbg"))
    nodes = np.loadtxt(npath)
    elems = np.loadtxt(epath, dtype=int)
    assert nodes.shape == (9, 4)
    assert elems.shape == (8, 4)


# ----------------------------------------------------------------- quadrature

@pytest.mark.parametrize("deg", [2, 5])
def test_triangle_rules_exactness(deg):
    rule = triangle_rule(deg)
    assert np.all(rule.weights > 0.0)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
    # exact integration of monomials xi^p eta^q for p+q <= degree:
    # integral over reference = p! q! / (p+q+2)!
    for p in range(deg + 1):
        for q in range(deg + 1 - p):
            val = np.sum(rule.weights * rule.points[:, 0] ** p * rule.points[:, 1] ** q)
            exact = math.factorial(p) * math.factorial(q) / math.factorial(p + q + 2)
            assert val == pytest.approx(exact, rel=1e-13), (p, q)


def test_interval_rule_exactness():
    rule = interval_rule()
    for p in range(6):
        val = np.sum(rule.weights * rule.points**p)
        assert val == pytest.approx(1.0 / (p + 1), rel=1e-13)


# ----------------------------------------------------------------- mass

def test_mass_interior_stencil_1d():
    mesh = build_interval_mesh(0.0, 1.0, 4)
    M = assemble_mass(build_fe_space(mesh)).toarray()
    h = 0.25
    row = M[2]
    np.testing.assert_allclose(row[1:4], [h / 6, 4 * h / 6, h / 6], rtol=1e-13)


def test_mass_partition_of_unity():
    space1 = build_fe_space(build_interval_mesh(-1.5, 1.5, 7))
    M1 = assemble_mass(space1)
    ones = np.ones(space1.n_dofs)
    assert ones @ M1.matvec(ones) == pytest.approx(3.0, rel=1e-13)

    space2 = build_fe_space(build_unit_square_mesh(2))
    M2 = assemble_mass(space2)
    ones = np.ones(space2.n_dofs)
    assert ones @ M2.matvec(ones) == pytest.approx(1.0, rel=1e-13)


# ----------------------------------------------------------------- a0

def test_a0_laplace_stencil_1d():
    mesh = build_interval_mesh(0.0, 1.0, 4)
    space = build_fe_space(mesh)
    S = assemble_a0(space, unit_coeffs(1), 0.0).toarray()
    h = 0.25
    np.testing.assert_allclose(S[2, 1:4], [-1 / h, 2 / h, -1 / h], rtol=1e-13)


def test_a0_linearity_in_A():
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 8))
    S1 = assemble_a0(space, unit_coeffs(1), 0.0).toarray()
    two = CoefficientSet(A=lambda x, t: 2.0 * np.ones_like(x))
    S2 = assemble_a0(space, two, 0.0).toarray()
    np.testing.assert_allclose(S2, 2.0 * S1, rtol=1e-14)


def test_a0_variable_coefficient_against_quadrature_oracle():
    # per-element high-order quadrature oracle for A(x,0) = 2 + x^2 + sin 0
    mesh = build_interval_mesh(0.0, 1.0, 4)
    space = build_fe_space(mesh)
    S = assemble_a0(space, ex1_coeffs(), 0.0).toarray()
    xg, wg = np.polynomial.legendre.leggauss(20)
    oracle = np.zeros_like(S)
    for e in range(mesh.n_elements):
        i, j = mesh.elements[e]
        a, b = mesh.nodes[i], mesh.nodes[j]
        h = b - a
        xs = a + (xg + 1.0) / 2.0 * h
        intA = np.sum(wg * (2.0 + xs**2) * h / 2.0)
        blk = intA / h**2 * np.array([[1.0, -1.0], [-1.0, 1.0]])
        oracle[np.ix_([i, j], [i, j])] += blk
    np.testing.assert_allclose(S, oracle, rtol=1e-12, atol=1e-13)


def test_a0_2d_energy_of_linear_field():
    # gradient of x+2y is exactly representable: energy = |A^{1/2}(1,2)|^2
    space = build_fe_space(build_unit_square_mesh(3))
    S = assemble_a0(space, unit_coeffs(2), 0.0)
    u = interpolate(space, lambda p, t: p[:, 0] + 2.0 * p[:, 1])
    assert u @ S.matvec(u) == pytest.approx(5.0, rel=1e-13)


def test_a0_symmetry_and_coercivity_2d():
    space = build_fe_space(build_unit_square_mesh(4))

    def A(p, t):
        out = np.empty((p.shape[0], 2, 2))
        out[:, 0, 0] = 2.0 - math.cos(t)
        out[:, 1, 1] = 2.0 - math.sin(t)
        out[:, 0, 1] = out[:, 1, 0] = p[:, 0] * p[:, 1]
        return out

    rng = np.random.default_rng(5)
    for t in (0.0, 0.5, 1.0):
        S = assemble_a0(space, CoefficientSet(A=A), t)
        dense = S.toarray()
        np.testing.assert_allclose(dense, dense.T, atol=1e-14)
        idx = space.interior
        red = dense[np.ix_(idx, idx)]
        for _ in range(5):
            x = rng.standard_normal(idx.size)
            assert x @ red @ x > 0.0


def test_a0_rejects_bad_coefficients():
    space = build_fe_space(build_unit_square_mesh(2))

    def nonsym(p, t):
        out = np.zeros((p.shape[0], 2, 2))
        out[:, 0, 0] = out[:, 1, 1] = 1.0
        out[:, 0, 1] = 0.5
        return out

    with pytest.raises(CoefficientError):
        assemble_a0(space, CoefficientSet(A=nonsym), 0.0)

    space1 = build_fe_space(build_interval_mesh(0.0, 1.0, 4))
    with pytest.raises(CoefficientError):
        assemble_a0(space1, CoefficientSet(A=lambda x, t: x - 0.5), 0.0)


def test_a0_lipschitz_in_t():
    # |x^T (S0(t)-S0(s)) x| <= L |t-s| * x^T (S0(0)+M) x with a fitted L
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 8))
    coeffs = ex1_coeffs()
    M = assemble_mass(space).toarray()
    S_ref = assemble_a0(space, coeffs, 0.0).toarray() + M
    rng = np.random.default_rng(11)
    xs = rng.standard_normal((4, space.n_dofs))
    pairs = [(0.0, 0.1), (0.2, 0.5), (0.3, 0.9), (0.0, 1.0), (0.45, 0.55)]
    ratios = []
    for t, s in pairs:
        D = assemble_a0(space, coeffs, t).toarray() - assemble_a0(space, coeffs, s).toarray()
        for x in xs:
            ratios.append(abs(x @ D @ x) / (abs(t - s) * (x @ S_ref @ x)))
    L = 1.5 * max(ratios[:8])
    assert max(ratios) <= L  # Lipschitz bound holds with the fitted constant
    assert max(ratios) < 2.0  # and the constant is moderate (|d/dt sin t| <= 1)


# ----------------------------------------------------------------- a1

def test_a1_reduces_to_mass_when_b0_c1():
    for space in (
        build_fe_space(build_interval_mesh(0.0, 1.0, 5)),
        build_fe_space(build_unit_square_mesh(3)),
    ):
        dim = space.mesh.dim
        c_one = CoefficientSet(
            A=unit_coeffs(dim).A,
            c=lambda x, t: np.ones(x.shape[0]),
        )
        S1 = assemble_a1(space, c_one, 0.0).toarray()
        M = assemble_mass(space).toarray()
        np.testing.assert_allclose(S1, M, rtol=1e-13, atol=1e-15)


def test_a1_constant_convection_stencil_1d():
    # exact integration of phi_j' phi_i: interior row (1/2)[-1, 0, 1]
    mesh = build_interval_mesh(0.0, 1.0, 4)
    space = build_fe_space(mesh)
    conv = CoefficientSet(A=unit_coeffs(1).A, b=lambda x, t: np.ones_like(x))
    S1 = assemble_a1(space, conv, 0.0).toarray()
    np.testing.assert_allclose(S1[2, 1:4], [-0.5, 0.0, 0.5], atol=1e-14)


def test_a1_zero_when_no_convection_or_reaction():
    space = build_fe_space(build_unit_square_mesh(2))
    S1 = assemble_a1(space, unit_coeffs(2), 0.0).toarray()
    np.testing.assert_allclose(S1, 0.0, atol=1e-15)


# ----------------------------------------------------------------- load

def test_load_constant_one_equals_mass_row_sums():
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 6))
    F = assemble_load(space, lambda x, t: np.ones_like(x), 0.0)
    M = assemble_mass(space)
    np.testing.assert_allclose(F, M.matvec(np.ones(space.n_dofs)), rtol=1e-13)


def test_load_zero():
    space = build_fe_space(build_unit_square_mesh(2))
    F = assemble_load(space, lambda p, t: np.zeros(p.shape[0]), 0.0)
    np.testing.assert_allclose(F, 0.0, atol=1e-16)


def test_load_sine_against_quadrature_oracle():
    mesh = build_interval_mesh(0.0, 1.0, 4)
    space = build_fe_space(mesh)
    F = assemble_load(space, lambda x, t: np.sin(np.pi * x), 0.0)
    xg, wg = np.polynomial.legendre.leggauss(30)
    oracle = np.zeros(space.n_dofs)
    for e in range(mesh.n_elements):
        i, j = mesh.elements[e]
        a, b = mesh.nodes[i], mesh.nodes[j]
        h = b - a
        xs = a + (xg + 1.0) / 2.0 * h
        w = wg * h / 2.0
        oracle[i] += np.sum(w * np.sin(np.pi * xs) * (b - xs) / h)
        oracle[j] += np.sum(w * np.sin(np.pi * xs) * (xs - a) / h)
    np.testing.assert_allclose(F, oracle, atol=1e-10)


# ----------------------------------------------------------------- projections

def test_l2_projection_idempotent_on_fe_functions():
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 8))
    rng = np.random.default_rng(2)
    coef = np.zeros(space.n_dofs)
    coef[space.interior] = rng.standard_normal(space.interior.size)
    proj = l2_project(space, lambda x, t: fe_eval(space, coef, x), 0.0)
    np.testing.assert_allclose(proj, coef, atol=1e-12)


def test_l2_projection_rate_and_stability():
    func = lambda x, t: np.sin(np.pi * x)
    errs = []
    for M in (8, 16, 32, 64):
        space = build_fe_space(build_interval_mesh(0.0, 1.0, M))
        proj = l2_project(space, func, 0.0)
        errs.append(error_norm(space, proj, func, None, 0.0, "L2"))
        # orthogonal projection: ||P_h phi|| <= ||phi|| = 1/sqrt(2)
        assert fe_norm(space, proj, "L2") <= 1.0 / math.sqrt(2.0) + 1e-12
    slopes = [math.log2(errs[k] / errs[k + 1]) for k in range(3)]
    assert abs(slopes[-1] - 2.0) < 0.1


def test_ritz_galerkin_exactness_on_fe_functions():
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 8))
    rng = np.random.default_rng(3)
    coef = np.zeros(space.n_dofs)
    coef[space.interior] = rng.standard_normal(space.interior.size)
    u = lambda x, t: fe_eval(space, coef, x)
    gu = lambda x, t: fe_grad_eval(space, coef, x)
    got = ritz_project(space, u, gu, unit_coeffs(1), 0.0)
    np.testing.assert_allclose(got, coef, atol=1e-12)
    # time-dependent A only enters through quadrature: u in S_h stays exact
    tdep = CoefficientSet(A=lambda x, t: (2.0 + math.sin(t)) * np.ones_like(x))
    for t in (0.0, 1.0):
        got = ritz_project(space, u, gu, tdep, t)
        np.testing.assert_allclose(got, coef, atol=1e-12)


def test_ritz_rates_sine():
    u = lambda x, t: np.sin(np.pi * x)
    gu = lambda x, t: np.pi * np.cos(np.pi * x)
    errs_l2, errs_h1 = [], []
    for M in (8, 16, 32, 64):
        space = build_fe_space(build_interval_mesh(0.0, 1.0, M))
        proj = ritz_project(space, u, gu, unit_coeffs(1), 0.0)
        errs_l2.append(error_norm(space, proj, u, gu, 0.0, "L2"))
        errs_h1.append(error_norm(space, proj, u, gu, 0.0, "H1"))
    assert abs(math.log2(errs_l2[-2] / errs_l2[-1]) - 2.0) < 0.1
    assert abs(math.log2(errs_h1[-2] / errs_h1[-1]) - 1.0) < 0.1


def test_ritz_galerkin_orthogonality_residual():
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 16))
    u = lambda x, t: np.sin(np.pi * x)
    gu = lambda x, t: np.pi * np.cos(np.pi * x)
    coeffs = ex1_coeffs()
    proj = ritz_project(space, u, gu, coeffs, 0.3)
    # residual of the defining system on interior dofs
    S = assemble_a0(space, coeffs, 0.3)
    idx = space.interior
    xg, wg = np.polynomial.legendre.leggauss(30)
    rhs = np.zeros(space.n_dofs)
    mesh = space.mesh
    for e in range(mesh.n_elements):
        i, j = mesh.elements[e]
        a, b = mesh.nodes[i], mesh.nodes[j]
        h = b - a
        xs = a + (xg + 1.0) / 2.0 * h
        w = wg * h / 2.0
        flux = (2.0 + xs**2 + math.sin(0.3)) * np.pi * np.cos(np.pi * xs)
        rhs[i] += np.sum(w * flux * (-1.0 / h))
        rhs[j] += np.sum(w * flux * (1.0 / h))
    res = S.matvec(proj)[idx] - rhs[idx]
    assert np.linalg.norm(res) <= 1e-9 * max(1.0, np.linalg.norm(rhs[idx]))


# ----------------------------------------------------------------- norms

def test_norms_zero_vector():
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 4))
    z = np.zeros(space.n_dofs)
    for kind in ("L2", "H1", "Linf"):
        assert fe_norm(space, z, kind) == 0.0


def test_hat_function_norms():
    h = 0.25
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 4))
    hat = np.zeros(space.n_dofs)
    hat[2] = 1.0
    l2 = fe_norm(space, hat, "L2")
    h1 = fe_norm(space, hat, "H1")
    assert l2**2 == pytest.approx(2 * h / 3, rel=1e-13)
    assert h1**2 - l2**2 == pytest.approx(2 / h, rel=1e-13)
    assert fe_norm(space, hat, "Linf") == pytest.approx(1.0)


def test_norm_kind_validation():
    space = build_fe_space(build_interval_mesh(0.0, 1.0, 4))
    with pytest.raises(ValueError):
        fe_norm(space, np.zeros(space.n_dofs), "L3")


# ----------------------------------------------------- approximation property

def test_interpolation_rates_1d():
    func = lambda x, t: np.sin(np.pi * x)
    grad = lambda x, t: np.pi * np.cos(np.pi * x)
    errs_l2, errs_h1 = [], []
    for M in (8, 16, 32, 64):
        space = build_fe_space(build_interval_mesh(0.0, 1.0, M))
        v = interpolate(space, func)
        errs_l2.append(error_norm(space, v, func, grad, 0.0, "L2"))
        errs_h1.append(error_norm(space, v, func, grad, 0.0, "H1"))
    assert abs(math.log2(errs_l2[-2] / errs_l2[-1]) - 2.0) <= 0.1
    assert abs(math.log2(errs_h1[-2] / errs_h1[-1]) - 1.0) <= 0.1


def test_interpolation_rates_2d():
    func = lambda p, t: np.sin(2 * np.pi * p[:, 0]) * np.sin(2 * np.pi * p[:, 1])

    def grad(p, t):
        out = np.empty_like(p)
        out[:, 0] = 2 * np.pi * np.cos(2 * np.pi * p[:, 0]) * np.sin(2 * np.pi * p[:, 1])
        out[:, 1] = 2 * np.pi * np.sin(2 * np.pi * p[:, 0]) * np.cos(2 * np.pi * p[:, 1])
        return out

    errs_l2, errs_h1 = [], []
    for M in (8, 16, 32, 64):
        space = build_fe_space(build_unit_square_mesh(M))
        v = interpolate(space, func)
        errs_l2.append(error_norm(space, v, func, grad, 0.0, "L2"))
        errs_h1.append(error_norm(space, v, func, grad, 0.0, "H1"))
    assert abs(math.log2(errs_l2[-2] / errs_l2[-1]) - 2.0) <= 0.1
    assert abs(math.log2(errs_h1[-2] / errs_h1[-1]) - 1.0) <= 0.1


def test_fe_eval_roundtrip_2d():
    space = build_fe_space(build_unit_square_mesh(4))
    rng = np.random.default_rng(9)
    coef = rng.standard_normal(space.n_dofs)
    np.testing.assert_allclose(
        fe_eval(space, coef, space.mesh.nodes), coef, atol=1e-13
    )
    pts = rng.random((50, 2))
    direct = fe_eval(space, coef, pts)
    assert np.all(np.isfinite(direct))


def test_poincare_constants():
    assert poincare_constant(build_interval_mesh(0.0, 1.0, 4)) == pytest.approx(1 / math.pi)
    assert poincare_constant(build_interval_mesh(-1.5, 1.5, 4)) == pytest.approx(3 / math.pi)
    assert poincare_constant(build_unit_square_mesh(2)) == pytest.approx(1 / (math.sqrt(2) * math.pi))
