from math import factorial

import numpy as np
import pytest

from pdwg.fe_space import (
    Discretization,
    SpaceConfig,
    WeakFunction,
    edge_rule,
    eval_basis,
    eval_v0,
    make_layout,
    poly_exponents,
    project_boundary,
    project_Qh,
    project_Wh,
    triangle_rule,
)
from pdwg.mesh import build_uniform


def ref_triangle_moment(a, b):
    # exact integral of x^a y^b over the reference triangle
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_space_config_defaults_and_validation():
    cfg = SpaceConfig(k=2)
    assert cfg.l == 1
    assert SpaceConfig(k=3, l=1).l == 1
    with pytest.raises(ValueError):
        SpaceConfig(k=1)
    with pytest.raises(ValueError):
        SpaceConfig(k=2, l=2)
    with pytest.raises(ValueError):
        SpaceConfig(k=4, l=1)


def test_poly_exponents_graded_order():
    exps = poly_exponents(2)
    assert exps.tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
    assert len(poly_exponents(3)) == 10


def test_triangle_rule_exactness():
    degree = 10
    pts, w = triangle_rule(degree)
    assert w.sum() == pytest.approx(0.5, abs=1e-15)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            val = np.sum(w * pts[:, 0] ** a * pts[:, 1] ** b)
            assert val == pytest.approx(ref_triangle_moment(a, b), rel=1e-13)


def test_edge_rule_exactness():
    pts, w = edge_rule(6)
    for m in range(12):
        assert np.sum(w * pts**m) == pytest.approx(1.0 / (m + 1), rel=1e-13)


def test_eval_basis_values_and_derivatives():
    exps = poly_exponents(2)
    center = np.array([0.3, 0.4])
    h = 0.5
    p = np.array([0.45, 0.65])
    xi, eta = (p - center) / h
    vals = eval_basis(exps, p, center, h)
    assert vals == pytest.approx([1, xi, eta, xi**2, xi * eta, eta**2])
    dx = eval_basis(exps, p, center, h, deriv=(1, 0))
    assert dx == pytest.approx([0, 1 / h, 0, 2 * xi / h, eta / h, 0])
    dxy = eval_basis(exps, p, center, h, deriv=(1, 1))
    assert dxy == pytest.approx([0, 0, 0, 0, 1 / h**2, 0])
    dxx = eval_basis(exps, p, center, h, deriv=(2, 0))
    assert dxx == pytest.approx([0, 0, 0, 2 / h**2, 0, 0])


@pytest.mark.parametrize(
    "n,k,N,M",
    [(1, 2, 35, 6), (2, 2, 136, 24), (8, 2, 2128, 384)],
)
def test_layout_sizes(n, k, N, M):
    layout = make_layout(build_uniform(n), SpaceConfig(k=k))
    assert layout.N == N
    assert layout.M == M


def test_layout_slices_partition():
    mesh = build_uniform(2)
    layout = make_layout(mesh, SpaceConfig(k=2))
    hit = np.zeros(layout.N, dtype=int)
    for t in range(mesh.num_elements):
        hit[layout.v0_slice(t)] += 1
    for e in mesh.interior_edges():
        hit[layout.vb_slice(e)] += 1
    for e in range(mesh.num_edges):
        for j in range(2):
            hit[layout.vg_slice(e, j)] += 1
    assert np.all(hit == 1)
    for e in mesh.boundary_edges():
        assert layout.vb_slice(e) is None
    hitb = np.zeros(layout.NB, dtype=int)
    for e in mesh.boundary_edges():
        hitb[layout.boundary_vb_slice(e)] += 1
    assert np.all(hitb == 1)


def test_weak_function_validation():
    layout = make_layout(build_uniform(1), SpaceConfig(k=2))
    with pytest.raises(ValueError):
        WeakFunction(layout, np.zeros(layout.N + 1))
    v = WeakFunction(layout, np.zeros(layout.N))
    assert v.boundary is None
    assert np.all(v.boundary_or_zero() == 0)


def test_trace_coefficients_match_point_evaluation():
    rng = np.random.default_rng(7)
    disc = Discretization(build_uniform(2), SpaceConfig(k=2))
    mesh = disc.mesh
    ts = np.linspace(0.0, 1.0, 9)
    tm = np.power.outer(ts, np.arange(disc.cfg.k + 1))
    for t in (0, 3, 5):
        coeffs = rng.standard_normal(disc.layout.nv0)
        for le in range(3):
            e = mesh.elem_edges[t, le]
            lo, hi = mesh.edges[e]
            pts = mesh.vertices[lo] + np.multiply.outer(
                ts, mesh.vertices[hi] - mesh.vertices[lo]
            )
            direct = eval_basis(
                poly_exponents(2), pts, mesh.elem_centroid[t], mesh.elem_h[t]
            ) @ coeffs
            via_trace = tm @ (disc.trace_val[t, le] @ coeffs)
            assert np.allclose(via_trace, direct, atol=1e-13)
            for j, d in ((0, (1, 0)), (1, (0, 1))):
                direct = eval_basis(
                    poly_exponents(2),
                    pts,
                    mesh.elem_centroid[t],
                    mesh.elem_h[t],
                    deriv=d,
                ) @ coeffs
                via_trace = tm @ (disc.trace_grad[t, le, j] @ coeffs)
                assert np.allclose(via_trace, direct, atol=1e-12)


def test_trace_gradient_top_coefficient_is_zero():
    disc = Discretization(build_uniform(1), SpaceConfig(k=2))
    assert np.all(disc.trace_grad[:, :, :, -1, :] == 0)


def test_projection_reproduces_polynomials():
    # degree-k functions are reproduced exactly in every component
    disc = Discretization(build_uniform(2), SpaceConfig(k=2))

    def u(p):
        return 1.0 + 2.0 * p[..., 0] - p[..., 1] + p[..., 0] * p[..., 1]

    def grad_u(p):
        return np.stack(
            [2.0 + p[..., 1], -1.0 + p[..., 0]], axis=-1
        )

    v = project_Qh(u, grad_u, disc)
    mesh = disc.mesh
    for t in range(mesh.num_elements):
        pts = disc.quad_pts[t]
        assert np.allclose(eval_v0(v, t, pts), u(pts), atol=1e-12)
        assert np.allclose(eval_v0(v, t, pts, deriv=(1, 0)), grad_u(pts)[:, 0], atol=1e-11)
    # vb blocks agree with the trace of u, vg with its gradient
    ts = disc.edge_pts
    for e in range(mesh.num_edges):
        lo, hi = mesh.edges[e]
        pts = mesh.vertices[lo] + np.multiply.outer(
            ts, mesh.vertices[hi] - mesh.vertices[lo]
        )
        sl = v.layout.vb_slice(e)
        if sl is None:
            coeffs = v.boundary[v.layout.boundary_vb_slice(e)]
        else:
            coeffs = v.coeffs[sl]
        assert np.allclose(disc.tmat @ coeffs, u(pts), atol=1e-12)
        for j in range(2):
            coeffs = v.coeffs[v.layout.vg_slice(e, j)]
            assert np.allclose(
                disc.tmat[:, : disc.cfg.k] @ coeffs, grad_u(pts)[:, j], atol=1e-12
            )


def test_projection_accuracy_smooth_function():
    disc = Discretization(build_uniform(4), SpaceConfig(k=2))

    def u(p):
        return np.sin(np.pi * p[..., 0]) * np.sin(np.pi * p[..., 1])

    def grad_u(p):
        return np.stack(
            [
                np.pi * np.cos(np.pi * p[..., 0]) * np.sin(np.pi * p[..., 1]),
                np.pi * np.sin(np.pi * p[..., 0]) * np.cos(np.pi * p[..., 1]),
            ],
            axis=-1,
        )

    errs = []
    for n in (4, 8):
        d = disc if n == 4 else Discretization(build_uniform(8), SpaceConfig(k=2))
        v = project_Qh(u, grad_u, d)
        err = 0.0
        for t in range(d.mesh.num_elements):
            pts = d.quad_pts[t]
            err = max(err, np.abs(eval_v0(v, t, pts) - u(pts)).max())
        errs.append(err)
    assert errs[0] < 5e-2
    # k = 2 projection converges at third order in h
    assert errs[0] / errs[1] > 6.0
    # homogeneous trace: boundary data of this u is numerically zero
    v = project_Qh(u, grad_u, disc)
    assert np.abs(v.boundary).max() < 1e-14


def test_project_boundary_matches_projection_field():
    disc = Discretization(build_uniform(2), SpaceConfig(k=2))

    def u(p):
        return p[..., 0] ** 2 + p[..., 1] ** 2

    def grad_u(p):
        return 2.0 * p

    v = project_Qh(u, grad_u, disc)
    bnd = project_boundary(u, disc)
    assert np.allclose(bnd, v.boundary, atol=1e-13)
    assert np.abs(bnd).max() > 0.1


def test_project_Wh_reproduces_P1():
    disc = Discretization(build_uniform(2), SpaceConfig(k=2))

    def g(p):
        return 3.0 - p[..., 0] + 0.5 * p[..., 1]

    coeffs = project_Wh(g, disc)
    vals = np.einsum("tqi,ti->tq", disc.basis_w, coeffs)
    assert np.allclose(vals, g(disc.quad_pts), atol=1e-13)


def test_eval_v0_bad_element():
    layout = make_layout(build_uniform(1), SpaceConfig(k=2))
    v = WeakFunction(layout, np.zeros(layout.N))
    with pytest.raises(IndexError):
        eval_v0(v, 99, np.array([0.5, 0.5]))


def test_mass_matrices_spd():
    disc = Discretization(build_uniform(1), SpaceConfig(k=2))
    for M in (disc.mass_v, disc.mass_w):
        for t in range(disc.mesh.num_elements):
            assert np.allclose(M[t], M[t].T, atol=1e-15)
            assert np.linalg.eigvalsh(M[t]).min() > 0
