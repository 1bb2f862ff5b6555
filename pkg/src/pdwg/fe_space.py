"""Discrete spaces for the weak Galerkin scheme.

A weak function v = {v0, vb, vg} keeps three kinds of data: a P_k
polynomial per element (v0), a P_k polynomial per interior edge (vb,
boundary values are eliminated), and a [P_{k-1}]^2 polynomial per edge
(vg, one block per component). The test space W_h is P_l per element
with l in {k-2, k-1}.

Element polynomials use scaled monomials ((x-x_T)/h_T)^a((y-y_T)/h_T)^b
centered at the centroid, so local mass matrices are uniformly
conditioned across refinement levels. Edge polynomials are plain
monomials t^m in the global edge parameter t in [0, 1] (see mesh.py for
the orientation convention). Jump polynomials along edges are handled
through exact composition: the trace of a scaled monomial along an
affine edge parametrization is again a polynomial in t, and we carry
its coefficients rather than sampled values wherever exactness matters.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "SpaceConfig",
    "DofLayout",
    "WeakFunction",
    "Discretization",
    "make_layout",
    "triangle_rule",
    "edge_rule",
    "poly_exponents",
    "project_Qh",
    "project_Wh",
    "project_boundary",
    "eval_v0",
]


@dataclass(frozen=True)
class SpaceConfig:
    """Polynomial degrees of the discretization.

    k is the degree of v0 and vb (k >= 2, gradients vg use degree k-1);
    l is the degree of the test space W_h and must be k-2 or k-1. The
    default l = k-1 matches the configuration used for all the
    convergence studies.
    """

    k: int = 2
    l: int = -1

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.l == -1:
            object.__setattr__(self, "l", self.k - 1)
        if self.l not in (self.k - 2, self.k - 1):
            raise ValueError("l must be k-2 or k-1")


def poly_exponents(degree):
    """Monomial exponent pairs of P_degree in graded order.

    Order: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
    """
    return np.array(
        [(d - j, j) for d in range(degree + 1) for j in range(d + 1)], dtype=int
    )


def _dim(degree):
    return (degree + 1) * (degree + 2) // 2


# ---------------------------------------------------------------------------
# quadrature


def triangle_rule(degree):
    """Conical-product Gauss rule on the reference triangle.

    Reference triangle (0,0), (1,0), (0,1). Exact for polynomials of
    total degree <= degree (the rule built from m points per direction
    is exact to degree 2m-1). Weights sum to the reference area 1/2.

    Returns
    -------
    points : (q, 2) array
    weights : (q,) array
    """
    m = (degree + 2) // 2
    # Gauss-Jacobi with weight (1-s) on [-1,1] handles the (1-u) Jacobian.
    sj, wj = roots_jacobi(m, 1, 0)
    sg, wg = roots_legendre(m)
    u = 0.5 * (sj + 1.0)
    v = 0.5 * (sg + 1.0)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = uu
    y = vv * (1.0 - uu)
    w = np.multiply.outer(wj, wg) / 8.0
    return np.column_stack([x.ravel(), y.ravel()]), w.ravel()


def edge_rule(npoints):
    """Gauss-Legendre rule on [0, 1]; exact to degree 2*npoints - 1."""
    s, w = roots_legendre(npoints)
    return 0.5 * (s + 1.0), 0.5 * w


# ---------------------------------------------------------------------------
# scaled monomial bases


def _power_table(xi, max_exp):
    """xi**a for a = 0..max_exp along a new last axis."""
    out = np.ones(xi.shape + (max_exp + 1,))
    for a in range(1, max_exp + 1):
        out[..., a] = out[..., a - 1] * xi
    return out


def eval_basis(exps, pts, center, h, deriv=(0, 0)):
    """Evaluate scaled monomials (or a derivative) at points.

    Parameters
    ----------
    exps : (nb, 2) int array of exponent pairs
    pts : (..., 2) array of physical points
    center, h : element centroid and diameter defining the scaling
    deriv : (dx_order, dy_order)

    Returns
    -------
    (..., nb) array
    """
    pts = np.asarray(pts, dtype=float)
    xi = (pts[..., 0] - center[0]) / h
    eta = (pts[..., 1] - center[1]) / h
    max_exp = int(exps.max()) if len(exps) else 0
    px = _power_table(xi, max_exp)
    py = _power_table(eta, max_exp)
    dx, dy = deriv
    out = np.zeros(pts.shape[:-1] + (len(exps),))
    for idx, (a, b) in enumerate(exps):
        if a < dx or b < dy:
            continue
        coeff = 1.0
        for r in range(dx):
            coeff *= (a - r) / h
        for r in range(dy):
            coeff *= (b - r) / h
        out[..., idx] = coeff * px[..., a - dx] * py[..., b - dy]
    return out


def _linear_power_coeffs(c0, c1, kmax):
    """Coefficient rows of (c0 + c1*t)**a in t, for a = 0..kmax."""
    table = np.zeros((kmax + 1, kmax + 1))
    table[0, 0] = 1.0
    for a in range(1, kmax + 1):
        for m in range(a + 1):
            table[a, m] = comb(a, m) * c0 ** (a - m) * c1**m
    return table


# ---------------------------------------------------------------------------
# DOF layout


class DofLayout:
    """Index map from weak-function data to one flat coefficient vector.

    Sections in order: all v0 blocks (element-major), vb blocks for
    interior edges (edge-id order), vg component 1 for all edges, then
    vg component 2. Boundary vb data lives in a separate vector of
    length NB = (k+1) * #boundary edges, indexed by boundary_vb_slice.
    """

    def __init__(self, mesh, cfg):
        self.mesh = mesh
        self.cfg = cfg
        k = cfg.k
        self.nv0 = _dim(k)
        self.nvb = k + 1
        self.nvg = k
        self.mw = _dim(cfg.l)

        interior = mesh.interior_edges()
        boundary = mesh.boundary_edges()
        self.interior_index = np.full(mesh.num_edges, -1, dtype=int)
        self.interior_index[interior] = np.arange(len(interior))
        self.boundary_index = np.full(mesh.num_edges, -1, dtype=int)
        self.boundary_index[boundary] = np.arange(len(boundary))

        self.N1 = mesh.num_elements * self.nv0
        self.N2 = len(interior) * self.nvb
        self.N3 = mesh.num_edges * self.nvg  # per gradient component
        self.N = self.N1 + self.N2 + 2 * self.N3
        self.M = mesh.num_elements * self.mw
        self.NB = len(boundary) * self.nvb

    def v0_slice(self, t):
        return slice(t * self.nv0, (t + 1) * self.nv0)

    def vb_slice(self, e):
        """Slice of the vb block of interior edge e; None on the boundary."""
        idx = self.interior_index[e]
        if idx < 0:
            return None
        start = self.N1 + idx * self.nvb
        return slice(start, start + self.nvb)

    def vg_slice(self, e, j):
        """Slice of gradient component j (0 or 1) on edge e."""
        start = self.N1 + self.N2 + j * self.N3 + e * self.nvg
        return slice(start, start + self.nvg)

    def w_slice(self, t):
        return slice(t * self.mw, (t + 1) * self.mw)

    def boundary_vb_slice(self, e):
        """Slice into the boundary-data vector for boundary edge e."""
        idx = self.boundary_index[e]
        if idx < 0:
            raise ValueError(f"edge {e} is not a boundary edge")
        return slice(idx * self.nvb, (idx + 1) * self.nvb)


def make_layout(mesh, cfg):
    return DofLayout(mesh, cfg)


@dataclass
class WeakFunction:
    """Coefficient vector of a weak function over a layout.

    boundary is the optional vb data on boundary edges (length
    layout.NB). None means homogeneous boundary values, the V_h^0
    convention; projections of functions with nonzero trace carry their
    boundary data here so the lifted problems can use it.
    """

    layout: DofLayout
    coeffs: np.ndarray
    boundary: np.ndarray = None

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.layout.N,):
            raise ValueError("coefficient vector length does not match layout")
        if self.boundary is not None:
            self.boundary = np.asarray(self.boundary, dtype=float)
            if self.boundary.shape != (self.layout.NB,):
                raise ValueError("boundary vector length does not match layout")

    def boundary_or_zero(self):
        if self.boundary is None:
            return np.zeros(self.layout.NB)
        return self.boundary


# ---------------------------------------------------------------------------
# assembled caches


class Discretization:
    """Mesh + spaces + every per-element table assembly needs.

    Precomputes quadrature points, basis values and derivatives at those
    points, local mass matrices with inverses, and the exact t-polynomial
    coefficients of basis traces along each (element, local edge)
    incidence. Everything here is immutable after construction and
    shared by assembly, stabilizer, solver and error computations.
    """

    def __init__(self, mesh, cfg):
        self.mesh = mesh
        self.cfg = cfg
        self.layout = DofLayout(mesh, cfg)
        k, l = cfg.k, cfg.l
        self.exps_v = poly_exponents(k)
        self.exps_w = poly_exponents(l)

        degree = max(2 * k + 2, 10)
        self.tri_pts_ref, self.tri_w_ref = triangle_rule(degree)
        self.edge_pts, self.edge_w = edge_rule((degree + 1 + 1) // 2)

        T = mesh.num_elements
        q = len(self.tri_w_ref)
        p0 = mesh.vertices[mesh.elements[:, 0]]
        e1 = mesh.vertices[mesh.elements[:, 1]] - p0
        e2 = mesh.vertices[mesh.elements[:, 2]] - p0
        # physical quadrature points and weights, all elements at once
        self.quad_pts = (
            p0[:, None, :]
            + self.tri_pts_ref[None, :, 0, None] * e1[:, None, :]
            + self.tri_pts_ref[None, :, 1, None] * e2[:, None, :]
        )
        self.quad_w = np.outer(2.0 * mesh.elem_area, self.tri_w_ref)

        nv0, mw = self.layout.nv0, self.layout.mw
        self.basis_v = np.empty((T, q, nv0))
        self.basis_v_grad = np.empty((T, q, nv0, 2))
        self.basis_v_hess = np.empty((T, q, nv0, 2, 2))
        self.basis_w = np.empty((T, q, mw))
        self.basis_w_grad = np.empty((T, q, mw, 2))
        self.basis_w_hess = np.empty((T, q, mw, 2, 2))
        for t in range(T):
            c = mesh.elem_centroid[t]
            h = mesh.elem_h[t]
            pts = self.quad_pts[t]
            for exps, val, grad, hess in (
                (self.exps_v, self.basis_v, self.basis_v_grad, self.basis_v_hess),
                (self.exps_w, self.basis_w, self.basis_w_grad, self.basis_w_hess),
            ):
                val[t] = eval_basis(exps, pts, c, h)
                grad[t, :, :, 0] = eval_basis(exps, pts, c, h, deriv=(1, 0))
                grad[t, :, :, 1] = eval_basis(exps, pts, c, h, deriv=(0, 1))
                hess[t, :, :, 0, 0] = eval_basis(exps, pts, c, h, deriv=(2, 0))
                hess[t, :, :, 0, 1] = eval_basis(exps, pts, c, h, deriv=(1, 1))
                hess[t, :, :, 1, 0] = hess[t, :, :, 0, 1]
                hess[t, :, :, 1, 1] = eval_basis(exps, pts, c, h, deriv=(0, 2))

        self.mass_v = np.einsum("tq,tqi,tqj->tij", self.quad_w, self.basis_v, self.basis_v)
        self.mass_w = np.einsum("tq,tqi,tqj->tij", self.quad_w, self.basis_w, self.basis_w)
        self.mass_v_inv = np.linalg.inv(self.mass_v)
        self.mass_w_inv = np.linalg.inv(self.mass_w)

        # Hilbert-type Gram of t^m on [0,1]; edge mass = h_e * this.
        idx = np.arange(k + 1)
        self.edge_gram = 1.0 / (idx[:, None] + idx[None, :] + 1.0)
        idxg = np.arange(k)
        self.edge_gram_g = 1.0 / (idxg[:, None] + idxg[None, :] + 1.0)

        # Vandermonde of t^m at edge quadrature nodes, both degrees.
        self.tmat = np.power.outer(self.edge_pts, np.arange(k + 1))  # (qe, k+1)

        self._build_traces()

    def _build_traces(self):
        """Exact trace coefficients per (element, local edge) incidence.

        trace_val[t][le] is a (k+1, nv0) matrix sending v0 coefficients
        to the t-polynomial coefficients of v0 along the edge, in the
        global edge parametrization. trace_grad[t][le][j] does the same
        for the j-th component of grad v0 (degree k-1, rows padded to
        k+1 with a zero top coefficient). trace_w_val / trace_w_grad are
        the analogues for the test-space basis (degrees l and l-1).
        """
        mesh, cfg = self.mesh, self.cfg
        k, l = cfg.k, cfg.l
        nv0, mw = self.layout.nv0, self.layout.mw
        T = mesh.num_elements
        self.trace_val = np.zeros((T, 3, k + 1, nv0))
        self.trace_grad = np.zeros((T, 3, 2, k + 1, nv0))
        self.trace_w_val = np.zeros((T, 3, l + 1, mw))
        self.trace_w_grad = np.zeros((T, 3, 2, l + 1, mw))
        for t in range(T):
            c = mesh.elem_centroid[t]
            h = mesh.elem_h[t]
            for le in range(3):
                e = mesh.elem_edges[t, le]
                lo, hi = mesh.edges[e]
                p_lo = mesh.vertices[lo]
                p_hi = mesh.vertices[hi]
                xi0 = (p_lo - c) / h
                xid = (p_hi - p_lo) / h
                px = _linear_power_coeffs(xi0[0], xid[0], k)
                py = _linear_power_coeffs(xi0[1], xid[1], k)
                for idx, (a, b) in enumerate(self.exps_v):
                    prod = np.convolve(px[a, : a + 1], py[b, : b + 1])
                    self.trace_val[t, le, : a + b + 1, idx] = prod
                    if a >= 1:
                        prod = np.convolve(px[a - 1, :a], py[b, : b + 1])
                        self.trace_grad[t, le, 0, : a + b, idx] = (a / h) * prod
                    if b >= 1:
                        prod = np.convolve(px[a, : a + 1], py[b - 1, :b])
                        self.trace_grad[t, le, 1, : a + b, idx] = (b / h) * prod
                for idx, (a, b) in enumerate(self.exps_w):
                    prod = np.convolve(px[a, : a + 1], py[b, : b + 1])
                    self.trace_w_val[t, le, : a + b + 1, idx] = prod
                    if a >= 1:
                        prod = np.convolve(px[a - 1, :a], py[b, : b + 1])
                        self.trace_w_grad[t, le, 0, : a + b, idx] = (a / h) * prod
                    if b >= 1:
                        prod = np.convolve(px[a, : a + 1], py[b - 1, :b])
                        self.trace_w_grad[t, le, 1, : a + b, idx] = (b / h) * prod


# ---------------------------------------------------------------------------
# projections and evaluation


def project_Qh(u, grad_u, disc):
    """L2 projection of a smooth function into the weak space.

    Q0 projects u onto P_k per element, Q_b projects the trace onto P_k
    per interior edge, and the gradient is projected onto [P_{k-1}]^2
    per edge. Boundary-edge trace projections are attached as the
    boundary field of the returned WeakFunction.

    Parameters
    ----------
    u : callable taking an (..., 2) point array
    grad_u : callable returning (..., 2) gradients
    disc : Discretization
    """
    layout = disc.layout
    mesh = disc.mesh
    out = np.zeros(layout.N)
    bnd = np.zeros(layout.NB)

    uq = u(disc.quad_pts)
    rhs = np.einsum("tq,tq,tqi->ti", disc.quad_w, uq, disc.basis_v)
    v0 = np.einsum("tij,tj->ti", disc.mass_v_inv, rhs)
    out[: layout.N1] = v0.ravel()

    gram_inv = np.linalg.inv(disc.edge_gram)
    gram_g_inv = np.linalg.inv(disc.edge_gram_g)
    k = disc.cfg.k
    for e in range(mesh.num_edges):
        lo, hi = mesh.edges[e]
        pts = mesh.vertices[lo] + np.multiply.outer(
            disc.edge_pts, mesh.vertices[hi] - mesh.vertices[lo]
        )
        tvals = u(pts)
        moments = disc.tmat.T @ (disc.edge_w * tvals)
        coeffs = gram_inv @ moments
        sl = layout.vb_slice(e)
        if sl is None:
            bnd[layout.boundary_vb_slice(e)] = coeffs
        else:
            out[sl] = coeffs
        gvals = grad_u(pts)
        for j in range(2):
            moments = disc.tmat[:, :k].T @ (disc.edge_w * gvals[:, j])
            out[layout.vg_slice(e, j)] = gram_g_inv @ moments
    return WeakFunction(layout, out, boundary=bnd)


def project_Wh(g, disc):
    """Elementwise L2 projection onto P_l; returns (T, mw) coefficients."""
    gq = g(disc.quad_pts)
    rhs = np.einsum("tq,tq,tqi->ti", disc.quad_w, gq, disc.basis_w)
    return np.einsum("tij,tj->ti", disc.mass_w_inv, rhs)


def project_boundary(u, disc):
    """Q_b of the trace of u on boundary edges only (length NB vector)."""
    layout = disc.layout
    mesh = disc.mesh
    bnd = np.zeros(layout.NB)
    gram_inv = np.linalg.inv(disc.edge_gram)
    for e in mesh.boundary_edges():
        lo, hi = mesh.edges[e]
        pts = mesh.vertices[lo] + np.multiply.outer(
            disc.edge_pts, mesh.vertices[hi] - mesh.vertices[lo]
        )
        moments = disc.tmat.T @ (disc.edge_w * u(pts))
        bnd[layout.boundary_vb_slice(e)] = gram_inv @ moments
    return bnd


def eval_v0(v, element, pts, deriv=(0, 0)):
    """Evaluate the v0 polynomial (or a derivative) of one element.

    pts may be a single point or an array of points; works for any
    derivative order via the deriv pair, e.g. (1, 0) for d/dx and
    (2, 0) for the xx second derivative.
    """
    layout = v.layout
    mesh = layout.mesh
    if not 0 <= element < mesh.num_elements:
        raise IndexError(f"element id {element} out of range")
    exps = poly_exponents(layout.cfg.k)
    table = eval_basis(
        exps, pts, mesh.elem_centroid[element], mesh.elem_h[element], deriv=deriv
    )
    return table @ v.coeffs[layout.v0_slice(element)]
