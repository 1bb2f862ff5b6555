"""Weak second derivatives and the elementwise-PDE constraint system.

The weak second derivative of v = {v0, vb, vg} on an element T is the
P_l polynomial D_ij defined by duality,

    (D_ij, psi)_T = (v0, d2_ji psi)_T - <vb n_i, d_j psi>_bd
                    + <vg_i, psi n_j>_bd   for all psi in P_l(T),

and the constraint A v = f expresses (sum_ij a_ij D_ij, psi_m)_T =
(f, psi_m)_T for every test basis function psi_m. Boundary vb data is
eliminated from the unknown vector; its coupling is returned as a
separate matrix Cb so inhomogeneous boundary values enter the right
side as f - Cb g.

Edge integrals here are exact: both factors are polynomials in the edge
parameter, so each pairing reduces to a Hilbert-type Gram product of
coefficient vectors.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "CoefficientField",
    "ConstraintSystem",
    "check_ellipticity",
    "local_dof_columns",
    "gather_local",
    "local_weak_hessian",
    "weak_hessian_apply",
    "assemble_A",
    "apply_Lw",
]


@dataclass
class CoefficientField:
    """Coefficients and data of one problem instance.

    a maps an (..., 2) point array to (..., 2, 2) symmetric matrices;
    f maps points to source values. The exact fields are optional and
    only used by manufactured-solution error reporting.
    """

    a: callable
    f: callable
    u: callable = None
    grad_u: callable = None
    hess_u: callable = None


def check_ellipticity(field, pts):
    """Sample a(x): verify symmetry and return (min, max) eigenvalue.

    Raises ValueError if any sampled matrix is non-symmetric or not
    positive definite.
    """
    A = np.asarray(field.a(np.asarray(pts, dtype=float)))
    if not np.allclose(A, np.swapaxes(A, -1, -2), atol=1e-12):
        raise ValueError("coefficient matrix is not symmetric")
    eigs = np.linalg.eigvalsh(A)
    lo, hi = eigs.min(), eigs.max()
    if lo <= 0:
        raise ValueError(f"coefficient matrix not positive definite (min eig {lo:g})")
    return lo, hi


def _hilbert_gram(rows, cols):
    """Matrix of integrals of t^m t^n over [0,1]: 1/(m+n+1)."""
    m = np.arange(rows)
    n = np.arange(cols)
    return 1.0 / (m[:, None] + n[None, :] + 1.0)


def local_dof_columns(disc, t):
    """Global/boundary column indices of element t's local DOF vector.

    Local order: v0 block, then vb per local edge, then vg component 1
    per local edge, then vg component 2. Returns (glob, bnd): integer
    arrays of length nloc where exactly one of glob[i], bnd[i] is >= 0;
    bnd indexes the separate boundary-data vector.
    """
    layout = disc.layout
    mesh = disc.mesh
    k = disc.cfg.k
    glob = []
    bnd = []

    sl = layout.v0_slice(t)
    glob.extend(range(sl.start, sl.stop))
    bnd.extend([-1] * layout.nv0)
    for le in range(3):
        e = mesh.elem_edges[t, le]
        sl = layout.vb_slice(e)
        if sl is None:
            sb = layout.boundary_vb_slice(e)
            glob.extend([-1] * layout.nvb)
            bnd.extend(range(sb.start, sb.stop))
        else:
            glob.extend(range(sl.start, sl.stop))
            bnd.extend([-1] * layout.nvb)
    for j in range(2):
        for le in range(3):
            e = mesh.elem_edges[t, le]
            sl = layout.vg_slice(e, j)
            glob.extend(range(sl.start, sl.stop))
            bnd.extend([-1] * layout.nvg)
    return np.array(glob), np.array(bnd)


def n_local(layout):
    return layout.nv0 + 3 * layout.nvb + 6 * layout.nvg


def gather_local(disc, t, v):
    """Local DOF sub-vector of a WeakFunction on element t."""
    glob, bnd = local_dof_columns(disc, t)
    out = np.where(glob >= 0, v.coeffs[np.maximum(glob, 0)], 0.0)
    if v.boundary is not None:
        out = np.where(bnd >= 0, v.boundary[np.maximum(bnd, 0)], out)
    return out


def local_weak_hessian(disc, t, i, j):
    """P_l coefficient map of the (i,j) weak second derivative on element t.

    Returns the (mw, nloc) matrix C with D_ij = sum_m (C v_loc)_m psi_m
    for the local DOF order of local_dof_columns. Indices i, j are 0 or 1.
    """
    layout = disc.layout
    mesh = disc.mesh
    k = disc.cfg.k
    nv0, nvb, nvg, mw = layout.nv0, layout.nvb, layout.nvg, layout.mw
    nloc = n_local(layout)
    R = np.zeros((mw, nloc))

    # (v0, d2_ji psi)_T by volume quadrature (vanishes for l <= 1)
    R[:, :nv0] = np.einsum(
        "q,qn,qm->mn", disc.quad_w[t], disc.basis_v[t], disc.basis_w_hess[t][:, :, j, i]
    )

    gram_b = _hilbert_gram(nvb, disc.cfg.l + 1)
    gram_g = _hilbert_gram(nvg, disc.cfg.l + 1)
    for le in range(3):
        e = mesh.elem_edges[t, le]
        he = mesh.edge_length[e]
        nrm = mesh.elem_normals[t, le]
        # -<vb n_i, d_j psi>
        block = -nrm[i] * he * (gram_b @ disc.trace_w_grad[t, le, j]).T
        c0 = nv0 + le * nvb
        R[:, c0 : c0 + nvb] += block
        # +<vg_i, psi n_j>
        block = nrm[j] * he * (gram_g @ disc.trace_w_val[t, le]).T
        c0 = nv0 + 3 * nvb + i * 3 * nvg + le * nvg
        R[:, c0 : c0 + nvg] += block
    return disc.mass_w_inv[t] @ R


def weak_hessian_apply(disc, v, i, j):
    """(T, mw) coefficients of the (i,j) weak second derivative of v."""
    T = disc.mesh.num_elements
    out = np.empty((T, disc.layout.mw))
    for t in range(T):
        out[t] = local_weak_hessian(disc, t, i, j) @ gather_local(disc, t, v)
    return out


@dataclass
class ConstraintSystem:
    """A v = f with boundary coupling split out.

    A is M x N over the unknowns, Cb is M x NB over boundary vb data;
    the constraint with boundary data g reads A v = fvec - Cb g.
    """

    A: sp.csr_matrix
    Cb: sp.csr_matrix
    fvec: np.ndarray


def assemble_A(disc, field):
    """Assemble the constraint matrix, boundary coupling and load vector.

    Row block m of element t tests sum_ij a_ij D_ij against psi_m; a_ij
    is sampled at volume quadrature points, so variable and piecewise
    coefficients are handled without pre-projection.
    """
    layout = disc.layout
    mesh = disc.mesh
    T = mesh.num_elements
    mw = layout.mw
    nloc = n_local(layout)

    aq = np.asarray(field.a(disc.quad_pts))  # (T, q, 2, 2)
    fq = np.asarray(field.f(disc.quad_pts))
    fvec = np.einsum("tq,tq,tqm->tm", disc.quad_w, fq, disc.basis_w).ravel()

    rows_A, cols_A, vals_A = [], [], []
    rows_C, cols_C, vals_C = [], [], []
    for t in range(T):
        local = np.zeros((mw, nloc))
        for i in range(2):
            for j in range(2):
                C_ij = local_weak_hessian(disc, t, i, j)
                # (a_ij D_ij, psi_m) with D_ij expanded in the W basis
                W_a = np.einsum(
                    "q,q,qm,qc->mc",
                    disc.quad_w[t],
                    aq[t, :, i, j],
                    disc.basis_w[t],
                    disc.basis_w[t],
                )
                local += W_a @ C_ij
        glob, bnd = local_dof_columns(disc, t)
        r0 = layout.w_slice(t).start
        for c in range(nloc):
            col_rows = np.arange(r0, r0 + mw)
            if glob[c] >= 0:
                rows_A.extend(col_rows)
                cols_A.extend([glob[c]] * mw)
                vals_A.extend(local[:, c])
            else:
                rows_C.extend(col_rows)
                cols_C.extend([bnd[c]] * mw)
                vals_C.extend(local[:, c])

    A = sp.csr_matrix(
        sp.coo_matrix((vals_A, (rows_A, cols_A)), shape=(layout.M, layout.N))
    )
    Cb = sp.csr_matrix(
        sp.coo_matrix((vals_C, (rows_C, cols_C)), shape=(layout.M, layout.NB))
    )
    return ConstraintSystem(A=A, Cb=Cb, fvec=fvec)


def apply_Lw(disc, field, v, system=None):
    """Per-element P_l coefficients of the projected operator action.

    Returns the (T, mw) coefficient array of the W_h function whose
    moments against every test basis function match the assembled
    constraint rows, i.e. the L2 projection of sum_ij a_ij D_ij(v).
    """
    if system is None:
        system = assemble_A(disc, field)
    rhs = system.A @ v.coeffs
    if v.boundary is not None:
        rhs = rhs + system.Cb @ v.boundary
    rhs = rhs.reshape(disc.mesh.num_elements, disc.layout.mw)
    return np.einsum("tij,tj->ti", disc.mass_w_inv, rhs)
