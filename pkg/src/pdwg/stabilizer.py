"""Jump matrices and the L^p stabilizer.

The stabilizer integrates the mismatches v0 - vb and grad v0 - vg over
every element boundary,

    s(v) = (1/p) sum_T int_bd ( h_T^{1-2p} |v0-vb|^p
                              + h_T^{1-p} |grad v0 - vg|^p ) ds,

with the sup-over-elements form for p = infinity. Restricted to one
(element, local edge) incidence, each mismatch is a polynomial in the
edge parameter, and B stacks the scaled coefficient vectors of those
polynomials: one (k+1)-row block per incidence pair, first all value
jumps, then the two gradient-jump sections. The scaling

    c = h_e * h_T^{1-2p} * (coefficients of (v0-vb) in t)

(and h_T^{1-p} for gradient blocks) makes phi(Bv) = s(v) an exact
identity for p = 1, where phi sums int_0^1 |poly| over blocks. For
p = 1 the vector mismatch |grad v0 - vg| is measured componentwise
(the norm under which that identity holds); p = 2 uses the Euclidean
norm, and p = infinity takes the componentwise maximum.

Every integral of |poly| is computed exactly: real roots inside (0,1)
split the interval into sign-constant pieces, and the antiderivative is
summed piecewise. Quadrature would lose many digits at the kinks.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BMatrix",
    "assemble_B",
    "assemble_S2",
    "block_slice",
    "integral_abs_poly",
    "eval_phi",
    "eval_s",
    "eval_s_tilde",
]


@dataclass
class BMatrix:
    """Stacked jump-coefficient matrix for one value of p.

    The full jump vector of a weak function with boundary data g is
    B @ v + Bb @ g. Rows come in three equal sections (value jump,
    d/dx jump, d/dy jump); each section holds one (k+1)-row block per
    (element, local edge) incidence pair, element-major.
    """

    B: sp.csr_matrix
    Bb: sp.csr_matrix
    p: int
    block_size: int
    num_pairs: int

    @property
    def num_rows(self):
        return 3 * self.block_size * self.num_pairs


def block_slice(bmat, kind, pair):
    """Rows of one jump block: kind 0 = value, 1/2 = gradient components."""
    bs = bmat.block_size
    start = (kind * bmat.num_pairs + pair) * bs
    return slice(start, start + bs)


def assemble_B(disc, p):
    """Build the jump matrix pair (B, Bb) for p in {1, 2}."""
    if p not in (1, 2):
        raise ValueError(f"unsupported p={p} for jump assembly")
    layout = disc.layout
    mesh = disc.mesh
    k = disc.cfg.k
    bs = k + 1
    T = mesh.num_elements
    num_pairs = 3 * T
    section = bs * num_pairs

    rows, cols, vals = [], [], []
    rows_b, cols_b, vals_b = [], [], []

    def put(r0, block, col0, to_boundary=False):
        # scatter a dense (bs, ncols) block at rows r0.., cols col0..
        rr, cc = np.nonzero(block)
        if to_boundary:
            rows_b.extend(r0 + rr)
            cols_b.extend(col0 + cc)
            vals_b.extend(block[rr, cc])
        else:
            rows.extend(r0 + rr)
            cols.extend(col0 + cc)
            vals.extend(block[rr, cc])

    for t in range(T):
        hT = mesh.elem_h[t]
        v0 = layout.v0_slice(t)
        for le in range(3):
            e = mesh.elem_edges[t, le]
            he = mesh.edge_length[e]
            pair = 3 * t + le
            w_val = he * hT ** (1 - 2 * p)
            w_grad = he * hT ** (1 - p)

            r0 = pair * bs
            put(r0, w_val * disc.trace_val[t, le], v0.start)
            sl = layout.vb_slice(e)
            eye = -w_val * np.eye(bs)
            if sl is None:
                put(r0, eye, layout.boundary_vb_slice(e).start, to_boundary=True)
            else:
                put(r0, eye, sl.start)

            for j in range(2):
                r0 = (1 + j) * section + pair * bs
                put(r0, w_grad * disc.trace_grad[t, le, j], v0.start)
                block = np.zeros((bs, layout.nvg))
                block[: layout.nvg] = -w_grad * np.eye(layout.nvg)
                put(r0, block, layout.vg_slice(e, j).start)

    shape = (3 * section, layout.N)
    B = sp.csr_matrix(sp.coo_matrix((vals, (rows, cols)), shape=shape))
    Bb = sp.csr_matrix(
        sp.coo_matrix((vals_b, (rows_b, cols_b)), shape=(3 * section, layout.NB))
    )
    return BMatrix(B=B, Bb=Bb, p=p, block_size=bs, num_pairs=num_pairs)


def assemble_S2(disc):
    """Matrix of the p=2 stabilizer bilinear form (no 1/2 factor).

    Returns (Suu, Sub) so that the quadratic energy of a weak function
    with interior coefficients u and boundary data g is
    u' Suu u + 2 u' Sub g up to a constant in g; the gradient of the
    p=2 stabilizer at u is then Suu u + Sub g. The boundary-boundary
    block is dropped since it never enters the Euler-Lagrange system.
    """
    layout = disc.layout
    mesh = disc.mesh
    bs = layout.nvb
    nv0 = layout.nv0
    nvg = layout.nvg
    nloc = nv0 + bs + 2 * nvg
    gram = disc.edge_gram

    rows, cols, vals = [], [], []
    rows_b, cols_b, vals_b = [], [], []

    for t in range(mesh.num_elements):
        hT = mesh.elem_h[t]
        v0 = layout.v0_slice(t)
        for le in range(3):
            e = mesh.elem_edges[t, le]
            he = mesh.edge_length[e]

            glob = np.full(nloc, -1, dtype=int)
            bnd = np.full(nloc, -1, dtype=int)
            glob[:nv0] = np.arange(v0.start, v0.stop)
            sl = layout.vb_slice(e)
            if sl is None:
                bsl = layout.boundary_vb_slice(e)
                bnd[nv0 : nv0 + bs] = np.arange(bsl.start, bsl.stop)
            else:
                glob[nv0 : nv0 + bs] = np.arange(sl.start, sl.stop)
            for j in range(2):
                gsl = layout.vg_slice(e, j)
                lo = nv0 + bs + j * nvg
                glob[lo : lo + nvg] = np.arange(gsl.start, gsl.stop)

            jval = np.zeros((bs, nloc))
            jval[:, :nv0] = disc.trace_val[t, le]
            jval[:, nv0 : nv0 + bs] = -np.eye(bs)
            local = (he / hT**3) * (jval.T @ gram @ jval)
            for j in range(2):
                jg = np.zeros((bs, nloc))
                jg[:, :nv0] = disc.trace_grad[t, le, j]
                lo = nv0 + bs + j * nvg
                jg[:nvg, lo : lo + nvg] = -np.eye(nvg)
                local += (he / hT) * (jg.T @ gram @ jg)

            rr, cc = np.nonzero(local)
            for r, c in zip(rr, cc):
                if glob[r] < 0:
                    continue
                if glob[c] >= 0:
                    rows.append(glob[r])
                    cols.append(glob[c])
                    vals.append(local[r, c])
                elif bnd[c] >= 0:
                    rows_b.append(glob[r])
                    cols_b.append(bnd[c])
                    vals_b.append(local[r, c])

    Suu = sp.csr_matrix(
        sp.coo_matrix((vals, (rows, cols)), shape=(layout.N, layout.N))
    )
    Sub = sp.csr_matrix(
        sp.coo_matrix((vals_b, (rows_b, cols_b)), shape=(layout.N, layout.NB))
    )
    return Suu, Sub


# ---------------------------------------------------------------------------
# exact integrals of |polynomial|


def integral_abs_poly(coeffs):
    """Exact integral of |c0 + c1 t + ...| over [0, 1].

    Real roots inside (0, 1) split the interval into pieces of constant
    sign, where the integral is |F(b) - F(a)| with F the antiderivative.
    Candidate split points are taken generously (near-real companion
    eigenvalues, Newton-polished): splitting at a non-root is harmless,
    missing a sign change is not.
    """
    c = np.asarray(coeffs, dtype=float)
    nz = np.nonzero(c)[0]
    if len(nz) == 0:
        return 0.0
    c = c[: nz[-1] + 1]
    if len(c) == 1:
        return abs(c[0])

    desc = c[::-1]  # highest degree first, for numpy's poly helpers
    pts = [0.0, 1.0]
    for r in np.roots(desc):
        if abs(r.imag) > 1e-6 * max(1.0, abs(r.real)):
            continue
        x = r.real
        for _ in range(2):
            dp = np.polyval(np.polyder(desc), x)
            if dp == 0.0:
                break
            x -= np.polyval(desc, x) / dp
        if 0.0 < x < 1.0:
            pts.append(x)
    pts = np.unique(pts)

    anti = np.concatenate([[0.0], c / (np.arange(len(c)) + 1.0)])[::-1]
    fv = np.polyval(anti, pts)
    return float(np.abs(np.diff(fv)).sum())


def eval_phi(q, k):
    """phi(q) = sum over (k+1)-blocks of the exact integral of |poly|."""
    q = np.asarray(q, dtype=float)
    bs = k + 1
    if q.size % bs:
        raise ValueError(f"length {q.size} is not a multiple of block size {bs}")
    blocks = q.reshape(-1, bs)
    return float(sum(integral_abs_poly(b) for b in blocks))


# ---------------------------------------------------------------------------
# stabilizer evaluation


def _pair_jump_coeffs(disc, v, t, le):
    """Raw t-coefficients of (v0-vb, d1 v0-vg1, d2 v0-vg2) on one incidence."""
    layout = v.layout
    mesh = disc.mesh
    e = mesh.elem_edges[t, le]
    v0 = v.coeffs[layout.v0_slice(t)]

    jv = disc.trace_val[t, le] @ v0
    sl = layout.vb_slice(e)
    if sl is None:
        if v.boundary is not None:
            jv = jv - v.boundary[layout.boundary_vb_slice(e)]
    else:
        jv = jv - v.coeffs[sl]

    jg = np.empty((2, layout.nvb))
    for j in range(2):
        jg[j] = disc.trace_grad[t, le, j] @ v0
        jg[j, : layout.nvg] -= v.coeffs[layout.vg_slice(e, j)]
    return jv, jg


def eval_s(disc, v, p):
    """Evaluate the stabilizer for p in {1, 2, inf}."""
    mesh = disc.mesh
    if p == 1:
        total = 0.0
        for t in range(mesh.num_elements):
            hT = mesh.elem_h[t]
            for le in range(3):
                he = mesh.edge_length[mesh.elem_edges[t, le]]
                jv, jg = _pair_jump_coeffs(disc, v, t, le)
                total += he / hT * integral_abs_poly(jv)
                total += he * (integral_abs_poly(jg[0]) + integral_abs_poly(jg[1]))
        return total
    if p == 2:
        gram = disc.edge_gram
        total = 0.0
        for t in range(mesh.num_elements):
            hT = mesh.elem_h[t]
            for le in range(3):
                he = mesh.edge_length[mesh.elem_edges[t, le]]
                jv, jg = _pair_jump_coeffs(disc, v, t, le)
                total += he / hT**3 * (jv @ gram @ jv)
                total += he / hT * (jg[0] @ gram @ jg[0] + jg[1] @ gram @ jg[1])
        return 0.5 * total
    if p == np.inf:
        ts = np.concatenate([[0.0], disc.edge_pts, [1.0]])
        tm = np.power.outer(ts, np.arange(disc.cfg.k + 1))
        worst = 0.0
        for t in range(mesh.num_elements):
            hT = mesh.elem_h[t]
            mval = 0.0
            mgrad = 0.0
            for le in range(3):
                jv, jg = _pair_jump_coeffs(disc, v, t, le)
                mval = max(mval, np.abs(tm @ jv).max())
                mgrad = max(mgrad, np.abs(tm @ jg.T).max())
            worst = max(worst, mval / hT**2 + mgrad / hT)
        return worst
    raise ValueError(f"unsupported p={p}")


def eval_s_tilde(disc, v, p):
    """s(v)^(1/p) for finite p; s(v) itself for p = inf."""
    s = eval_s(disc, v, p)
    if p == np.inf:
        return s
    return s ** (1.0 / p)
