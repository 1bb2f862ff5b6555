"""Solvers: fixed-point proximity iteration (p=1) and direct saddle solve (p=2).

The p=1 scheme minimizes phi(Bu) subject to Au = f through the
fixed-point equations

    beta A^T x + alpha B^T y = 0,
    y = (I - prox_{(1/alpha)phi})(Bu + y),
    Au = f,

iterated as S v^{n+1} = b^n with v = (y, u, x),

    S = [[I, -B, 0], [0, alpha B^T B, beta A^T], [0, beta A, 0]],

and b^n assembled from the prox of the current jumps. S never changes,
so it is factorized once and reused for every iteration.

For p=2 the stabilizer is quadratic and the constrained minimization is
one symmetric indefinite solve: [[S2, A^T], [A, 0]] (u; lambda) = (0; f)
with S2 the stabilizer's second-derivative matrix.

Inhomogeneous boundary values enter both paths the same way: boundary
vb data g shifts the jump vector by c = Bb g and the constraint right
side by -Cb g. Shifting the prox argument by c (and subtracting c back)
turns the homogeneous algorithm into the lifted one, so the iteration
formulas below carry c explicitly but reduce to the plain scheme when
g is absent.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fe_space import WeakFunction
from .prox import prox_phi_k1, prox_phi_oracle, prox_phi_weighted_l1, soft_threshold

__all__ = [
    "SolverConfig",
    "SaddleState",
    "SMatrix",
    "make_prox",
    "assemble_S",
    "make_bn",
    "fixed_point_step",
    "residual_2_90",
    "solve_p1",
    "solve_p2",
    "Diagnostics",
]


@dataclass
class SolverConfig:
    alpha: float = 1.0
    beta: float = 1.0
    tol: float = 1e-10
    residual_tol: float = 1e-8
    max_iters: int = 200000
    prox_method: str = "exact"

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.tol <= 0 or self.residual_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.prox_method not in ("exact", "wl1", "oracle"):
            raise ValueError(f"unknown prox method {self.prox_method!r}")


@dataclass
class SaddleState:
    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    iteration: int = 0

    def flat(self):
        return np.concatenate([self.y, self.u, self.x])


@dataclass
class SMatrix:
    S: sp.csc_matrix
    lu: object
    nB: int
    N: int
    M: int
    alpha: float
    beta: float


@dataclass
class Diagnostics:
    converged: bool = False
    stop_reason: str = ""
    iterations: int = 0
    r1: float = np.inf
    r2: float = np.inf
    r3: float = np.inf
    wall_time: float = 0.0
    residual_history: np.ndarray = None
    step_history: np.ndarray = None
    energy_y: np.ndarray = None
    energy_Bu: np.ndarray = None
    inc_y: np.ndarray = None
    inc_Bu: np.ndarray = None


def make_prox(method, k, alpha):
    """Blockwise prox of (1/alpha)*phi as a callable on stacked vectors."""
    if method == "exact":
        if k == 0:
            return lambda q: soft_threshold(q, 1.0 / alpha)
        if k == 1:
            return lambda q: prox_phi_k1(q, alpha)
        raise ValueError(
            f"no exact prox is known for k={k}; use 'wl1' (or 'oracle' on tiny problems)"
        )
    if method == "wl1":
        return lambda q: prox_phi_weighted_l1(q, alpha, k)
    if method == "oracle":
        def oracle(q):
            blocks = np.asarray(q, dtype=float).reshape(-1, k + 1)
            return np.concatenate([prox_phi_oracle(b, alpha, k) for b in blocks])

        return oracle
    raise ValueError(f"unknown prox method {method!r}")


def assemble_S(A, B, alpha, beta):
    """Build and factorize the iteration matrix S (one time per config)."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    nB, N = B.shape
    M = A.shape[0]
    S = sp.bmat(
        [
            [sp.eye(nB), -B, None],
            [None, alpha * (B.T @ B), beta * A.T],
            [None, beta * A, None],
        ],
        format="csc",
    )
    try:
        lu = splu(S)
    except RuntimeError as exc:
        raise RuntimeError(
            "factorization of S failed; A may be rank-deficient"
        ) from exc
    return SMatrix(S=S, lu=lu, nB=nB, N=N, M=M, alpha=alpha, beta=beta)


def make_bn(state, A, B, fvec, alpha, beta, prox, c=None):
    """Right-hand side b^n of the linear step S v^{n+1} = b^n.

    c is the constant jump offset from boundary data (zero when absent):
    the effective jump vector is Bu + c and the prox acts on Bu + c + y.
    """
    Bu = B @ state.u
    if c is not None:
        Bu = Bu + c
    P = prox(Bu + state.y)
    b1 = state.y - P
    if c is not None:
        b1 = b1 + c
        P = P - c
    b2 = alpha * (B.T @ P) + beta * (A.T @ state.x)
    return np.concatenate([b1, b2, beta * fvec])


def fixed_point_step(state, smat, bn):
    """One iteration: solve S v^{n+1} = b^n and split the blocks."""
    z = smat.lu.solve(bn)
    return SaddleState(
        y=z[: smat.nB],
        u=z[smat.nB : smat.nB + smat.N],
        x=z[smat.nB + smat.N :],
        iteration=state.iteration + 1,
    )


def residual_2_90(state, A, B, fvec, alpha, beta, prox, c=None):
    """Sup-norm residuals of the three fixed-point equations."""
    r1 = np.abs(beta * (A.T @ state.x) + alpha * (B.T @ state.y)).max()
    Ju = B @ state.u
    if c is not None:
        Ju = Ju + c
    P = prox(Ju + state.y)
    r2 = np.abs(P - Ju).max()
    r3 = np.abs(A @ state.u - fvec).max()
    return r1, r2, r3


def solve_p1(system, bmat, k, cfg, g=None):
    """Run the fixed-point proximity iteration for the p=1 scheme.

    system is the assembled constraint (A, Cb, fvec), bmat the jump
    matrices for p=1, g the optional boundary vb data. Stops when the
    relative step or the fixed-point residual drops below its
    tolerance; hitting max_iters returns the best iterate seen (by
    worst-case residual) with converged=False.

    Returns (u_coeffs, state, diagnostics).
    """
    A, fvec = system.A, system.fvec
    B = bmat.B
    prox = make_prox(cfg.prox_method, k, cfg.alpha)
    alpha, beta = cfg.alpha, cfg.beta

    if g is not None:
        c = bmat.Bb @ g
        fp = fvec - system.Cb @ g
    else:
        c = np.zeros(B.shape[0])
        fp = fvec

    smat = assemble_S(A, B, alpha, beta)
    state = SaddleState(
        y=np.zeros(B.shape[0]), u=np.zeros(B.shape[1]), x=np.zeros(A.shape[0])
    )

    t0 = time.perf_counter()
    res_hist = []
    step_hist = []
    energy_y = []
    energy_Bu = []
    inc_y = []
    inc_Bu = []
    best = (np.inf, state)
    converged = False
    reason = "max_iters"
    prev_step = np.inf

    AT = A.T.tocsr()
    BT = B.T.tocsr()
    b3 = beta * fp

    Ju = B @ state.u + c
    for _ in range(cfg.max_iters):
        w = Ju + state.y
        P = prox(w)
        r1 = np.abs(beta * (AT @ state.x) + alpha * (BT @ state.y)).max()
        r2 = np.abs(P - Ju).max() if len(P) else 0.0
        r3 = np.abs(A @ state.u - fp).max()
        res_hist.append((r1, r2, r3))
        energy_y.append(np.dot(state.y, state.y))
        energy_Bu.append(np.dot(Ju, Ju))
        worst = max(r1, r2, r3)
        if worst < best[0]:
            best = (worst, state)
        if worst <= cfg.residual_tol:
            converged = True
            reason = "residual"
            break
        if prev_step <= cfg.tol:
            converged = True
            reason = "step"
            break

        b1 = state.y - P + c
        b2 = alpha * (BT @ (P - c)) + beta * (AT @ state.x)
        new = fixed_point_step(state, smat, np.concatenate([b1, b2, b3]))
        Ju_new = B @ new.u + c
        inc_Bu.append(np.sum((Ju_new - Ju) ** 2))
        inc_y.append(np.sum((new.y - state.y) ** 2))
        prev_step = np.linalg.norm(new.flat() - state.flat()) / (
            1.0 + np.linalg.norm(state.flat())
        )
        step_hist.append(prev_step)
        state = new
        Ju = Ju_new

    if not converged:
        state = best[1]

    diag = Diagnostics(
        converged=converged,
        stop_reason=reason,
        iterations=state.iteration,
        wall_time=time.perf_counter() - t0,
        residual_history=np.array(res_hist),
        step_history=np.array(step_hist),
        energy_y=np.array(energy_y),
        energy_Bu=np.array(energy_Bu),
        inc_y=np.array(inc_y),
        inc_Bu=np.array(inc_Bu),
    )
    if len(res_hist):
        diag.r1, diag.r2, diag.r3 = res_hist[min(state.iteration, len(res_hist) - 1)]
    return state.u, state, diag


def solve_p2(system, s2uu, s2ub=None, g=None):
    """Direct solve of the p=2 Euler-Lagrange saddle system.

    Returns (u_coeffs, lam, residual) where residual is the sup-norm of
    the full linear system at the computed solution.
    """
    A, fvec = system.A, system.fvec
    N = A.shape[1]
    M = A.shape[0]
    K = sp.bmat([[s2uu, A.T], [A, None]], format="csc")
    rhs = np.zeros(N + M)
    rhs[N:] = fvec
    if g is not None:
        rhs[:N] -= s2ub @ g
        rhs[N:] -= system.Cb @ g
    try:
        lu = splu(K)
    except RuntimeError as exc:
        raise RuntimeError(
            "saddle system is singular; the mesh may be too coarse"
        ) from exc
    z = lu.solve(rhs)
    residual = np.abs(K @ z - rhs).max()
    return z[:N], z[N:], residual
