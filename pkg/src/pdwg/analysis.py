"""Manufactured-solution test problems, error norms, and convergence studies.

Each built-in problem prescribes the exact solution and coefficient
matrix; the load f is synthesized pointwise from the exact Hessian so
the discrete solution can be compared against u directly. Errors are
measured in L^p, the W^{1,p} seminorm, and the discrete W^{2,p} norm
s_tilde(e_h) + ||Q_h L e_0||_{0,p} with e_h = Q_h u - u_h.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .fe_space import Discretization, SpaceConfig, WeakFunction, project_Qh
from .mesh import build_uniform
from .solver import SolverConfig, solve_p1, solve_p2
from .stabilizer import assemble_B, assemble_S2, eval_s_tilde
from .weak_assembly import CoefficientField, assemble_A

__all__ = [
    "ProblemCase",
    "ErrorReport",
    "ConvergenceTable",
    "builtin_case",
    "error_lp",
    "error_w1p",
    "error_w2ph",
    "rates",
    "run_study",
]


@dataclass
class ProblemCase:
    name: str
    field: CoefficientField
    description: str = ""


@dataclass
class ErrorReport:
    n: int
    h: float
    e_L: float
    e_W1: float
    e_W2: float
    iterations: int
    residuals: tuple
    converged: bool = True
    wall_time: float = 0.0


@dataclass
class ConvergenceTable:
    case: str
    p: float
    k: int
    reports: list = field(default_factory=list)

    def column(self, name):
        return [getattr(r, name) for r in self.reports]

    def rate_columns(self):
        return {
            name: rates(self.column(name)) for name in ("e_L", "e_W1", "e_W2")
        }


def _sinsin():
    pi = np.pi

    def u(p):
        return np.sin(pi * p[..., 0]) * np.sin(pi * p[..., 1])

    def grad_u(p):
        x, y = p[..., 0], p[..., 1]
        return pi * np.stack(
            [np.cos(pi * x) * np.sin(pi * y), np.sin(pi * x) * np.cos(pi * y)],
            axis=-1,
        )

    def hess_u(p):
        x, y = p[..., 0], p[..., 1]
        out = np.empty(p.shape[:-1] + (2, 2))
        out[..., 0, 0] = -(pi**2) * np.sin(pi * x) * np.sin(pi * y)
        out[..., 1, 1] = out[..., 0, 0]
        out[..., 0, 1] = pi**2 * np.cos(pi * x) * np.cos(pi * y)
        out[..., 1, 0] = out[..., 0, 1]
        return out

    return u, grad_u, hess_u


def _synth_f(a, hess_u):
    def f(p):
        return np.einsum("...ij,...ij->...", a(p), hess_u(p))

    return f


def builtin_case(name):
    """Problem definitions: const | var | disc coefficient examples."""
    if name == "const":
        u, grad_u, hess_u = _sinsin()

        def a(p):
            out = np.zeros(p.shape[:-1] + (2, 2))
            out[..., 0, 0] = 1.0
            out[..., 0, 1] = 1.0
            out[..., 1, 0] = 1.0
            out[..., 1, 1] = 6.0
            return out

        return ProblemCase(
            name,
            CoefficientField(a=a, f=_synth_f(a, hess_u), u=u, grad_u=grad_u, hess_u=hess_u),
            "constant coefficients, smooth solution",
        )
    if name == "var":
        u, grad_u, hess_u = _sinsin()

        def a(p):
            x, y = p[..., 0], p[..., 1]
            out = np.empty(p.shape[:-1] + (2, 2))
            out[..., 0, 0] = 1.0 + x
            out[..., 0, 1] = 0.5 * x * y
            out[..., 1, 0] = 0.5 * x * y
            out[..., 1, 1] = 1.0 + y
            return out

        return ProblemCase(
            name,
            CoefficientField(a=a, f=_synth_f(a, hess_u), u=u, grad_u=grad_u, hess_u=hess_u),
            "variable coefficients, smooth solution",
        )
    if name == "disc":
        # u = g(x) g(y) with g(t) = t (1 - e^{1-t})
        def g(t):
            return t * (1.0 - np.exp(1.0 - t))

        def dg(t):
            return 1.0 - np.exp(1.0 - t) + t * np.exp(1.0 - t)

        def ddg(t):
            return (2.0 - t) * np.exp(1.0 - t)

        def u(p):
            return g(p[..., 0]) * g(p[..., 1])

        def grad_u(p):
            x, y = p[..., 0], p[..., 1]
            return np.stack([dg(x) * g(y), g(x) * dg(y)], axis=-1)

        def hess_u(p):
            x, y = p[..., 0], p[..., 1]
            out = np.empty(p.shape[:-1] + (2, 2))
            out[..., 0, 0] = ddg(x) * g(y)
            out[..., 0, 1] = dg(x) * dg(y)
            out[..., 1, 0] = out[..., 0, 1]
            out[..., 1, 1] = g(x) * ddg(y)
            return out

        def a(p):
            x, y = p[..., 0], p[..., 1]
            s = np.sign(x - 0.5) * np.sign(y - 0.5)
            out = np.empty(p.shape[:-1] + (2, 2))
            out[..., 0, 0] = 2.0
            out[..., 0, 1] = s
            out[..., 1, 0] = s
            out[..., 1, 1] = 2.0
            return out

        return ProblemCase(
            name,
            CoefficientField(a=a, f=_synth_f(a, hess_u), u=u, grad_u=grad_u, hess_u=hess_u),
            "checkerboard off-diagonal coefficients, smooth solution",
        )
    raise ValueError(f"unknown problem case {name!r}")


# ---------------------------------------------------------------------------
# error norms


def _elementwise_lp(disc, vals, p):
    """L^p norm from per-element quadrature values of the integrand."""
    if p == np.inf:
        return np.abs(vals).max()
    total = np.sum(disc.quad_w * np.abs(vals) ** p)
    return total ** (1.0 / p)


def error_lp(disc, u_h, case, p):
    """||u - u_0||_{0,p} by elementwise quadrature."""
    exact = case.field.u(disc.quad_pts)
    approx = np.einsum("tqn,tn->tq", disc.basis_v, _v0_blocks(disc, u_h))
    return _elementwise_lp(disc, exact - approx, p)


def error_w1p(disc, u_h, case, p):
    """L^p norm of the pointwise Euclidean length of grad u - grad u_0."""
    exact = case.field.grad_u(disc.quad_pts)
    approx = np.einsum("tqnd,tn->tqd", disc.basis_v_grad, _v0_blocks(disc, u_h))
    mag = np.linalg.norm(exact - approx, axis=-1)
    return _elementwise_lp(disc, mag, p)


def error_w2ph(disc, u_h, case, p):
    """Discrete W^{2,p} error: s_tilde(e_h) + ||Q_h L e_0||_{0,p}, e_h = Q_h u - u_h."""
    qh = project_Qh(case.field.u, case.field.grad_u, disc)
    e = WeakFunction(
        disc.layout,
        qh.coeffs - u_h.coeffs,
        boundary=qh.boundary_or_zero() - u_h.boundary_or_zero(),
    )
    st = eval_s_tilde(disc, e, p)

    hess = np.einsum("tqnij,tn->tqij", disc.basis_v_hess, _v0_blocks(disc, e))
    le0 = np.einsum("tqij,tqij->tq", case.field.a(disc.quad_pts), hess)
    moments = np.einsum("tq,tq,tqm->tm", disc.quad_w, le0, disc.basis_w)
    coeffs = np.einsum("tmn,tn->tm", disc.mass_w_inv, moments)
    proj = np.einsum("tqm,tm->tq", disc.basis_w, coeffs)
    return st + _elementwise_lp(disc, proj, p)


def _v0_blocks(disc, u_h):
    layout = disc.layout
    return u_h.coeffs[: layout.N1].reshape(disc.mesh.num_elements, layout.nv0)


def rates(errors):
    """Doubling rates log2(e_i / e_{i+1}); needs positive entries."""
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0):
        raise ValueError("rates need strictly positive errors")
    return list(np.log2(e[:-1] / e[1:]))


# ---------------------------------------------------------------------------
# study driver


def run_study(case, p, n_list, k=2, l=None, cfg=None):
    """Solve the case over a list of mesh sizes and report errors.

    p=2 uses the direct saddle solve, p=1 the fixed-point iteration
    (cfg carries its parameters). Non-convergence at a level is
    recorded in that level's report rather than raised, so callers get
    the partial table either way.
    """
    if p not in (1, 2):
        raise ValueError(f"no solver for p={p}; use 1 or 2")
    if cfg is None:
        cfg = SolverConfig(prox_method="wl1" if k >= 2 else "exact")
    table = ConvergenceTable(case=case.name, p=p, k=k)
    for n in n_list:
        if case.name == "disc" and n % 2 == 1:
            raise ValueError(
                f"the disc case needs even n so mesh lines track the "
                f"coefficient jumps; got n={n}"
            )
        mesh = build_uniform(n)
        disc = Discretization(mesh, SpaceConfig(k=k) if l is None else SpaceConfig(k=k, l=l))
        system = assemble_A(disc, case.field)
        if p == 2:
            t0 = time.perf_counter()
            suu, sub = assemble_S2(disc)
            coeffs, lam, res = solve_p2(system, suu, sub)
            wall = time.perf_counter() - t0
            u_h = WeakFunction(disc.layout, coeffs)
            iters, residuals, converged = 1, (res,), True
        else:
            bmat = assemble_B(disc, 1)
            coeffs, state, diag = solve_p1(system, bmat, k, cfg)
            u_h = WeakFunction(disc.layout, coeffs)
            iters = diag.iterations
            residuals = (diag.r1, diag.r2, diag.r3)
            converged = diag.converged
            wall = diag.wall_time
        table.reports.append(
            ErrorReport(
                n=n,
                h=float(mesh.elem_h.max()),
                e_L=error_lp(disc, u_h, case, p),
                e_W1=error_w1p(disc, u_h, case, p),
                e_W2=error_w2ph(disc, u_h, case, p),
                iterations=iters,
                residuals=residuals,
                converged=converged,
                wall_time=wall,
            )
        )
    return table
