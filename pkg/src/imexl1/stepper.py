"""The fully discrete non-uniform IMEX-L1 scheme.

Each step solves

    (K[n,n] M + S0(t_n) + S1(t_n)) u^n
        = M (sum_{j<n} (K[n,j+1]-K[n,j]) u^j + K[n,1] u^0)
          + lam * G (E u^n)  [explicit schemes]
          + F(t_n)
          - lifting of non-homogeneous boundary values,

with the fully implicit variant moving the dense integral block to the left
side (the expensive reference path).  History sums are recomputed exactly at
every step (O(n) each), so a trajectory costs O(N^2) history work plus N
solves.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.sparse.linalg as spla

from .fem import (
    CoefficientSet,
    FeSpace,
    assemble_a0,
    assemble_a1,
    assemble_load,
    assemble_mass,
    interpolate,
    l2_project,
    poincare_constant,
    ritz_project,
)
from .fractional import GradedTimeMesh, L1KernelTable, timestep_threshold
from .integrals import IntegralKernel, quad_cloud
from .linalg import SolveInfo, SparseMatrix, solve

__all__ = [
    "SchemeKind",
    "DiscreteProblem",
    "Trajectory",
    "CoefficientBounds",
    "extrapolate",
    "history_rhs",
    "check_timestep_condition",
    "sample_coefficient_bounds",
    "lambda_constant",
    "build_u0h",
    "step",
    "solve_trajectory",
]

log = logging.getLogger(__name__)


class SchemeKind(str, Enum):
    FULLY_IMPLICIT = "implicit"
    IMEX1 = "imex1"
    IMEX2 = "imex2"


@dataclass
class DiscreteProblem:
    """Everything a trajectory solve needs; dimensions must be consistent."""

    space: FeSpace
    coeffs: CoefficientSet
    tmesh: GradedTimeMesh
    table: L1KernelTable
    scheme: SchemeKind
    u0h: np.ndarray
    G: Optional[np.ndarray] = None            # dense nonlocal matrix (all dofs)
    boundary: Optional[Callable] = None       # boundary(x, t) -> values; None = homogeneous
    kernel_bound: Optional[float] = None      # L-inf estimate of the kernel, for Lambda

    def __post_init__(self):
        if self.u0h.shape[0] != self.space.n_dofs:
            raise ValueError("u0h length does not match the FE space")
        if self.G is not None and self.G.shape != (self.space.n_dofs,) * 2:
            raise ValueError("integral matrix shape does not match the FE space")
        if self.table.K.shape[0] != self.tmesh.N + 1:
            raise ValueError("kernel table does not match the time mesh")


@dataclass
class Trajectory:
    """Coefficient vectors u^0..u^N plus per-step solver diagnostics."""

    t: np.ndarray
    u: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    step_seconds: np.ndarray

    def export_csv(self, path: str, errors: Optional[dict[str, np.ndarray]] = None) -> None:
        """Per-step CSV: n, t_n, iterations, residual[, error columns]."""
        names = ["n", "t", "iterations", "residual"] + list(errors or {})
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(names) + "\n")
            for n in range(self.t.size):
                row = [
                    str(n),
                    f"{self.t[n]:.6e}",
                    str(int(self.iterations[n])),
                    f"{self.residuals[n]:.6e}",
                ]
                for col in (errors or {}).values():
                    row.append(f"{col[n]:.6e}")
                fh.write(",".join(row) + "\n")


def extrapolate(scheme: SchemeKind, history: np.ndarray, n: int, rho_n: float):
    """Explicit value E u^n used by the integral term.

    FULLY_IMPLICIT returns None ("use the current unknown"); IMEX1 returns
    u^{n-1}; IMEX2 returns u^0 at n = 1 and the two-level extrapolation
    (1+rho_n) u^{n-1} - rho_n u^{n-2} afterwards.
    """
    if n < 1:
        raise ValueError("extrapolation needs n >= 1")
    hist = np.asarray(history)
    if hist.shape[0] < n:
        raise ValueError(f"history holds {hist.shape[0]} levels, need u^0..u^{n-1}")
    if scheme == SchemeKind.FULLY_IMPLICIT:
        return None
    if scheme == SchemeKind.IMEX1:
        return hist[n - 1]
    if n == 1:
        return hist[0]
    return (1.0 + rho_n) * hist[n - 1] - rho_n * hist[n - 2]


def history_rhs(values: np.ndarray, K: np.ndarray, M: SparseMatrix, n: int) -> np.ndarray:
    """History contribution M (sum_{j=1..n-1} (K[n,j+1]-K[n,j]) u^j + K[n,1] u^0),

    so the step equation reads (K[n,n] M + S) u^n = history_rhs + explicit
    terms.  Costs one length-n weighted sum and one mass matvec.
    """
    if n < 1:
        raise ValueError("history needs n >= 1")
    vals = np.asarray(values)
    w = np.empty(n)
    w[0] = K[n, 1]
    if n > 1:
        w[1:] = np.diff(K[n, 1 : n + 1])
    return M.matvec(vals[:n].T @ w)


def check_timestep_condition(
    mesh: GradedTimeMesh, alpha: float, Lambda: float
) -> tuple[bool, float]:
    """True iff max step < (1/(2 Lambda Gamma(2-alpha)))**(1/alpha); returns
    the threshold as well."""
    thr = timestep_threshold(alpha, Lambda)
    return bool(float(mesh.dt.max()) < thr), thr


@dataclass(frozen=True)
class CoefficientBounds:
    """Sampled operator bounds entering the stability constants."""

    beta0: float     # coercivity of a0 w.r.t. the full H1 norm
    beta1: float     # bound of a1
    beta2: float     # nonlocal operator bound ||g||_inf * |Omega|
    gamma0: float    # boundedness of a0
    n_space_samples: int
    n_time_samples: int


def sample_coefficient_bounds(
    space: FeSpace,
    coeffs: CoefficientSet,
    kernel_bound: float = 0.0,
    n_times: int = 9,
    T: float = 1.0,
) -> CoefficientBounds:
    """Estimate beta0, beta1, beta2, gamma0 by sampling the coefficient
    fields over the quadrature cloud and a uniform time grid.

    Sampling can under-estimate suprema; the sampling resolution is recorded
    in the result.
    """
    X, W, _ = quad_cloud(space)
    measure = float(W.sum())
    times = np.linspace(0.0, T, n_times)
    a_min, a_max, b_max, c_max = math.inf, 0.0, 0.0, 0.0
    for t in times:
        A = np.asarray(coeffs.A(X, t), dtype=float)
        if space.mesh.dim == 1:
            a_min = min(a_min, float(A.min()))
            a_max = max(a_max, float(A.max()))
        else:
            mid = 0.5 * (A[:, 0, 0] + A[:, 1, 1])
            rad = np.sqrt(0.25 * (A[:, 0, 0] - A[:, 1, 1]) ** 2 + A[:, 0, 1] * A[:, 1, 0])
            a_min = min(a_min, float((mid - rad).min()))
            a_max = max(a_max, float((mid + rad).max()))
        if coeffs.b is not None:
            bv = np.asarray(coeffs.b(X, t), dtype=float)
            mag = np.abs(bv) if space.mesh.dim == 1 else np.linalg.norm(bv, axis=1)
            b_max = max(b_max, float(mag.max()))
        if coeffs.c is not None:
            c_max = max(c_max, float(np.max(np.abs(coeffs.c(X, t)))))
    cp = poincare_constant(space.mesh)
    return CoefficientBounds(
        beta0=a_min / (1.0 + cp**2),
        beta1=math.hypot(b_max, c_max),
        beta2=kernel_bound * measure,
        gamma0=a_max,
        n_space_samples=X.shape[0],
        n_time_samples=n_times,
    )


def lambda_constant(
    scheme: SchemeKind,
    norm_kind: str,
    bounds: CoefficientBounds,
    lam: float,
    rho: float,
    T: float = 1.0,
    alpha: float = 0.5,
) -> float:
    """Stability constant Lambda_0 (L2) or Lambda_1 (H1) of the scheme.

    L2:  beta1^2/beta0 + 2|lam| beta2            (implicit, IMEX1)
         beta1^2/beta0 + 2|lam| (1+2 rho) beta2  (IMEX2)
    H1:  2(beta1^2 + lam^2 beta2^2)/beta0 + T^{1-alpha}/Gamma(2-alpha)
         with the IMEX2 kernel 2(beta1^2 + 2 lam^2 beta2^2 ((1+rho)^2+rho^2))/beta0.
    """
    kind = norm_kind.lower()
    if kind not in ("l2", "h1"):
        raise ValueError(f"norm_kind must be L2 or H1, got {norm_kind!r}")
    if bounds.beta0 <= 0.0:
        raise ValueError("beta0 must be positive (coercivity)")
    al = abs(lam)
    if kind == "l2":
        if scheme == SchemeKind.IMEX2:
            return bounds.beta1**2 / bounds.beta0 + 2.0 * al * (1.0 + 2.0 * rho) * bounds.beta2
        return bounds.beta1**2 / bounds.beta0 + 2.0 * al * bounds.beta2
    tail = T ** (1.0 - alpha) / math.gamma(2.0 - alpha)
    if scheme == SchemeKind.IMEX2:
        core = bounds.beta1**2 + 2.0 * lam**2 * bounds.beta2**2 * ((1.0 + rho) ** 2 + rho**2)
    else:
        core = bounds.beta1**2 + lam**2 * bounds.beta2**2
    return 2.0 * core / bounds.beta0 + tail


def build_u0h(
    space: FeSpace,
    u0: Callable,
    mode: str = "interpolate",
    coeffs: Optional[CoefficientSet] = None,
    grad_u0: Optional[Callable] = None,
) -> np.ndarray:
    """Initial coefficients: nodal interpolant (default), L2, or Ritz projection."""
    if mode == "interpolate":
        return interpolate(space, u0, 0.0)
    if mode == "l2":
        return l2_project(space, u0, 0.0)
    if mode == "ritz":
        if coeffs is None or grad_u0 is None:
            raise ValueError("ritz initialization needs coeffs and grad_u0")
        return ritz_project(space, u0, grad_u0, coeffs, 0.0)
    raise ValueError(f"unknown u0h mode {mode!r}")


class _StepperContext:
    """Per-trajectory cache: mass matrix, dof splitting, boundary values."""

    def __init__(self, problem: DiscreteProblem):
        self.problem = problem
        self.space = problem.space
        self.M = assemble_mass(self.space)
        self.interior = self.space.interior
        self.bnd = np.flatnonzero(self.space.mesh.boundary)
        self.lam = problem.coeffs.lam

    def boundary_values(self, t: float) -> np.ndarray:
        ub = np.zeros(self.space.n_dofs)
        if self.problem.boundary is not None and self.bnd.size:
            ub[self.bnd] = np.asarray(
                self.problem.boundary(self.space.mesh.nodes[self.bnd], t), dtype=float
            )
        return ub

    def solve_step(self, u: np.ndarray, n: int) -> tuple[np.ndarray, SolveInfo]:
        pr = self.problem
        t_n = pr.tmesh.t[n]
        K = pr.table.K
        knn = K[n, n]
        S0 = assemble_a0(self.space, pr.coeffs, t_n)
        S1 = assemble_a1(self.space, pr.coeffs, t_n)
        A = SparseMatrix((knn * self.M.csr + S0.csr + S1.csr).tocsr())

        rhs = history_rhs(u, K, self.M, n)
        if pr.coeffs.f is not None:
            rhs = rhs + assemble_load(self.space, pr.coeffs.f, t_n)

        implicit_dense = pr.scheme == SchemeKind.FULLY_IMPLICIT and self.lam != 0.0 and pr.G is not None
        if self.lam != 0.0 and pr.G is not None and not implicit_dense:
            rho_n = pr.tmesh.rho[n - 2] if n >= 2 else 1.0
            eu = extrapolate(pr.scheme, u, n, rho_n)
            rhs = rhs + self.lam * (pr.G @ eu)

        ub = self.boundary_values(t_n)
        idx = self.interior
        rhs_i = rhs[idx]
        if np.any(ub != 0.0):
            rhs_i = rhs_i - (A.csr @ ub)[idx]
            if implicit_dense:
                rhs_i = rhs_i + self.lam * (pr.G @ ub)[idx]

        if implicit_dense:
            sub_sparse = A.csr[np.ix_(idx, idx)].tocsr()
            sub_dense = pr.G[np.ix_(idx, idx)]
            lam = self.lam
            op = spla.LinearOperator(
                (idx.size, idx.size),
                matvec=lambda v: sub_sparse @ v - lam * (sub_dense @ v),
            )
            op.diag = sub_sparse.diagonal() - lam * np.diagonal(sub_dense)
            x, info = solve(op, rhs_i, "nonsymmetric", return_info=True)
        else:
            if self.space.mesh.dim == 1:
                hint = "banded"
            elif pr.coeffs.b is None:
                hint = "spd"
            else:
                hint = "nonsymmetric"
            x, info = solve(A.submatrix(idx, idx), rhs_i, hint, return_info=True)

        out = ub
        out[idx] = x
        return out, info


def step(problem: DiscreteProblem, u: np.ndarray, n: int) -> np.ndarray:
    """Advance one level: u holds rows u^0..u^{n-1} (and possibly more)."""
    ctx = _StepperContext(problem)
    new, _ = ctx.solve_step(np.asarray(u, dtype=float), n)
    return new


def solve_trajectory(problem: DiscreteProblem, check_condition: bool = True) -> Trajectory:
    """Run all N steps of the scheme.

    The Gronwall step restriction is checked with the sampled Lambda_0 and
    only logged when violated: the condition is sufficient, not necessary.
    """
    N = problem.tmesh.N
    ndof = problem.space.n_dofs
    if check_condition:
        try:
            bounds = sample_coefficient_bounds(
                problem.space,
                problem.coeffs,
                kernel_bound=problem.kernel_bound or 0.0,
                T=problem.tmesh.T,
            )
            lam0 = lambda_constant(
                problem.scheme,
                "L2",
                bounds,
                problem.coeffs.lam,
                problem.tmesh.rho_max,
                T=problem.tmesh.T,
                alpha=problem.table.alpha,
            )
            ok, thr = check_timestep_condition(problem.tmesh, problem.table.alpha, lam0)
            if not ok:
                log.warning(
                    "max step %.4g violates the sufficient stability bound %.4g "
                    "(Lambda0=%.4g from %d space x %d time samples); continuing",
                    float(problem.tmesh.dt.max()), thr, lam0,
                    bounds.n_space_samples, bounds.n_time_samples,
                )
        except ValueError:
            log.warning("could not evaluate the step-size condition; continuing")

    ctx = _StepperContext(problem)
    u = np.zeros((N + 1, ndof))
    u[0] = problem.u0h
    iters = np.zeros(N + 1)
    resid = np.zeros(N + 1)
    secs = np.zeros(N + 1)
    for n in range(1, N + 1):
        tic = time.perf_counter()
        u[n], info = ctx.solve_step(u, n)
        secs[n] = time.perf_counter() - tic
        iters[n] = info.iterations
        resid[n] = info.residual
    return Trajectory(t=problem.tmesh.t.copy(), u=u, iterations=iters, residuals=resid, step_seconds=secs)
