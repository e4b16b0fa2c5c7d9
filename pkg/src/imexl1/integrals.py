"""Nonlocal integral operator assembly and the Merton jump-diffusion pieces.

The operator (I u)(x) = integral_Omega u(y) g(x, y) dy is discretized as a
dense matrix G with

    G[i, j] = integral integral phi_j(y) g(x, y) phi_i(x) dy dx

via tensorized element quadrature.  G is meant for the explicit side of the
IMEX schemes; the fully implicit scheme folds it into the system operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .fem import FeSpace, _geometry_1d, _geometry_2d, _interval_basis, _tri_basis, interval_rule, triangle_rule

__all__ = [
    "IntegralKernel",
    "MertonModel",
    "assemble_integral_matrix",
    "quad_cloud",
    "apply_kernel_pointwise",
    "merton_density",
    "merton_kappa",
    "normal_cdf",
    "merton_tail_R",
]


@dataclass(frozen=True)
class IntegralKernel:
    """Bounded kernel of the nonlocal operator.

    ``g(x, y)`` is pairwise: given x of shape (m,) or (m, 2) and y of shape
    (q,) or (q, 2), it returns the (m, q) matrix of kernel values.  ``bound``
    is an L-infinity estimate used for the operator-norm constant
    beta_2 = bound * |Omega|.
    """

    g: Callable
    bound: Optional[float] = None

    @staticmethod
    def from_difference(rho: Callable, bound: Optional[float] = None) -> "IntegralKernel":
        """Kernel g(x, y) = rho(y - x) for 1D convolution-type operators."""

        def g(x, y):
            return rho(np.asarray(y)[None, :] - np.asarray(x)[:, None])

        return IntegralKernel(g=g, bound=bound)


@dataclass(frozen=True)
class MertonModel:
    """Parameters of the time-fractional Merton jump-diffusion put problem."""

    sigma: float = 0.15
    r: float = 0.05
    lam: float = 0.10
    mu_J: float = -0.90
    sigma_J: float = 0.45
    K_strike: float = 100.0
    S0: float = 100.0
    X: float = 1.5
    T: float = 0.25

    def __post_init__(self):
        if self.sigma <= 0.0 or self.sigma_J <= 0.0 or self.lam < 0.0 or self.X <= 0.0:
            raise ValueError("need sigma > 0, sigma_J > 0, lam >= 0, X > 0")


def quad_cloud(space: FeSpace):
    """Quadrature cloud of the whole mesh: points X, weights W, and the
    sparse basis matrix Phi with Phi[q, i] = phi_i(X[q])."""
    mesh = space.mesh
    if mesh.dim == 1:
        rule = interval_rule(5)
        phi = _interval_basis(rule.points)
        x0, hs = _geometry_1d(mesh)
        nq = rule.points.size
        X = (x0[:, None] + np.outer(hs, rule.points)).ravel()
        W = (np.outer(hs, rule.weights)).ravel()
        rows = np.repeat(np.arange(X.size), 2)
        cols = np.repeat(mesh.elements, nq, axis=0).ravel()
        vals = np.tile(phi, (mesh.n_elements, 1)).ravel()
    else:
        rule = triangle_rule(2)
        phi = _tri_basis(rule.points)
        v0, J, det, _ = _geometry_2d(mesh)
        nq = rule.points.shape[0]
        X = (v0[:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)).reshape(-1, 2)
        W = np.outer(det, rule.weights).ravel()
        rows = np.repeat(np.arange(W.size), 3)
        cols = np.repeat(mesh.elements, nq, axis=0).ravel()
        vals = np.tile(phi, (mesh.n_elements, 1)).ravel()
    Phi = sp.csr_matrix((vals, (rows, cols)), shape=(W.size, space.n_dofs))
    return X, W, Phi


def assemble_integral_matrix(
    space: FeSpace, kernel: IntegralKernel, chunk_rows: int = 512
) -> np.ndarray:
    """Dense matrix of the nonlocal operator, assembled in row blocks of the
    quadrature cloud to bound peak memory."""
    X, W, Phi = quad_cloud(space)
    WPhi = sp.diags(W) @ Phi
    n = space.n_dofs
    G = np.zeros((n, n))
    for r0 in range(0, W.size, chunk_rows):
        r1 = min(r0 + chunk_rows, W.size)
        g_blk = np.asarray(kernel.g(X[r0:r1], X), dtype=float)
        if not np.all(np.isfinite(g_blk)):
            raise ValueError("integral kernel produced non-finite values")
        G += Phi[r0:r1].T @ ((W[r0:r1, None] * g_blk) @ WPhi)
    return G


def apply_kernel_pointwise(space: FeSpace, kernel: IntegralKernel, coef: np.ndarray, pts):
    """(I u_h)(pts) by quadrature — an assembly-free evaluation path."""
    X, W, Phi = quad_cloud(space)
    u_at_quad = Phi @ np.asarray(coef, dtype=float)
    g = np.asarray(kernel.g(pts, X), dtype=float)
    return g @ (W * u_at_quad)


# ----------------------------------------------------------------- Merton

def merton_density(x, model: MertonModel):
    """Gaussian jump density rho(x) = exp(-(x-mu_J)^2/(2 sigma_J^2)) / sqrt(2 pi sigma_J^2)."""
    x = np.asarray(x, dtype=float)
    s2 = model.sigma_J**2
    out = np.exp(-((x - model.mu_J) ** 2) / (2.0 * s2)) / math.sqrt(2.0 * math.pi * s2)
    return float(out) if out.ndim == 0 else out


def merton_kappa(model: MertonModel) -> float:
    """kappa = integral (e^x - 1) rho(x) dx = exp(mu_J + sigma_J^2/2) - 1."""
    return math.expm1(model.mu_J + 0.5 * model.sigma_J**2)


def normal_cdf(y):
    """Standard normal CDF via the complementary error function."""
    y = np.asarray(y, dtype=float)
    out = 0.5 * _erfc(-y / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def _erfc(v):
    from scipy.special import erfc

    return erfc(v)


def merton_tail_R(x, t: float, model: MertonModel):
    """Truncated-domain tail term

        R(x, t) = K e^{-rt} Phi(-(x+X+mu_J)/sigma_J)
                  - S0 e^{x+mu_J+sigma_J^2/2} Phi(-(x+X+mu_J+sigma_J^2)/sigma_J),

    the far-field contribution integral_{R \\ Omega} u(y, t) rho(y-x) dy of
    the deep-in-the-money put payoff.
    """
    x = np.asarray(x, dtype=float)
    sj = model.sigma_J
    a = x + model.X + model.mu_J
    out = model.K_strike * math.exp(-model.r * t) * normal_cdf(-a / sj) - (
        model.S0 * np.exp(x + model.mu_J + 0.5 * sj**2) * normal_cdf(-(a + sj**2) / sj)
    )
    return float(out) if out.ndim == 0 else out
