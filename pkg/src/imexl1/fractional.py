"""Graded time meshes, L1 kernel tables, and the discrete fractional Gronwall bound.

The Caputo derivative of order ``alpha`` in (0,1) is discretized by the L1
formula on a graded grid ``t_n = (n/N)**gamma * T``.  The discrete kernels

    K[n, j] = ((t_n - t_{j-1})**(1-alpha) - (t_n - t_j)**(1-alpha))
              / (Gamma(2-alpha) * dt_j)

are the averages of the Riemann-Liouville kernel k_{1-alpha} over the mesh
intervals; they increase strictly in j for fixed n.  The complementary
kernels P[n, j] act as a discrete resolvent of K and drive both the
fractional Gronwall bound and its numerical verification.

Kernel differences are evaluated through ``expm1``/``log1p`` to avoid the
cancellation that the naive difference of almost-equal powers suffers for
j << n on strongly graded meshes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "GradedTimeMesh",
    "L1KernelTable",
    "GronwallInput",
    "ConditionViolatedError",
    "build_graded_mesh",
    "rl_kernel",
    "build_k_table",
    "build_p_table",
    "build_kernel_table",
    "l1_derivative",
    "mittag_leffler",
    "timestep_threshold",
    "gronwall_bound",
    "check_gronwall",
    "solve_scalar_recurrence",
    "gamma_preset",
]

#: Largest |z| accepted by :func:`mittag_leffler`.  Within this range the
#: series still overflows double precision when z**(1/alpha) exceeds ~700
#: (E_alpha(z) ~ exp(z**(1/alpha))/alpha); that case raises as well.
ML_MAX_ARG = 50.0


class ConditionViolatedError(RuntimeError):
    """Raised when the maximum time step violates the Gronwall step restriction."""


@dataclass(frozen=True)
class GradedTimeMesh:
    """Temporal grid t_n = (n/N)**gamma * T with non-decreasing steps.

    ``t`` has N+1 entries, ``dt[j]`` is t_{j+1} - t_j for j = 0..N-1, and
    ``rho[j]`` is dt_{j+2}/dt_{j+1} (the paper's rho_n for n = j+2).
    """

    T: float
    N: int
    gamma: float
    t: np.ndarray
    dt: np.ndarray
    rho: np.ndarray

    @property
    def dt_max(self) -> float:
        return float(self.dt[-1]) if self.gamma >= 1.0 else float(self.dt.max())

    @property
    def rho_max(self) -> float:
        return float(self.rho.max()) if self.rho.size else 1.0


@dataclass(frozen=True)
class L1KernelTable:
    """Discrete kernels K[n, j] and complementary kernels P[n, j].

    Both tables are stored as dense (N+1, N+1) arrays whose row/column 0 is
    unused, so indices match the 1-based notation K^{n,j}, 1 <= j <= n <= N.
    """

    alpha: float
    K: np.ndarray
    P: np.ndarray


@dataclass(frozen=True)
class GronwallInput:
    """Data of the discrete fractional Gronwall inequality.

    ``lam[n, j]`` holds the non-negative coefficient of lag j at level n
    (1 <= n <= N, 0 <= j <= n), and ``Lambda`` bounds every row sum.
    """

    v0: float
    xi: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    lam: np.ndarray
    Lambda: float

    def __post_init__(self):
        if self.v0 < 0.0:
            raise ValueError("v0 must be non-negative")
        for name in ("xi", "eta", "zeta"):
            if np.any(np.asarray(getattr(self, name)) < 0.0):
                raise ValueError(f"{name} must be non-negative")
        if np.any(self.lam < 0.0):
            raise ValueError("lambda coefficients must be non-negative")
        n_levels = self.lam.shape[0] - 1
        row_sums = [self.lam[n, : n + 1].sum() for n in range(1, n_levels + 1)]
        if row_sums and self.Lambda < max(row_sums) - 1e-12 * max(1.0, self.Lambda):
            raise ValueError("Lambda must dominate every row sum of the lambda table")


def build_graded_mesh(T: float, N: int, gamma: float) -> GradedTimeMesh:
    """Build the graded mesh t_n = (n/N)**gamma * T.

    gamma = 1 gives the uniform mesh; gamma > 1 concentrates points near
    t = 0 where the solution's time derivative blows up.
    """
    if not T > 0.0:
        raise ValueError(f"final time must be positive, got T={T}")
    if N < 1 or int(N) != N:
        raise ValueError(f"step count must be a positive integer, got N={N}")
    if gamma < 1.0:
        raise ValueError(f"grading exponent must satisfy gamma >= 1, got {gamma}")
    N = int(N)
    n = np.arange(N + 1, dtype=float)
    t = (n / N) ** gamma * T
    # dt_j = t_j * (1 - ((j-1)/j)**gamma), evaluated without cancellation;
    # the cumulative max irons out sub-ulp jitter so steps never decrease
    dt = np.empty(N)
    dt[0] = t[1]
    if N > 1:
        j = n[2:]
        dt[1:] = t[2:] * (-np.expm1(gamma * np.log1p(-1.0 / j)))
    dt = np.maximum.accumulate(dt)
    rho = dt[1:] / dt[:-1]
    return GradedTimeMesh(T=float(T), N=N, gamma=float(gamma), t=t, dt=dt, rho=rho)


def gamma_preset(name: str, alpha: float) -> float:
    """Canonical grading exponents: "2(2-a)/a" and "(2-a)/a"."""
    presets = {
        "2(2-a)/a": 2.0 * (2.0 - alpha) / alpha,
        "(2-a)/a": (2.0 - alpha) / alpha,
    }
    try:
        return presets[name]
    except KeyError:
        raise ValueError(f"unknown gamma preset {name!r}; options: {sorted(presets)}") from None


def rl_kernel(t, beta: float):
    """Riemann-Liouville kernel k_beta(t) = t**(beta-1) / Gamma(beta), t > 0."""
    if beta <= 0.0:
        raise ValueError(f"kernel order must be positive, got beta={beta}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise ValueError("rl_kernel requires t > 0")
    out = t_arr ** (beta - 1.0) / math.gamma(beta)
    return float(out) if np.isscalar(t) or out.ndim == 0 else out


def _stable_power_diff(b: np.ndarray, d: np.ndarray, p: float) -> np.ndarray:
    """(b+d)**p - b**p for b >= 0, d > 0, without cancellation.

    Uses b**p * expm1(p*log1p(d/b)); b == 0 falls back to d**p.
    """
    out = np.empty_like(b)
    zero = b <= 0.0
    out[zero] = d[zero] ** p
    nz = ~zero
    out[nz] = b[nz] ** p * np.expm1(p * np.log1p(d[nz] / b[nz]))
    return out


def build_k_table(mesh: GradedTimeMesh, alpha: float) -> np.ndarray:
    """L1 discrete kernels K[n, j] for 1 <= j <= n <= N (order 1-alpha).

    K[n, j] is the average of k_{1-alpha}(t_n - s) over (t_{j-1}, t_j), so
    rows increase strictly in j (the kernel decays away from t_n).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0,1), got alpha={alpha}")
    N = mesh.N
    t = mesh.t
    g2 = math.gamma(2.0 - alpha)
    p = 1.0 - alpha
    K = np.zeros((N + 1, N + 1))
    for n in range(1, N + 1):
        j = np.arange(1, n + 1)
        b = t[n] - t[j]          # 0 at j = n
        d = mesh.dt[j - 1]
        K[n, 1 : n + 1] = _stable_power_diff(b, d, p) / (g2 * d)
    return K


def build_p_table(K: np.ndarray) -> np.ndarray:
    """Complementary kernels: P[n, n] = 1/K[n, n] and, for i < n,

        P[n, i] = (1/K[i, i]) * sum_{j=i+1..n} P[n, j] * (K[j, i+1] - K[j, i]).

    Equivalently P solves P @ B = I with B[i, i] = K[i, i] and
    B[j, i] = -(K[j, i+1] - K[j, i]) for j > i; that back-substitution only
    adds non-negative terms, which keeps P >= 0 in floating point.
    """
    N = K.shape[0] - 1
    B = np.zeros((N, N))
    for i in range(1, N + 1):
        B[i - 1, i - 1] = K[i, i]
        if i < N:
            j = np.arange(i + 1, N + 1)
            B[j - 1, i - 1] = -(K[j, i + 1] - K[j, i])
    Pt = solve_triangular(B.T, np.eye(N), lower=False)
    P = np.zeros((N + 1, N + 1))
    P[1:, 1:] = Pt.T
    return P


def build_kernel_table(mesh: GradedTimeMesh, alpha: float) -> L1KernelTable:
    """Build K and its complementary table P for one fractional order."""
    K = build_k_table(mesh, alpha)
    return L1KernelTable(alpha=float(alpha), K=K, P=build_p_table(K))


def l1_derivative(values: np.ndarray, K: np.ndarray, n: int) -> float:
    """L1 approximation of the Caputo derivative at t_n:
    sum_{j=1..n} K[n, j] * (values[j] - values[j-1]).

    Exact whenever ``values`` are samples of a piecewise-linear function on
    the mesh, because the kernel averages are exact for constant slopes.
    """
    N = K.shape[0] - 1
    if not 1 <= n <= N:
        raise IndexError(f"time level n={n} outside 1..{N}")
    v = np.asarray(values, dtype=float)
    if v.shape[0] < n + 1:
        raise IndexError(f"need values[0..{n}], got length {v.shape[0]}")
    return float(K[n, 1 : n + 1] @ np.diff(v[: n + 1]))


def mittag_leffler(alpha: float, z, rtol: float = 1e-14, max_terms: int = 20000):
    """One-parameter Mittag-Leffler function E_alpha(z) = sum_k z**k / Gamma(1+alpha*k).

    Plain power series with term-ratio stopping; accepts scalars or arrays.
    Supported range: 0 < alpha <= 1 and |z| <= ML_MAX_ARG, and the value must
    be representable in double precision (z**(1/alpha) <~ 700).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"mittag_leffler requires alpha in (0,1], got {alpha}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(np.abs(z_arr) > ML_MAX_ARG):
        raise ValueError(
            f"|z| = {np.max(np.abs(z_arr)):.6g} beyond supported range "
            f"|z| <= {ML_MAX_ARG:g} for the power-series evaluation"
        )
    term = np.ones_like(z_arr)
    total = term.copy()
    lg = math.lgamma
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(max_terms):
            ratio = math.exp(lg(1.0 + alpha * k) - lg(1.0 + alpha * (k + 1)))
            term = term * (z_arr * ratio)
            total = total + term
            if not np.all(np.isfinite(total)):
                raise ValueError(
                    f"E_{alpha:g}(z) overflows double precision for max|z| = "
                    f"{np.max(np.abs(z_arr)):.6g} (need z**(1/alpha) <~ 700; "
                    f"hard cap |z| <= {ML_MAX_ARG:g})"
                )
            if np.max(np.abs(term)) <= rtol * max(np.max(np.abs(total)), 1.0):
                break
        else:
            raise ValueError(f"Mittag-Leffler series did not converge in {max_terms} terms")
    return float(total) if np.isscalar(z) or total.ndim == 0 else total


def timestep_threshold(alpha: float, Lambda: float) -> float:
    """Admissible maximum step (1/(2*Lambda*Gamma(2-alpha)))**(1/alpha).

    Lambda -> 0 gives an infinite threshold (the restriction disappears).
    """
    if Lambda < 0.0:
        raise ValueError(f"Lambda must be non-negative, got {Lambda}")
    if Lambda == 0.0:
        return math.inf
    return (1.0 / (2.0 * Lambda * math.gamma(2.0 - alpha))) ** (1.0 / alpha)


def _check_admissible(mesh: GradedTimeMesh, alpha: float, Lambda: float) -> None:
    if mesh.rho.size and np.any(mesh.rho < 1.0 - 1e-14):
        raise ConditionViolatedError(
            "Gronwall bound requires non-decreasing steps (dt_{n-1} <= dt_n)"
        )
    thr = timestep_threshold(alpha, Lambda)
    dt_max = float(mesh.dt.max())
    if not dt_max < thr:
        raise ConditionViolatedError(
            f"maximum step {dt_max:.6g} violates the step restriction: "
            f"need dt < {thr:.6g} for Lambda = {Lambda:.6g}, alpha = {alpha:g}"
        )


def gronwall_bound(
    inp: GronwallInput, mesh: GradedTimeMesh, table: L1KernelTable
) -> np.ndarray:
    """Right-hand side of the discrete fractional Gronwall inequality:

        2 E_alpha(2*Lambda*t_n**alpha) * [ v0 + max_j sum_i P[j,i]*xi_i
            + sqrt(2 t_n**alpha) * max_j eta_j
            + max_j sqrt(sum_i P[j,i]*zeta_i**2) ]

    for n = 1..N.  Raises ConditionViolatedError when the mesh has
    decreasing steps or the maximum step breaks the admissibility bound.
    """
    alpha = table.alpha
    _check_admissible(mesh, alpha, inp.Lambda)
    N = mesh.N
    P = table.P[1:, 1:]  # rows n = 1..N, cols i = 1..N
    xi = np.asarray(inp.xi, dtype=float)
    eta = np.asarray(inp.eta, dtype=float)
    zeta = np.asarray(inp.zeta, dtype=float)
    if not (xi.shape == eta.shape == zeta.shape == (N,)):
        raise ValueError("xi, eta, zeta must have length N")
    t_pow = mesh.t[1:] ** alpha
    sum_xi = np.maximum.accumulate(P @ xi)
    sum_zeta = np.maximum.accumulate(np.sqrt(P @ zeta**2))
    eta_max = np.maximum.accumulate(eta)
    phi = inp.v0 + sum_xi + np.sqrt(2.0 * t_pow) * eta_max + sum_zeta
    return 2.0 * mittag_leffler(alpha, 2.0 * inp.Lambda * t_pow) * phi


def check_gronwall(
    inp: GronwallInput,
    v: np.ndarray,
    mesh: GradedTimeMesh,
    table: L1KernelTable,
) -> tuple[bool, float]:
    """Verify v_n <= bound_n for a sequence satisfying the Gronwall hypothesis.

    Returns (ok, max slack) where slack is max_n v_n / bound_n (0 when every
    bound is vacuous).  The caller is responsible for v actually satisfying
    the discrete inequality; this only checks the conclusion.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != mesh.N + 1:
        raise ValueError("v must hold levels 0..N")
    bounds = gronwall_bound(inp, mesh, table)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(bounds > 0.0, v[1:] / bounds, np.where(v[1:] > 0.0, np.inf, 0.0))
    slack = float(np.max(ratios)) if ratios.size else 0.0
    return bool(slack <= 1.0), slack


def solve_scalar_recurrence(
    inp: GronwallInput, mesh: GradedTimeMesh, table: L1KernelTable
) -> np.ndarray:
    """Forward-simulate the Gronwall hypothesis with equality at every level.

    Solves, for n = 1..N with v_0 = inp.v0,

        D^alpha (v_n)^2 = sum_{i=0..n} lam[n, n-i] * v_i^2
                          + v_n * xi_n + eta_n^2 + zeta_n^2

    for the non-negative root v_n.  Serves as the independent oracle for
    :func:`check_gronwall`: the returned sequence saturates the hypothesis,
    so it must stay below :func:`gronwall_bound`.
    """
    _check_admissible(mesh, table.alpha, inp.Lambda)
    N = mesh.N
    K = table.K
    v2 = np.zeros(N + 1)
    v = np.zeros(N + 1)
    v[0] = inp.v0
    v2[0] = inp.v0**2
    for n in range(1, N + 1):
        # telescoped history: D^alpha(v^2)_n = K[n,n]*v_n^2 - w @ v2[:n]
        w = np.empty(n)
        w[0] = K[n, 1]
        if n > 1:
            w[1:] = np.diff(K[n, 1 : n + 1])
        hist = w @ v2[:n]
        lam_n = inp.lam[n, : n + 1]           # lam[n, n-i] for i = n..0
        lags = lam_n[1:][::-1] @ v2[:n]       # i = 0..n-1 contributions
        a = K[n, n] - lam_n[0]
        if a <= 0.0:
            raise ConditionViolatedError(
                "instantaneous coefficient exceeds the kernel diagonal; "
                "input violates the admissibility assumptions"
            )
        c = hist + lags + inp.eta[n - 1] ** 2 + inp.zeta[n - 1] ** 2
        xi_n = inp.xi[n - 1]
        v[n] = (xi_n + math.sqrt(xi_n**2 + 4.0 * a * c)) / (2.0 * a)
        v2[n] = v[n] ** 2
    return v
