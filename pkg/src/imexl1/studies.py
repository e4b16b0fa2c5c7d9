"""Convergence-rate studies, property suites, and report objects."""

from __future__ import annotations

import math

import numpy as np

from .fractional import (
    GradedTimeMesh,
    GronwallInput,
    L1KernelTable,
    build_graded_mesh,
    build_kernel_table,
    mittag_leffler,
    timestep_threshold,
)

__all__ = ["random_gronwall_input"]


def random_gronwall_input(
    rng: np.random.Generator,
    max_N: int = 32,
) -> tuple[GronwallInput, GradedTimeMesh, L1KernelTable]:
    """Draw an admissible Gronwall instance (data, mesh, kernel tables).

    Lambda is capped so that both the step restriction holds on the drawn
    mesh and 2*Lambda*T**alpha stays inside the Mittag-Leffler range.
    """
    N = int(rng.integers(3, max_N + 1))
    alpha = float(rng.uniform(0.1, 0.9))
    gamma = float(rng.uniform(1.0, 4.0))
    T = float(rng.uniform(0.25, 2.0))
    mesh = build_graded_mesh(T, N, gamma)
    table = build_kernel_table(mesh, alpha)

    dt_max = float(mesh.dt.max())
    lam_step = 0.45 / (math.gamma(2.0 - alpha) * dt_max**alpha)  # 90% of Eq-threshold cap
    lam_ml = 0.5 * min(50.0, 600.0**alpha) / T**alpha            # keep E_alpha finite
    Lambda = float(rng.uniform(0.05, 1.0)) * min(lam_step, lam_ml)

    lam = np.zeros((N + 1, N + 1))
    for n in range(1, N + 1):
        row = rng.random(n + 1) * (rng.random(n + 1) < 0.6)
        s = row.sum()
        if s > 0.0:
            row *= rng.uniform(0.2, 1.0) * Lambda / s
        lam[n, : n + 1] = row

    scale = float(rng.uniform(0.1, 3.0))
    return (
        GronwallInput(
            v0=float(rng.uniform(0.0, 2.0)),
            xi=scale * rng.random(N),
            eta=scale * rng.random(N),
            zeta=scale * rng.random(N),
            lam=lam,
            Lambda=Lambda,
        ),
        mesh,
        table,
    )
