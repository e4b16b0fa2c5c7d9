"""P1 finite element spaces on intervals and structured triangulations.

Conventions for coefficient callables, with ``x`` holding quadrature points:

- 1D: ``A(x, t) -> (n,)``, ``b(x, t) -> (n,)``, ``c/f(x, t) -> (n,)`` with
  ``x`` of shape (n,);
- 2D: ``A(x, t) -> (n, 2, 2)``, ``b(x, t) -> (n, 2)``, ``c/f(x, t) -> (n,)``
  with ``x`` of shape (n, 2).

Variable-coefficient forms use a 3-point Gauss rule per interval and the
3-point mid-edge (degree 2) rule per triangle; load vectors and error norms
against exact solutions use degree-5 rules so quadrature error stays below
discretization error for smooth data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linalg import SparseMatrix, assemble_from_triplets, solve

__all__ = [
    "SpatialMesh",
    "FeSpace",
    "CoefficientSet",
    "QuadratureRule",
    "CoefficientError",
    "build_interval_mesh",
    "build_unit_square_mesh",
    "build_fe_space",
    "interval_rule",
    "triangle_rule",
    "assemble_mass",
    "assemble_a0",
    "assemble_a1",
    "assemble_load",
    "interpolate",
    "l2_project",
    "ritz_project",
    "fe_norm",
    "error_norm",
    "fe_eval",
    "fe_grad_eval",
    "poincare_constant",
    "export_mesh_tables",
]


class CoefficientError(ValueError):
    """Sampled coefficient field violates symmetry or positive-definiteness."""


@dataclass(frozen=True)
class SpatialMesh:
    """Nodes, element connectivity, and boundary flags (dim 1 or 2)."""

    dim: int
    nodes: np.ndarray      # (n_nodes,) in 1D, (n_nodes, 2) in 2D
    elements: np.ndarray   # (n_elem, dim+1) int
    boundary: np.ndarray   # (n_nodes,) bool

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]


@dataclass(frozen=True)
class FeSpace:
    """P1 space over a mesh; interior dofs are the unflagged nodes."""

    mesh: SpatialMesh
    n_dofs: int
    interior: np.ndarray
    h: float


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-element points and positive weights, exact to ``degree``."""

    points: np.ndarray
    weights: np.ndarray
    degree: int


@dataclass(frozen=True)
class CoefficientSet:
    """Space-time coefficient fields of the operator and source.

    ``b`` and ``c`` may be None (treated as zero); ``lam`` scales the
    nonlocal integral term.
    """

    A: Callable
    b: Optional[Callable] = None
    c: Optional[Callable] = None
    f: Optional[Callable] = None
    lam: float = 0.0


# ----------------------------------------------------------------- meshes

def build_interval_mesh(a: float, b: float, M: int) -> SpatialMesh:
    """Uniform mesh of (a, b) with M elements; endpoints are boundary."""
    if not a < b:
        raise ValueError(f"need a < b, got ({a}, {b})")
    if M < 2 or int(M) != M:
        raise ValueError(f"element count must be an integer >= 2, got {M}")
    M = int(M)
    nodes = np.linspace(a, b, M + 1)
    elements = np.column_stack([np.arange(M), np.arange(1, M + 1)])
    boundary = np.zeros(M + 1, dtype=bool)
    boundary[[0, -1]] = True
    return SpatialMesh(dim=1, nodes=nodes, elements=elements, boundary=boundary)


def build_unit_square_mesh(M: int) -> SpatialMesh:
    """Structured triangulation of (0,1)^2: each of the M*M cells is split
    along the diagonal from its lower-left to upper-right corner."""
    if M < 2 or int(M) != M:
        raise ValueError(f"cells per side must be an integer >= 2, got {M}")
    M = int(M)
    side = np.linspace(0.0, 1.0, M + 1)
    X, Y = np.meshgrid(side, side, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (M + 1) + j

    elems = []
    for i in range(M):
        for j in range(M):
            p00, p10 = nid(i, j), nid(i + 1, j)
            p01, p11 = nid(i, j + 1), nid(i + 1, j + 1)
            elems.append((p00, p10, p11))
            elems.append((p00, p11, p01))
    elements = np.asarray(elems, dtype=int)
    boundary = (
        (nodes[:, 0] == 0.0) | (nodes[:, 0] == 1.0)
        | (nodes[:, 1] == 0.0) | (nodes[:, 1] == 1.0)
    )
    return SpatialMesh(dim=2, nodes=nodes, elements=elements, boundary=boundary)


def build_fe_space(mesh: SpatialMesh) -> FeSpace:
    interior = np.flatnonzero(~mesh.boundary)
    if mesh.dim == 1:
        h = float(np.max(np.diff(mesh.nodes)))
    else:
        coords = mesh.nodes[mesh.elements]
        edges = np.stack(
            [coords[:, 1] - coords[:, 0], coords[:, 2] - coords[:, 1], coords[:, 0] - coords[:, 2]]
        )
        h = float(np.max(np.linalg.norm(edges, axis=2)))
    return FeSpace(mesh=mesh, n_dofs=mesh.n_nodes, interior=interior, h=h)


def export_mesh_tables(mesh: SpatialMesh, prefix: str) -> tuple[str, str]:
    """Dump plain-text node and element tables (debugging aid)."""
    nodes_path = f"{prefix}.nodes.txt"
    elems_path = f"{prefix}.elems.txt"
    coords = np.atleast_2d(mesh.nodes.T).T
    with open(nodes_path, "w", encoding="utf-8") as fh:
        fh.write("# node  coords...  boundary\n")
        for i in range(mesh.n_nodes):
            xy = " ".join(f"{c:.17g}" for c in np.atleast_1d(coords[i]))
            fh.write(f"{i} {xy} {int(mesh.boundary[i])}\n")
    with open(elems_path, "w", encoding="utf-8") as fh:
        fh.write("# element  node ids...\n")
        for e, conn in enumerate(mesh.elements):
            fh.write(f"{e} " + " ".join(str(v) for v in conn) + "\n")
    return nodes_path, elems_path


def poincare_constant(mesh: SpatialMesh) -> float:
    """Dirichlet Poincare constant ||phi|| <= C ||grad phi||.

    Exact for the interval (L/pi) and the unit square (1/(sqrt(2) pi));
    the generic convex fallback is diam/pi.
    """
    if mesh.dim == 1:
        return (float(mesh.nodes[-1] - mesh.nodes[0])) / math.pi
    span = mesh.nodes.max(axis=0) - mesh.nodes.min(axis=0)
    if np.allclose(span, 1.0) and mesh.nodes.min() >= 0.0:
        return 1.0 / (math.sqrt(2.0) * math.pi)
    return float(np.linalg.norm(span)) / math.pi


# ----------------------------------------------------------------- quadrature

def interval_rule(degree: int = 5) -> QuadratureRule:
    """Gauss-Legendre on [0,1]; 3 points (degree 5) cover all uses here."""
    if degree <= 5:
        s = math.sqrt(0.6)
        pts = np.array([(1.0 - s) / 2.0, 0.5, (1.0 + s) / 2.0])
        wts = np.array([5.0, 8.0, 5.0]) / 18.0
        return QuadratureRule(points=pts, weights=wts, degree=5)
    x, w = np.polynomial.legendre.leggauss((degree + 2) // 2)
    return QuadratureRule(points=(x + 1.0) / 2.0, weights=w / 2.0, degree=degree)


def triangle_rule(degree: int) -> QuadratureRule:
    """Reference-triangle rules: mid-edge (degree 2) and 7-point (degree 5).

    Weights include the reference area 1/2.
    """
    if degree <= 2:
        pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        wts = np.full(3, 1.0 / 6.0)
        return QuadratureRule(points=pts, weights=wts, degree=2)
    if degree <= 5:
        s15 = math.sqrt(15.0)
        r1 = (6.0 - s15) / 21.0
        r2 = (6.0 + s15) / 21.0
        w1 = (155.0 - s15) / 1200.0 / 2.0
        w2 = (155.0 + s15) / 1200.0 / 2.0
        pts = np.array(
            [
                [1.0 / 3.0, 1.0 / 3.0],
                [r1, r1], [r1, 1.0 - 2.0 * r1], [1.0 - 2.0 * r1, r1],
                [r2, r2], [r2, 1.0 - 2.0 * r2], [1.0 - 2.0 * r2, r2],
            ]
        )
        wts = np.array([9.0 / 40.0 / 2.0, w1, w1, w1, w2, w2, w2])
        return QuadratureRule(points=pts, weights=wts, degree=5)
    raise ValueError(f"no triangle rule of degree {degree}")


_REF_GRAD_TRI = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _tri_basis(pts: np.ndarray) -> np.ndarray:
    """P1 basis values at reference points: (n_q, 3)."""
    xi, eta = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


def _interval_basis(pts: np.ndarray) -> np.ndarray:
    return np.column_stack([1.0 - pts, pts])


# ----------------------------------------------------------------- assembly

def _geometry_1d(mesh: SpatialMesh):
    x0 = mesh.nodes[mesh.elements[:, 0]]
    hs = mesh.nodes[mesh.elements[:, 1]] - x0
    return x0, hs


def _geometry_2d(mesh: SpatialMesh):
    coords = mesh.nodes[mesh.elements]           # (ne, 3, 2)
    v0 = coords[:, 0]
    J = np.stack([coords[:, 1] - v0, coords[:, 2] - v0], axis=2)  # columns = edges
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    if np.any(det <= 0.0):
        raise ValueError("triangulation contains degenerate or inverted elements")
    inv = np.empty_like(J)
    inv[:, 0, 0] = J[:, 1, 1]
    inv[:, 0, 1] = -J[:, 0, 1]
    inv[:, 1, 0] = -J[:, 1, 0]
    inv[:, 1, 1] = J[:, 0, 0]
    inv /= det[:, None, None]
    # physical gradients: grad phi_a = J^{-T} refgrad_a
    grads = np.einsum("ak,ekd->ead", _REF_GRAD_TRI, inv)
    return v0, J, det, grads


def _scatter(space: FeSpace, local: np.ndarray) -> SparseMatrix:
    """Accumulate (ne, nl, nl) local blocks into the global matrix."""
    conn = space.mesh.elements
    nl = conn.shape[1]
    rows = np.repeat(conn, nl, axis=1).ravel()
    cols = np.tile(conn, (1, nl)).ravel()
    return assemble_from_triplets((rows, cols, local.ravel()), shape=(space.n_dofs, space.n_dofs))


def _eval_zero(shape):
    return np.zeros(shape)


def assemble_mass(space: FeSpace) -> SparseMatrix:
    """Mass matrix (phi_j, phi_i); symmetric positive definite."""
    mesh = space.mesh
    if mesh.dim == 1:
        rule = interval_rule()
        phi = _interval_basis(rule.points)       # (nq, 2)
        _, hs = _geometry_1d(mesh)
        ref = np.einsum("q,qa,qb->ab", rule.weights, phi, phi)
        local = hs[:, None, None] * ref[None]
        return _scatter(space, local)
    rule = triangle_rule(2)
    phi = _tri_basis(rule.points)
    _, _, det, _ = _geometry_2d(mesh)
    ref = np.einsum("q,qa,qb->ab", rule.weights, phi, phi)
    local = det[:, None, None] * ref[None]
    return _scatter(space, local)


def _sample_A(coeffs: CoefficientSet, x: np.ndarray, t: float, dim: int) -> np.ndarray:
    A = np.asarray(coeffs.A(x, t), dtype=float)
    if dim == 1:
        if np.any(A <= 0.0):
            raise CoefficientError("diffusion coefficient must be positive at sample points")
        return A
    scale = float(np.max(np.abs(A))) or 1.0
    if np.max(np.abs(A[:, 0, 1] - A[:, 1, 0])) > 1e-12 * scale:
        raise CoefficientError("diffusion matrix must be symmetric at sample points")
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    if np.any(A[:, 0, 0] <= 0.0) or np.any(det <= 0.0):
        raise CoefficientError("diffusion matrix must be positive definite at sample points")
    return A


def assemble_a0(space: FeSpace, coeffs: CoefficientSet, t: float) -> SparseMatrix:
    """Diffusion form (A(.,t) grad phi_j, grad phi_i)."""
    mesh = space.mesh
    if mesh.dim == 1:
        rule = interval_rule()
        x0, hs = _geometry_1d(mesh)
        local = np.zeros((mesh.n_elements, 2, 2))
        dphi = np.array([-1.0, 1.0])
        gg = np.outer(dphi, dphi)               # (2, 2)
        for q, (xi, w) in enumerate(zip(rule.points, rule.weights)):
            xq = x0 + hs * xi
            Aq = _sample_A(coeffs, xq, t, 1)
            local += (w * Aq / hs)[:, None, None] * gg[None]
        return _scatter(space, local)
    rule = triangle_rule(2)
    v0, J, det, grads = _geometry_2d(mesh)
    local = np.zeros((mesh.n_elements, 3, 3))
    for q in range(rule.points.shape[0]):
        xq = v0 + np.einsum("eij,j->ei", J, rule.points[q])
        Aq = _sample_A(coeffs, xq, t, 2)
        local += rule.weights[q] * det[:, None, None] * np.einsum(
            "eik,ekl,ejl->eij", grads, Aq, grads
        )
    return _scatter(space, local)


def assemble_a1(space: FeSpace, coeffs: CoefficientSet, t: float) -> SparseMatrix:
    """Convection-reaction form (b . grad phi_j + c phi_j, phi_i)."""
    mesh = space.mesh
    ne = mesh.n_elements
    if mesh.dim == 1:
        rule = interval_rule()
        phi = _interval_basis(rule.points)
        x0, hs = _geometry_1d(mesh)
        dphi = np.array([-1.0, 1.0])
        local = np.zeros((ne, 2, 2))
        for q, (xi, w) in enumerate(zip(rule.points, rule.weights)):
            xq = x0 + hs * xi
            bq = coeffs.b(xq, t) if coeffs.b is not None else _eval_zero(ne)
            cq = coeffs.c(xq, t) if coeffs.c is not None else _eval_zero(ne)
            conv = np.einsum("e,a,b->eab", w * np.asarray(bq, float), phi[q], dphi)
            reac = np.einsum("e,a,b->eab", w * np.asarray(cq, float) * hs, phi[q], phi[q])
            local += conv + reac
        return _scatter(space, local)
    rule = triangle_rule(2)
    phi = _tri_basis(rule.points)
    v0, J, det, grads = _geometry_2d(mesh)
    local = np.zeros((ne, 3, 3))
    for q in range(rule.points.shape[0]):
        xq = v0 + np.einsum("eij,j->ei", J, rule.points[q])
        bq = coeffs.b(xq, t) if coeffs.b is not None else _eval_zero((ne, 2))
        cq = coeffs.c(xq, t) if coeffs.c is not None else _eval_zero(ne)
        conv = np.einsum("e,a,ejd,ed->eaj", rule.weights[q] * det, phi[q], grads, np.asarray(bq, float))
        reac = np.einsum("e,a,b->eab", rule.weights[q] * det * np.asarray(cq, float), phi[q], phi[q])
        local += conv + reac
    return _scatter(space, local)


def assemble_load(space: FeSpace, f: Callable, t: float, degree: int = 5) -> np.ndarray:
    """Load vector F_i = integral f(x, t) phi_i(x) dx by quadrature.

    1D loads use a 5-point Gauss rule (degree 9); triangles use the 7-point
    degree-5 rule.
    """
    mesh = space.mesh
    F = np.zeros(space.n_dofs)
    if mesh.dim == 1:
        rule = interval_rule(max(degree, 9))
        phi = _interval_basis(rule.points)
        x0, hs = _geometry_1d(mesh)
        for q, (xi, w) in enumerate(zip(rule.points, rule.weights)):
            xq = x0 + hs * xi
            fq = np.asarray(f(xq, t), dtype=float)
            np.add.at(F, mesh.elements[:, 0], w * hs * fq * phi[q, 0])
            np.add.at(F, mesh.elements[:, 1], w * hs * fq * phi[q, 1])
        return F
    rule = triangle_rule(degree)
    phi = _tri_basis(rule.points)
    v0, J, det, _ = _geometry_2d(mesh)
    for q in range(rule.points.shape[0]):
        xq = v0 + np.einsum("eij,j->ei", J, rule.points[q])
        fq = np.asarray(f(xq, t), dtype=float)
        contrib = rule.weights[q] * det * fq
        for a in range(3):
            np.add.at(F, mesh.elements[:, a], contrib * phi[q, a])
    return F


# ----------------------------------------------------------------- projections

def interpolate(space: FeSpace, func: Callable, t: float = 0.0) -> np.ndarray:
    """Nodal interpolant of func(., t)."""
    return np.asarray(func(space.mesh.nodes, t), dtype=float)


def _interior_solve(space: FeSpace, S: SparseMatrix, rhs: np.ndarray, hint: str) -> np.ndarray:
    idx = space.interior
    sub = S.submatrix(idx, idx)
    x = np.zeros(space.n_dofs)
    x[idx] = solve(sub, rhs[idx], hint)
    return x


def l2_project(space: FeSpace, func: Callable, t: float = 0.0) -> np.ndarray:
    """L2 projection onto the zero-boundary P1 space (M x = load)."""
    M = assemble_mass(space)
    rhs = assemble_load(space, func, t, degree=5)
    hint = "banded" if space.mesh.dim == 1 else "spd"
    return _interior_solve(space, M, rhs, hint)


def ritz_project(
    space: FeSpace,
    u: Callable,
    grad_u: Callable,
    coeffs: CoefficientSet,
    t: float = 0.0,
) -> np.ndarray:
    """Elliptic projection: a0(t; R_h u, psi) = a0(t; u, psi) for interior psi.

    ``grad_u(x, t)`` must return the gradient of the target ((n,) in 1D,
    (n, 2) in 2D).  Boundary dofs are set to zero.
    """
    mesh = space.mesh
    S0 = assemble_a0(space, coeffs, t)
    rhs = np.zeros(space.n_dofs)
    if mesh.dim == 1:
        rule = interval_rule(5)
        x0, hs = _geometry_1d(mesh)
        dphi = np.array([-1.0, 1.0])
        for xi, w in zip(rule.points, rule.weights):
            xq = x0 + hs * xi
            Aq = _sample_A(coeffs, xq, t, 1)
            gu = np.asarray(grad_u(xq, t), dtype=float)
            for a in range(2):
                np.add.at(rhs, mesh.elements[:, a], w * Aq * gu * dphi[a])
        return _interior_solve(space, S0, rhs, "banded")
    rule = triangle_rule(5)
    v0, J, det, grads = _geometry_2d(mesh)
    for q in range(rule.points.shape[0]):
        xq = v0 + np.einsum("eij,j->ei", J, rule.points[q])
        Aq = _sample_A(coeffs, xq, t, 2)
        gu = np.asarray(grad_u(xq, t), dtype=float)
        flux = np.einsum("ekl,el->ek", Aq, gu)
        for a in range(3):
            np.add.at(
                rhs,
                mesh.elements[:, a],
                rule.weights[q] * det * np.einsum("ek,ek->e", flux, grads[:, a]),
            )
    return _interior_solve(space, S0, rhs, "spd")


# ----------------------------------------------------------------- evaluation

def _locate_1d(mesh: SpatialMesh, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = np.clip(np.searchsorted(mesh.nodes, x, side="right") - 1, 0, mesh.n_nodes - 2)
    x0 = mesh.nodes[idx]
    hs = mesh.nodes[idx + 1] - x0
    return idx, (x - x0) / hs


def _locate_square(mesh: SpatialMesh, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Element index and barycentric-style local coords on the structured
    unit-square triangulation produced by :func:`build_unit_square_mesh`."""
    M = int(round(math.sqrt(mesh.n_nodes))) - 1
    if (M + 1) ** 2 != mesh.n_nodes or mesh.n_elements != 2 * M * M:
        raise ValueError("point location requires the structured unit-square mesh")
    h = 1.0 / M
    i = np.clip((pts[:, 0] // h).astype(int), 0, M - 1)
    j = np.clip((pts[:, 1] // h).astype(int), 0, M - 1)
    xi = pts[:, 0] / h - i
    eta = pts[:, 1] / h - j
    lower = xi >= eta  # triangle (p00, p10, p11); else (p00, p11, p01)
    elem = 2 * (i * M + j) + np.where(lower, 0, 1)
    loc = np.empty((pts.shape[0], 2))
    loc[lower, 0] = xi[lower] - eta[lower]
    loc[lower, 1] = eta[lower]
    loc[~lower, 0] = xi[~lower]
    loc[~lower, 1] = eta[~lower] - xi[~lower]
    return elem, loc


def fe_eval(space: FeSpace, coef: np.ndarray, pts) -> np.ndarray:
    """Evaluate the FE function at arbitrary points of the domain."""
    mesh = space.mesh
    coef = np.asarray(coef, dtype=float)
    if mesh.dim == 1:
        x = np.atleast_1d(np.asarray(pts, dtype=float))
        idx, xi = _locate_1d(mesh, x)
        left = mesh.elements[idx, 0]
        right = mesh.elements[idx, 1]
        return coef[left] * (1.0 - xi) + coef[right] * xi
    p = np.atleast_2d(np.asarray(pts, dtype=float))
    elem, loc = _locate_square(mesh, p)
    conn = mesh.elements[elem]
    lam = np.column_stack([1.0 - loc[:, 0] - loc[:, 1], loc[:, 0], loc[:, 1]])
    return np.einsum("pa,pa->p", coef[conn], lam)


def fe_grad_eval(space: FeSpace, coef: np.ndarray, pts) -> np.ndarray:
    """Piecewise-constant gradient of the FE function at arbitrary points."""
    mesh = space.mesh
    coef = np.asarray(coef, dtype=float)
    if mesh.dim == 1:
        x = np.atleast_1d(np.asarray(pts, dtype=float))
        idx, _ = _locate_1d(mesh, x)
        x0, hs = _geometry_1d(mesh)
        return (coef[mesh.elements[idx, 1]] - coef[mesh.elements[idx, 0]]) / hs[idx]
    p = np.atleast_2d(np.asarray(pts, dtype=float))
    elem, _ = _locate_square(mesh, p)
    _, _, _, grads = _geometry_2d(mesh)
    return np.einsum("pa,pad->pd", coef[mesh.elements[elem]], grads[elem])


# ----------------------------------------------------------------- norms

def _norm_kind(kind: str) -> str:
    k = kind.lower()
    if k not in ("l2", "h1", "linf"):
        raise ValueError(f"unknown norm kind {kind!r}")
    return k


def fe_norm(space: FeSpace, coef: np.ndarray, kind: str) -> float:
    """Norm of the FE function with the given coefficients.

    L2/H1 by element quadrature (H1 includes the L2 part); Linf is the max
    over quadrature and nodal points.
    """
    return error_norm(space, coef, None, None, 0.0, kind)


def error_norm(
    space: FeSpace,
    coef: np.ndarray,
    exact: Optional[Callable],
    exact_grad: Optional[Callable],
    t: float,
    kind: str,
) -> float:
    """Norm of u_h - u(., t) by degree-5 quadrature (u may be None for ||u_h||)."""
    k = _norm_kind(kind)
    mesh = space.mesh
    coef = np.asarray(coef, dtype=float)
    conn = mesh.elements
    if mesh.dim == 1:
        rule = interval_rule(5)
        phi = _interval_basis(rule.points)
        x0, hs = _geometry_1d(mesh)
        uh_grad = (coef[conn[:, 1]] - coef[conn[:, 0]]) / hs
        acc_l2 = 0.0
        acc_h1 = 0.0
        linf = 0.0
        for q, (xi, w) in enumerate(zip(rule.points, rule.weights)):
            xq = x0 + hs * xi
            uh = coef[conn[:, 0]] * phi[q, 0] + coef[conn[:, 1]] * phi[q, 1]
            diff = uh - (np.asarray(exact(xq, t), float) if exact is not None else 0.0)
            acc_l2 += np.sum(w * hs * diff**2)
            if k == "h1":
                gdiff = uh_grad - (
                    np.asarray(exact_grad(xq, t), float) if exact_grad is not None else 0.0
                )
                acc_h1 += np.sum(w * hs * gdiff**2)
            linf = max(linf, float(np.max(np.abs(diff))) if diff.size else 0.0)
        nodal = coef - (np.asarray(exact(mesh.nodes, t), float) if exact is not None else 0.0)
        linf = max(linf, float(np.max(np.abs(nodal))))
    else:
        rule = triangle_rule(5)
        phi = _tri_basis(rule.points)
        v0, J, det, grads = _geometry_2d(mesh)
        uh_grad = np.einsum("ea,ead->ed", coef[conn], grads)
        acc_l2 = 0.0
        acc_h1 = 0.0
        linf = 0.0
        for q in range(rule.points.shape[0]):
            xq = v0 + np.einsum("eij,j->ei", J, rule.points[q])
            uh = coef[conn] @ phi[q]
            diff = uh - (np.asarray(exact(xq, t), float) if exact is not None else 0.0)
            acc_l2 += np.sum(rule.weights[q] * det * diff**2)
            if k == "h1":
                gdiff = uh_grad - (
                    np.asarray(exact_grad(xq, t), float) if exact_grad is not None else 0.0
                )
                acc_h1 += np.sum(rule.weights[q] * det * np.sum(gdiff**2, axis=1))
            linf = max(linf, float(np.max(np.abs(diff))) if diff.size else 0.0)
        nodal = coef - (np.asarray(exact(mesh.nodes, t), float) if exact is not None else 0.0)
        linf = max(linf, float(np.max(np.abs(nodal))))
    if k == "l2":
        return math.sqrt(acc_l2)
    if k == "h1":
        return math.sqrt(acc_l2 + acc_h1)
    return linf
