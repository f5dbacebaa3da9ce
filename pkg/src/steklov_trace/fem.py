"""Discrete bilinear forms on triangle meshes.

Scalar fields are continuous piecewise-linear (P1) vertex functions.  One-form
fields on planar meshes are lowest-order Whitney edge elements whose degree of
freedom on an edge ``(a, b)`` (stored with ``a < b``) is the circulation
``int_e w . t ds`` from ``a`` to ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.io import mmwrite

from .mesh import Mesh, MeshError

__all__ = [
    "DofMap",
    "DiscreteOperator",
    "EdgeForms",
    "vertex_dofs",
    "edge_dofs",
    "stiffness_scalar",
    "mass_boundary",
    "boundary_laplacian",
    "skew_boundary_form",
    "incidence_d0",
    "incidence_d1",
    "whitney_mass",
    "lumped_vertex_mass",
    "edge_forms_1form",
    "hodge_star_scalar_gradient",
    "broken_whitney_mass",
    "broken_inner",
    "to_broken",
    "export_matrix_market",
]


@dataclass(frozen=True)
class DofMap:
    """Bijection between mesh entities and degree-of-freedom indices.

    ``entities[k]`` is the mesh entity (vertex or edge id) owning DOF ``k``.
    ``boundary`` and ``interior`` partition the DOF indices.
    """

    kind: str  # "scalar-vertex" | "edge" | "boundary-vertex"
    entities: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray

    @property
    def size(self) -> int:
        return len(self.entities)


@dataclass(frozen=True)
class DiscreteOperator:
    matrix: sparse.csr_matrix
    tag: str
    dofs: DofMap

    def form(self, u, v=None) -> float:
        """Evaluate the bilinear form ``u^T A v`` (``v`` defaults to ``u``)."""
        u = np.asarray(u, dtype=float)
        v = u if v is None else np.asarray(v, dtype=float)
        return float(u @ (self.matrix @ v))

    def asymmetry(self) -> float:
        """Relative Frobenius norm of the antisymmetric part."""
        a = self.matrix
        den = sparse.linalg.norm(a)
        return 0.0 if den == 0 else float(sparse.linalg.norm(a - a.T) / den)


def vertex_dofs(mesh: Mesh) -> DofMap:
    return DofMap(
        "scalar-vertex", np.arange(mesh.n_vertices), mesh.boundary_vertices, mesh.interior_vertices
    )


def _boundary_vertex_dofs(mesh: Mesh) -> DofMap:
    nb = len(mesh.boundary_vertices)
    return DofMap("boundary-vertex", mesh.boundary_vertices, np.arange(nb), np.zeros(0, dtype=np.int64))


def _boundary_edge_ids(mesh: Mesh) -> np.ndarray:
    tri_edges, _ = mesh.triangle_edges
    counts = np.bincount(tri_edges.ravel(), minlength=len(mesh.edges))
    return np.flatnonzero(counts == 1)


def edge_dofs(mesh: Mesh) -> DofMap:
    bnd = _boundary_edge_ids(mesh)
    mask = np.ones(len(mesh.edges), dtype=bool)
    mask[bnd] = False
    return DofMap("edge", np.arange(len(mesh.edges)), bnd, np.flatnonzero(mask))


def _sym(a) -> sparse.csr_matrix:
    a = sparse.csr_matrix(a)
    a = 0.5 * (a + a.T)
    a.sum_duplicates()
    return a.tocsr()


def _p1_gradients(mesh: Mesh):
    """Per-triangle gradients of the three barycentric coordinates, (F, 3, d)."""
    v = mesh.vertices
    t = mesh.triangles
    p = v[t]  # (F, 3, d)
    e0 = p[:, 2] - p[:, 1]  # opposite vertex 0
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    if v.shape[1] == 2:
        area2 = e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0])
        rot = lambda e: np.column_stack([-e[:, 1], e[:, 0]])  # noqa: E731
        # grad lambda_i = rot90(opposite edge) / (2A), pointing into the triangle
        g = np.stack([rot(e0), rot(e1), rot(e2)], axis=1) / area2[:, None, None]
        return g, 0.5 * area2
    n = np.cross(e2, -e1)
    area2 = np.linalg.norm(n, axis=1)
    nhat = n / area2[:, None]
    g = np.stack([np.cross(nhat, e0), np.cross(nhat, e1), np.cross(nhat, e2)], axis=1)
    return g / area2[:, None, None], 0.5 * area2


def _assemble_local(t, local, n):
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def stiffness_scalar(mesh: Mesh) -> DiscreteOperator:
    """Cotangent-weight P1 stiffness ``int_M <du, dv> dV``."""
    g, area = _p1_gradients(mesh)
    if np.any(area <= 0):
        raise MeshError("degenerate triangle encountered in stiffness assembly")
    local = np.einsum("fid,fjd->fij", g, g) * area[:, None, None]
    k = _assemble_local(mesh.triangles, local, mesh.n_vertices)
    return DiscreteOperator(_sym(k), "stiffness", vertex_dofs(mesh))


def _segment_lengths(mesh: Mesh):
    be = mesh.boundary_edges
    return be, np.linalg.norm(mesh.vertices[be[:, 1]] - mesh.vertices[be[:, 0]], axis=1)


def mass_boundary(mesh: Mesh) -> DiscreteOperator:
    """Consistent P1 mass of the boundary curve, embedded in vertex indexing."""
    be, ell = _segment_lengths(mesh)
    n = mesh.n_vertices
    rows = np.concatenate([be[:, 0], be[:, 1], be[:, 0], be[:, 1]])
    cols = np.concatenate([be[:, 0], be[:, 1], be[:, 1], be[:, 0]])
    vals = np.concatenate([ell / 3, ell / 3, ell / 6, ell / 6])
    m = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n))
    return DiscreteOperator(_sym(m), "boundary-mass", vertex_dofs(mesh))


def _boundary_local(mesh: Mesh):
    bv = mesh.boundary_vertices
    pos = np.full(mesh.n_vertices, -1, dtype=np.int64)
    pos[bv] = np.arange(len(bv))
    be, ell = _segment_lengths(mesh)
    return pos[be[:, 0]], pos[be[:, 1]], ell, len(bv)


def boundary_laplacian(mesh: Mesh) -> tuple[DiscreteOperator, DiscreteOperator]:
    """1-D P1 stiffness and consistent mass on the boundary loops.

    Operators are indexed by boundary DOFs in loop order
    (``mesh.boundary_vertices``); they are block diagonal with one block per
    loop.
    """
    a, b, ell, nb = _boundary_local(mesh)
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    kv = np.concatenate([1 / ell, 1 / ell, -1 / ell, -1 / ell])
    mv = np.concatenate([ell / 3, ell / 3, ell / 6, ell / 6])
    dofs = _boundary_vertex_dofs(mesh)
    k = sparse.coo_matrix((kv, (rows, cols)), shape=(nb, nb))
    m = sparse.coo_matrix((mv, (rows, cols)), shape=(nb, nb))
    return (
        DiscreteOperator(_sym(k), "boundary-stiffness", dofs),
        DiscreteOperator(_sym(m), "boundary-mass", dofs),
    )


def skew_boundary_form(mesh: Mesh) -> sparse.csr_matrix:
    """Antisymmetric form ``C[j, k] = oint phi_j d(phi_k)/ds`` on boundary DOFs.

    Equals ``int_M <grad phi_j, R grad phi_k>`` restricted to boundary
    vertices, R the rotation by +90 degrees (all interior rows vanish).
    """
    a, b, _, nb = _boundary_local(mesh)
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([b, a, a, b])
    vals = np.concatenate([np.full(len(a), 0.5), np.full(len(a), -0.5), np.full(len(a), -0.5), np.full(len(a), 0.5)])
    c = sparse.coo_matrix((vals, (rows, cols)), shape=(nb, nb)).tocsr()
    c.sum_duplicates()
    c.eliminate_zeros()
    return c


# ---------------------------------------------------------------------------
# edge elements


def incidence_d0(mesh: Mesh) -> sparse.csr_matrix:
    """Vertex-to-edge coboundary, ``(d0 u)_e = u_b - u_a``."""
    e = mesh.edges
    ne = len(e)
    rows = np.repeat(np.arange(ne), 2)
    cols = e.ravel()
    vals = np.tile([-1.0, 1.0], ne)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(ne, mesh.n_vertices))


def incidence_d1(mesh: Mesh) -> sparse.csr_matrix:
    """Edge-to-triangle coboundary (circulation around each positive triangle)."""
    tri_edges, signs = mesh.triangle_edges
    nf = mesh.n_triangles
    rows = np.repeat(np.arange(nf), 3)
    return sparse.csr_matrix(
        (signs.ravel().astype(float), (rows, tri_edges.ravel())), shape=(nf, len(mesh.edges))
    )


def _local_whitney_mass(mesh: Mesh) -> np.ndarray:
    """(F, 3, 3) local Whitney mass for local edges (01, 12, 20) oriented by
    the triangle traversal."""
    g, area = _p1_gradients(mesh)
    gg = np.einsum("fid,fjd->fij", g, g)
    pairs = ((0, 1), (1, 2), (2, 0))
    # int lambda_i lambda_k = A (1 + delta_ik) / 12
    lam = lambda i, k: area * (1.0 + (i == k)) / 12.0  # noqa: E731
    out = np.empty((mesh.n_triangles, 3, 3))
    for p, (i, j) in enumerate(pairs):
        for q, (k, l) in enumerate(pairs):
            out[:, p, q] = (
                lam(i, k) * gg[:, j, l]
                - lam(i, l) * gg[:, j, k]
                - lam(j, k) * gg[:, i, l]
                + lam(j, l) * gg[:, i, k]
            )
    return out


def broken_whitney_mass(mesh: Mesh) -> np.ndarray:
    """Per-triangle Whitney mass in the triangle-traversal orientation."""
    return _local_whitney_mass(mesh)


def whitney_mass(mesh: Mesh) -> sparse.csr_matrix:
    local = _local_whitney_mass(mesh)
    tri_edges, signs = mesh.triangle_edges
    local = local * signs[:, :, None] * signs[:, None, :]
    m = _assemble_local(tri_edges, local, len(mesh.edges))
    return _sym(m)


def lumped_vertex_mass(mesh: Mesh) -> np.ndarray:
    """Barycentric lumped P1 mass (diagonal)."""
    return np.bincount(
        mesh.triangles.ravel(), weights=np.repeat(mesh.triangle_areas / 3.0, 3), minlength=mesh.n_vertices
    )


@dataclass(frozen=True)
class EdgeForms:
    """The quadratic forms of the 1-form problem on a planar mesh.

    Iterating yields ``(d_form, coderivative_form, tangential_boundary_mass,
    normal_trace_constraint)``.
    """

    d_form: DiscreteOperator
    coderivative_form: DiscreteOperator
    tangential_boundary_mass: DiscreteOperator
    normal_trace_constraint: DiscreteOperator
    boundary_codifferential: DiscreteOperator

    def __iter__(self):
        yield self.d_form
        yield self.coderivative_form
        yield self.tangential_boundary_mass
        yield self.normal_trace_constraint

    def energy(self, natural: bool = True) -> sparse.csr_matrix:
        """Full 1-form energy ``(dw, dw) + (delta_h w, delta_h w)``.

        With ``natural=True`` the weak codifferential is tested against every
        vertex hat function, which carries the condition ``i_nu w = 0`` as a
        natural boundary condition of the mixed formulation.
        """
        e = self.d_form.matrix + self.coderivative_form.matrix
        if natural:
            e = e + self.boundary_codifferential.matrix
        return _sym(e)


def edge_forms_1form(mesh: Mesh) -> EdgeForms:
    """Whitney 1-form assembly on a planar mesh."""
    if not mesh.is_planar:
        raise MeshError("edge-element 1-form assembly requires a planar mesh")
    d0 = incidence_d0(mesh)
    d1 = incidence_d1(mesh)
    m1 = whitney_mass(mesh)
    m0 = lumped_vertex_mass(mesh)
    edofs = edge_dofs(mesh)
    dform = _sym(d1.T @ sparse.diags(1.0 / mesh.triangle_areas) @ d1)
    weak_div = (d0.T @ m1).tocsr()  # (V, E): rows are int <w, grad phi_j>
    inner = mesh.interior_vertices
    bnd = mesh.boundary_vertices
    wi = weak_div[inner]
    wb = weak_div[bnd]
    codiff = _sym(wi.T @ sparse.diags(1.0 / m0[inner]) @ wi)
    bcodiff = _sym(wb.T @ sparse.diags(1.0 / m0[bnd]) @ wb)
    be = _boundary_edge_ids(mesh)
    ell = np.linalg.norm(mesh.vertices[mesh.edges[be, 1]] - mesh.vertices[mesh.edges[be, 0]], axis=1)
    ne = len(mesh.edges)
    tmass = sparse.csr_matrix((1.0 / ell, (be, be)), shape=(ne, ne))
    bdofs = _boundary_vertex_dofs(mesh)
    constraint = DiscreteOperator(wb, "trace-form", bdofs)
    return EdgeForms(
        DiscreteOperator(dform, "edge-stiffness", edofs),
        DiscreteOperator(codiff, "edge-coderivative-form", edofs),
        DiscreteOperator(tmass, "boundary-mass", edofs),
        constraint,
        DiscreteOperator(bcodiff, "edge-coderivative-form", edofs),
    )


def hodge_star_scalar_gradient(mesh: Mesh, u) -> np.ndarray:
    """``*du`` as broken edge data.

    Returns an ``(F, 3)`` array: for each triangle the circulations of the
    rotated constant gradient ``R grad u`` along its local edges
    ``(v0 v1, v1 v2, v2 v0)``.  Lowest-order Whitney fields reproduce constant
    fields exactly on each triangle, so the representation is lossless.
    """
    u = np.asarray(u, dtype=float)
    g, _ = _p1_gradients(mesh)
    grad = np.einsum("fid,fi->fd", g, u[mesh.triangles])
    if mesh.is_planar:
        rot = np.column_stack([-grad[:, 1], grad[:, 0]])
    else:
        p = mesh.vertices[mesh.triangles]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        rot = np.cross(n / np.linalg.norm(n, axis=1, keepdims=True), grad)
    return _constant_to_broken(mesh, rot)


def _constant_to_broken(mesh: Mesh, field) -> np.ndarray:
    p = mesh.vertices[mesh.triangles]
    edges = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
    return np.einsum("fkd,fd->fk", edges, field)


def to_broken(mesh: Mesh, w) -> np.ndarray:
    """Restrict global edge DOFs to per-triangle traversal-oriented DOFs."""
    tri_edges, signs = mesh.triangle_edges
    return np.asarray(w, dtype=float)[tri_edges] * signs


def broken_inner(mesh: Mesh, a, b, local_mass=None) -> float:
    """L2 inner product of two broken Whitney fields given as (F, 3) arrays."""
    m = broken_whitney_mass(mesh) if local_mass is None else local_mass
    return float(np.einsum("fi,fij,fj->", a, m, b))


def export_matrix_market(op: DiscreteOperator, path) -> Path:
    """Write ``op`` as a Matrix Market coordinate file (real, general).

    The comment line records the operator tag and DOF kind.
    """
    path = Path(path)
    mmwrite(str(path), sparse.coo_matrix(op.matrix), comment=f"tag={op.tag} dofs={op.dofs.kind}", precision=17)
    return path
