"""Harmonic extension, harmonic Neumann fields, conjugate harmonic functions,
and the replay of the test-subspace constructions behind the inverse-trace
bounds (functions on planar / genus-0 meshes).

Everything the constructions need lives on boundary traces:

* ``S``  - Dirichlet-to-Neumann matrix (energy of the harmonic extension),
* ``Mb`` - boundary mass, ``Kb`` - boundary stiffness,
* ``C``  - skew form ``oint phi_j dphi_k/ds``.

The least-squares conjugate of a discrete harmonic ``u`` has trace
``v = -S^+ C u``.  That map is exactly skew-adjoint for the energy but only
approximately an isometry; :class:`ConjugationMap` replaces it by its
orthogonal polar factor, which is an exact complex structure on the traces
with zero flux through every hole.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from . import fem, spectra
from .mesh import Mesh, MeshError, topology

__all__ = [
    "PeriodObstructionError",
    "SubspaceError",
    "HarmonicFieldBasis",
    "ConjugatePair",
    "ConjugationMap",
    "ProofSubspace",
    "MatrixAResult",
    "SplitMatrices",
    "harmonic_extension",
    "harmonic_neumann_fields",
    "conjugate_harmonic",
    "conjugation_map",
    "build_proof_subspace",
    "matrix_A",
    "split_subspace_matrices",
    "dump_subspace_json",
]

RANK_TOL = 1e-10
MINMAX_REL = 1e-6


class PeriodObstructionError(ValueError):
    """``*du`` is not orthogonal to the harmonic Neumann fields."""


class SubspaceError(RuntimeError):
    """A constraint system admitted only the zero solution."""


# ---------------------------------------------------------------------------
# boundary calculus cache


@dataclass(frozen=True, eq=False)
class _Boundary:
    mesh: Mesh
    K: sparse.csr_matrix
    S: np.ndarray
    Mb: np.ndarray
    Kb: np.ndarray
    C: np.ndarray
    loop_slices: tuple


@lru_cache(maxsize=8)
def _boundary(mesh: Mesh) -> _Boundary:
    op = fem.stiffness_scalar(mesh)
    k = op.matrix
    s = spectra.dirichlet_to_neumann(mesh, op)
    kb, mb = fem.boundary_laplacian(mesh)
    c = fem.skew_boundary_form(mesh).toarray()
    slices = []
    start = 0
    for loop in mesh.boundary_loops:
        slices.append(slice(start, start + len(loop)))
        start += len(loop)
    return _Boundary(mesh, k, s, mb.matrix.toarray(), kb.matrix.toarray(), c, tuple(slices))


@lru_cache(maxsize=8)
def _interior_solver(mesh: Mesh):
    k = _boundary(mesh).K.tocsc()
    i = mesh.interior_vertices
    return splu(k[i][:, i].tocsc()), k[i][:, mesh.boundary_vertices]


# ---------------------------------------------------------------------------
# harmonic extension


def harmonic_extension(mesh: Mesh, boundary_values) -> np.ndarray:
    """Discrete harmonic function with the given trace.

    ``boundary_values`` follows ``mesh.boundary_vertices``; a 2-D array
    extends several traces at once (one per column).
    """
    g = np.asarray(boundary_values, dtype=float)
    nb = len(mesh.boundary_vertices)
    if g.shape[0] != nb:
        raise ValueError(f"expected {nb} boundary values, got {g.shape[0]}")
    out = np.zeros((mesh.n_vertices,) + g.shape[1:])
    out[mesh.boundary_vertices] = g
    if len(mesh.interior_vertices):
        lu, kib = _interior_solver(mesh)
        out[mesh.interior_vertices] = lu.solve(-(kib @ g))
    return out


def _trace(mesh: Mesh, u) -> np.ndarray:
    return np.asarray(u, dtype=float)[mesh.boundary_vertices]


# ---------------------------------------------------------------------------
# harmonic Neumann fields


@dataclass(frozen=True, eq=False)
class HarmonicFieldBasis:
    """Whitney fields with ``dh = 0``, ``delta_h h = 0`` and zero weak normal
    trace; columns are orthonormal in the Whitney mass."""

    fields: np.ndarray  # (E, b1)
    gram: np.ndarray
    d_residual: np.ndarray
    coderivative_residual: np.ndarray
    normal_trace_residual: np.ndarray

    @property
    def dimension(self) -> int:
        return self.fields.shape[1]


@lru_cache(maxsize=8)
def harmonic_neumann_fields(mesh: Mesh) -> HarmonicFieldBasis:
    """Kernel of the natural 1-form energy, dimension ``b1``.

    Approximate kernel vectors from a shift-inverted eigensolve are polished
    exactly: projected onto closed cochains, then the exact part is removed
    by a Neumann solve.
    """
    b1 = topology(mesh).b1
    forms = fem.edge_forms_1form(mesh)
    d0 = fem.incidence_d0(mesh)
    d1 = fem.incidence_d1(mesh)
    m1 = fem.whitney_mass(mesh)
    ne = len(mesh.edges)
    if b1 == 0:
        empty = np.zeros((ne, 0))
        return HarmonicFieldBasis(empty, np.zeros((0, 0)), np.zeros(0), np.zeros(0), np.zeros(0))
    e = forms.energy(natural=True)
    k = min(b1 + 2, ne - 2)
    scale = float(e.diagonal().mean() / m1.diagonal().mean())
    vals, vecs = eigsh(e.tocsc(), k=k, M=m1.tocsc(), sigma=-1e-3 * scale, which="LM")
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    nzero = int(np.count_nonzero(vals < 1e-8 * scale))
    if nzero != b1:
        raise MeshError(f"harmonic Neumann space has dimension {nzero}, expected b1 = {b1}")
    x = vecs[:, :b1]
    # closed part: remove the d1-coexact component
    dd = (d1 @ d1.T).tocsc()
    z = x - d1.T @ splu(dd).solve(d1 @ x)
    # co-closed part: subtract the gradient of a Neumann solve
    kmat = _boundary(mesh).K.tocsc()
    rhs = d0.T @ (m1 @ z)
    a = np.zeros((mesh.n_vertices, b1))
    keep = np.arange(1, mesh.n_vertices)
    a[keep] = splu(kmat[keep][:, keep].tocsc()).solve(rhs[keep])
    h = z - d0 @ a
    g = h.T @ (m1 @ h)
    r = np.linalg.cholesky(g)
    h = np.linalg.solve(r, h.T).T
    gram = h.T @ (m1 @ h)
    area = mesh.triangle_areas
    dres = np.linalg.norm((d1 @ h) / np.sqrt(area)[:, None], axis=0)
    m0 = fem.lumped_vertex_mass(mesh)
    inner = mesh.interior_vertices
    cres = np.linalg.norm((d0.T @ (m1 @ h))[inner] / np.sqrt(m0[inner])[:, None], axis=0)
    nres = np.linalg.norm(forms.normal_trace_constraint.matrix @ h, axis=0)
    return HarmonicFieldBasis(h, gram, dres, cres, nres)


def loop_periods(mesh: Mesh, w) -> np.ndarray:
    """Circulation of the edge field ``w`` around each boundary loop."""
    e = mesh.edges
    lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(e)}
    out = []
    for loop in mesh.boundary_loops:
        tot = 0.0
        for a, b in zip(loop, np.roll(loop, -1)):
            a, b = int(a), int(b)
            if a < b:
                tot += w[lookup[(a, b)]]
            else:
                tot -= w[lookup[(b, a)]]
        out.append(tot)
    return np.asarray(out)


# ---------------------------------------------------------------------------
# conjugates


@dataclass(frozen=True, eq=False)
class ConjugatePair:
    """``v`` with ``dv ~ *du``; ``v`` has zero mean on the boundary."""

    u: np.ndarray
    v: np.ndarray
    residual: float  # ||dv - *du||_L2
    relative_residual: float  # residual / ||du||_L2
    tolerance: float
    period_pairing: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _rotated_gradient_load(mesh: Mesh, u) -> np.ndarray:
    """``b_j = int <grad phi_j, R grad u>`` assembled per triangle."""
    from .fem import _p1_gradients

    g, area = _p1_gradients(mesh)
    grad = np.einsum("fid,fi->fd", g, np.asarray(u, dtype=float)[mesh.triangles])
    if mesh.is_planar:
        rot = np.column_stack([-grad[:, 1], grad[:, 0]])
    else:
        p = mesh.vertices[mesh.triangles]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        rot = np.cross(n / np.linalg.norm(n, axis=1, keepdims=True), grad)
    local = np.einsum("fid,fd->fi", g, rot) * area[:, None]
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def _conjugate_residual(mesh: Mesh, u, v) -> tuple[float, float]:
    m = fem.broken_whitney_mass(mesh)
    star = fem.hodge_star_scalar_gradient(mesh, u)
    dv = fem.to_broken(mesh, fem.incidence_d0(mesh) @ v)
    du = fem.to_broken(mesh, fem.incidence_d0(mesh) @ u)
    diff = dv - star
    res = np.sqrt(max(fem.broken_inner(mesh, diff, diff, m), 0.0))
    nrm = np.sqrt(max(fem.broken_inner(mesh, du, du, m), 0.0))
    return float(res), float(res / nrm) if nrm > 0 else 0.0


def _boundary_mean_zero(mesh: Mesh, v) -> np.ndarray:
    mb = fem.mass_boundary(mesh).matrix
    one = np.ones(mesh.n_vertices)
    return v - (one @ (mb @ v)) / (one @ (mb @ one))


def _period_pairing(mesh: Mesh, u) -> np.ndarray:
    basis = harmonic_neumann_fields(mesh)
    if basis.dimension == 0:
        return np.zeros(0)
    m = fem.broken_whitney_mass(mesh)
    star = fem.hodge_star_scalar_gradient(mesh, u)
    du_norm = np.sqrt(max(fem.broken_inner(mesh, star, star, m), 1e-300))
    return np.array(
        [fem.broken_inner(mesh, star, fem.to_broken(mesh, basis.fields[:, k]), m) / du_norm for k in range(basis.dimension)]
    )


def conjugate_harmonic(mesh: Mesh, u, tol: float = 1e-2) -> ConjugatePair:
    """Least-squares harmonic conjugate of a discrete harmonic ``u``.

    Minimises ``||dv - *du||`` over P1 functions.  Raises
    :class:`PeriodObstructionError` when ``*du`` pairs with a harmonic Neumann
    field beyond ``tol`` (relative), and ``ValueError`` when ``u`` is not
    discretely harmonic or the residual exceeds ``tol``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError("u must be a vertex field")
    k = _boundary(mesh).K
    inner = mesh.interior_vertices
    ku = k @ u
    scale = max(abs(k).sum(axis=1).max() * np.abs(u).max(), 1e-300)
    if len(inner) and np.abs(ku[inner]).max() > 1e-8 * scale:
        raise ValueError("u is not discretely harmonic")
    pairing = _period_pairing(mesh, u) if mesh.is_planar else np.zeros(0)
    if pairing.size and np.abs(pairing).max() > tol:
        raise PeriodObstructionError(
            f"period obstruction: *du pairs with harmonic Neumann fields at {np.abs(pairing).max():.3e} (tol {tol:g})"
        )
    b = _rotated_gradient_load(mesh, u)
    v = np.zeros(mesh.n_vertices)
    keep = np.arange(1, mesh.n_vertices)
    kc = k.tocsc()
    v[keep] = splu(kc[keep][:, keep].tocsc()).solve(b[keep])
    v = _boundary_mean_zero(mesh, v)
    res, rel = _conjugate_residual(mesh, u, v)
    if rel > tol:
        raise ValueError(f"conjugate residual {rel:.3e} exceeds tolerance {tol:g}")
    return ConjugatePair(u, v, res, rel, tol, pairing)


@dataclass(frozen=True, eq=False)
class ConjugationMap:
    """Exact discrete complex structure on a space of boundary traces.

    ``space`` (nb x d) is an S-orthonormal basis of the traces it acts on;
    ``J`` (d x d) is skew and orthogonal.  ``apply`` maps traces (columns) to
    conjugate traces after S-projecting onto the space.
    """

    space: np.ndarray
    J: np.ndarray
    raw_singular_values: np.ndarray
    period_directions: np.ndarray  # S-orthogonality constraints (zero flux)

    def coords(self, S, x) -> np.ndarray:
        return self.space.T @ (S @ x)

    def apply(self, S, x) -> np.ndarray:
        return self.space @ (self.J @ self.coords(S, x))


def _loop_indicators(bd: _Boundary) -> np.ndarray:
    nb = bd.S.shape[0]
    ind = np.zeros((nb, len(bd.loop_slices)))
    for k, sl in enumerate(bd.loop_slices):
        ind[sl, k] = 1.0
    return ind


def _alternating(bd: _Boundary) -> np.ndarray:
    nb = bd.S.shape[0]
    cols = []
    for sl in bd.loop_slices:
        n = sl.stop - sl.start
        if n % 2 == 0:
            z = np.zeros(nb)
            z[sl] = (-1.0) ** np.arange(n)
            cols.append(z)
    return np.column_stack(cols) if cols else np.zeros((nb, 0))


def conjugation_map(mesh: Mesh, protect: np.ndarray | None = None) -> ConjugationMap:
    """Build the complex structure on zero-flux, mean-zero traces.

    The skew form has extra kernel vectors (the sawtooth on each loop with an
    even vertex count).  Each is replaced by its S-orthogonal remainder
    against ``protect`` (traces the caller needs inside the space), so the
    space keeps even dimension without cutting into ``protect``.
    """
    bd = _boundary(mesh)
    top = topology(mesh)
    if top.b0 != 1 or top.b1 != len(mesh.boundary_loops) - 1:
        raise MeshError("conjugation is implemented for connected genus-0 meshes")
    S, Mb, C = bd.S, bd.Mb, bd.C
    nb = S.shape[0]
    ind = _loop_indicators(bd)[:, 1:]
    alt = _alternating(bd)
    if alt.shape[1]:
        keep = np.column_stack([np.ones(nb), ind] + ([protect] if protect is not None and protect.size else []))
        gram = keep.T @ S @ keep
        coef = np.linalg.lstsq(gram, keep.T @ S @ alt, rcond=1e-12)[0]
        alt = alt - keep @ coef
    rows = np.vstack([(Mb @ np.ones(nb))[None, :], (S @ ind).T, (S @ alt).T])
    basis = sla.null_space(rows / np.linalg.norm(rows, axis=1, keepdims=True))
    r = np.linalg.cholesky(basis.T @ S @ basis)
    g = np.linalg.solve(r, basis.T).T
    jhat = g.T @ (-C) @ g
    jhat = 0.5 * (jhat - jhat.T)
    u_, sv, vt = np.linalg.svd(jhat)
    if sv.min() < 1e-10 * sv.max():
        raise MeshError("discrete conjugation is singular on the zero-flux traces")
    q = u_ @ vt
    q = 0.5 * (q - q.T)
    return ConjugationMap(g, q, sv, ind)


# ---------------------------------------------------------------------------
# proof subspace replay


@dataclass(frozen=True, eq=False)
class ProofSubspace:
    """Test functions ``u_1 .. u_2n`` with ``u_2i`` conjugate to ``u_2i-1``.

    ``traces`` are boundary traces (nb x 2n), ``fields`` the harmonic
    extensions.  ``coefficients[i]`` holds ``c_2 .. c_K`` of ``u_2i-1`` in the
    boundary eigenfunction basis, ``basis_indices[i] = (2, K)``.
    """

    mesh: Mesh
    m: int
    n: int
    b1: int
    traces: np.ndarray
    fields: np.ndarray
    coefficients: list
    basis_indices: list
    energy_gram: np.ndarray
    boundary_gram: np.ndarray
    conjugates: list
    constraints: dict
    steklov: spectra.Spectrum
    laplace: spectra.Spectrum

    @property
    def gram_offdiag_rel(self) -> float:
        g = self.energy_gram
        d = np.sqrt(np.outer(np.diag(g), np.diag(g)))
        off = np.abs(g / d - np.eye(len(g)))
        return float(off.max())


def _stack(rows, n) -> np.ndarray:
    rows = [r for r in rows if r.size]
    return np.vstack(rows) if rows else np.zeros((0, n))


def _null_vector(rows: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    if rows.shape[0] == 0:
        c = np.zeros(n)
        c[0] = 1.0
        return c, 0.0
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    a = rows / norms
    _, sv, vt = np.linalg.svd(a, full_matrices=True)
    smax = sv.max() if sv.size else 1.0
    rank = int(np.count_nonzero(sv > RANK_TOL * smax))
    if rank >= n:
        raise SubspaceError("constraint system admits only the zero solution (degenerate discrete spectrum)")
    c = vt[-1]
    big = np.flatnonzero(np.abs(c) > 1e-12 * np.abs(c).max())
    if c[big[0]] < 0:
        c = -c
    return c, float(np.linalg.norm(a @ c))


def _spectral_data(mesh: Mesh, needed_phi: int, needed_psi: int):
    nb = len(mesh.boundary_vertices)
    if needed_phi > nb or needed_psi > nb:
        raise ValueError("mesh too coarse for the requested indices")
    lap = spectra.boundary_laplace(mesh, needed_phi, vectors=True)
    stk = spectra.steklov_functions(mesh, needed_psi, vectors=True)
    return lap, stk


def _positive_steklov_vectors(stk: spectra.Spectrum, count: int) -> np.ndarray:
    z = stk.zero_modes
    return stk.vectors[:, z : z + count]


def build_proof_subspace(mesh: Mesh, m: int, n: int, conj_tol: float = 0.25) -> ProofSubspace:
    """Replay the conjugate-pair test subspace for ``m, n``.

    ``u_2i-1`` is the harmonic extension of a combination of the boundary
    eigenfunctions ``phi_2 .. phi_{b1+2m+2i-2}`` chosen so that

    * it has zero flux through every hole (``*du`` orthogonal to H^1_N),
    * it and its conjugate are L2(boundary)-orthogonal to the Steklov
      eigenfunctions of ``sigma_2 .. sigma_m``,
    * its energy is orthogonal to all earlier members;

    ``u_2i`` is its conjugate.  Each member has unit Dirichlet energy.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive integers")
    top = topology(mesh)
    b1 = top.b1
    kmax = b1 + 2 * m + 2 * n - 2
    lap, stk = _spectral_data(mesh, kmax, m + 2 * n + 1)
    bd = _boundary(mesh)
    S, Mb = bd.S, bd.Mb
    phi = lap.vectors
    psi = _positive_steklov_vectors(stk, m - 1)
    cmap = conjugation_map(mesh, protect=phi[:, :kmax])
    traces = []
    coeffs, idx, conj = [], [], []
    worst = 0.0
    for i in range(1, n + 1):
        K = b1 + 2 * m + 2 * i - 2
        Phi = phi[:, 1:K]
        JPhi = cmap.apply(S, Phi)
        rows = [cmap.period_directions.T @ S @ Phi, psi.T @ Mb @ Phi, psi.T @ Mb @ JPhi]
        if traces:
            rows.append(np.column_stack(traces).T @ S @ Phi)
        rows = _stack(rows, Phi.shape[1])
        c, res = _null_vector(rows, Phi.shape[1])
        worst = max(worst, res)
        u = Phi @ c
        en = float(u @ S @ u)
        if en <= 0:
            raise SubspaceError("constructed function is constant")
        c = c / np.sqrt(en)
        u = Phi @ c
        v = cmap.apply(S, u)
        traces += [u, v]
        coeffs.append(c)
        idx.append((2, K))
    U = np.column_stack(traces)
    fields = harmonic_extension(mesh, U)
    for i in range(n):
        res, rel = _conjugate_residual(mesh, fields[:, 2 * i], fields[:, 2 * i + 1])
        if rel > conj_tol:
            raise SubspaceError(f"conjugate residual {rel:.3e} exceeds {conj_tol:g}; refine the mesh")
        conj.append(ConjugatePair(fields[:, 2 * i], fields[:, 2 * i + 1], res, rel, conj_tol))
    constraints = {
        "period_rows": b1,
        "steklov_rows_per_function": m - 1,
        "energy_rows": [2 * i for i in range(n)],
        "max_constraint_residual": worst,
        "psi_indices": list(range(stk.zero_modes + 1, stk.zero_modes + m)),
    }
    return ProofSubspace(
        mesh, m, n, b1, U, fields, coeffs, idx, U.T @ S @ U, U.T @ Mb @ U, conj, constraints, stk, lap
    )


@dataclass(frozen=True)
class MatrixAResult:
    inverse: np.ndarray  # A^{-1} in the energy-normalised basis
    matrix: np.ndarray
    eigenvalues: np.ndarray  # ascending
    sigma: np.ndarray  # sigma_{m+i}
    minmax_ok: bool
    diag_products: np.ndarray  # A^{-1}(2i-1,2i-1) A^{-1}(2i,2i)
    laplace_bounds: np.ndarray  # 1 / lambda_{b1+2m+2i-2}
    diag_ratio: np.ndarray  # products * lambda (>= 1 in the continuum)


def _ritz(energy_gram, boundary_gram):
    d = np.sqrt(np.diag(energy_gram))
    ainv = boundary_gram / np.outer(d, d)
    e = energy_gram / np.outer(d, d)
    lam = sla.eigh(e, ainv, eigvals_only=True)
    return ainv, np.linalg.solve(ainv, e), lam


def matrix_A(sub: ProofSubspace) -> MatrixAResult:
    """The Ritz matrix of the subspace and the bounds it certifies."""
    ainv, a, lam = _ritz(sub.energy_gram, sub.boundary_gram)
    k = len(lam)
    if np.linalg.cond(ainv) > 1e12:
        raise SubspaceError("A^{-1} is numerically singular")
    sig = np.array([sub.steklov[sub.m + i] for i in range(1, k + 1)])
    ok = bool(np.all(sig <= lam * (1 + MINMAX_REL)))
    prods, lb = [], []
    for i in range(1, sub.n + 1):
        prods.append(ainv[2 * i - 2, 2 * i - 2] * ainv[2 * i - 1, 2 * i - 1])
        lb.append(1.0 / sub.laplace[sub.b1 + 2 * sub.m + 2 * i - 2])
    prods, lb = np.array(prods), np.array(lb)
    return MatrixAResult(ainv, a, lam, sig, ok, prods, lb, prods / lb)


@dataclass(frozen=True, eq=False)
class SplitMatrices:
    """Matrices for the product form of the bound on surfaces.

    ``u_i`` span V, their conjugates ``omega_i`` span W.
    """

    mesh: Mesh
    r: int
    s: int
    m: int
    b1: int
    u_traces: np.ndarray
    w_traces: np.ndarray
    A_inverse: np.ndarray
    B_inverse: np.ndarray
    A_eigenvalues: np.ndarray
    B_eigenvalues: np.ndarray
    sigma_r: np.ndarray  # sigma_{r+i}
    sigma_s: np.ndarray  # sigma_{b0+s+i-1}
    laplace: np.ndarray  # lambda_{b1+r+s+i-1}
    energy_gram_u: np.ndarray
    energy_gram_w: np.ndarray
    a_ok: bool
    b_ok: bool
    diag_ratio: np.ndarray


def split_subspace_matrices(mesh: Mesh, r: int, s: int, m: int) -> SplitMatrices:
    """Replay the two-space construction at dimension two.

    ``u_i`` combines ``phi_2 .. phi_{b1+r+s+i-1}``; constraints: zero flux,
    ``u_i`` orthogonal to the Steklov eigenfunctions of ``sigma_2..sigma_r``,
    ``omega_i`` orthogonal to those of ``sigma_2..sigma_s``, and unit-energy
    orthogonality to earlier ``u_j``.
    """
    if min(r, s, m) < 1:
        raise ValueError("r, s, m must be positive integers")
    top = topology(mesh)
    b1, b0 = top.b1, top.b0
    kmax = b1 + r + s + m - 1
    lap, stk = _spectral_data(mesh, kmax, max(r, s) + m + 1)
    bd = _boundary(mesh)
    S, Mb = bd.S, bd.Mb
    phi = lap.vectors
    psi_r = _positive_steklov_vectors(stk, r - 1)
    psi_s = _positive_steklov_vectors(stk, s - 1)
    cmap = conjugation_map(mesh, protect=phi[:, :kmax])
    us, ws = [], []
    for i in range(1, m + 1):
        K = b1 + r + s + i - 1
        Phi = phi[:, 1:K]
        JPhi = cmap.apply(S, Phi)
        rows = [cmap.period_directions.T @ S @ Phi, psi_r.T @ Mb @ Phi, psi_s.T @ Mb @ JPhi]
        if us:
            rows.append(np.column_stack(us).T @ S @ Phi)
        rows = _stack(rows, Phi.shape[1])
        c, _ = _null_vector(rows, Phi.shape[1])
        u = Phi @ c
        u = u / np.sqrt(u @ S @ u)
        us.append(u)
        ws.append(cmap.apply(S, u))
    U, W = np.column_stack(us), np.column_stack(ws)
    gu, gw = U.T @ S @ U, W.T @ S @ W
    ainv, _, la = _ritz(gu, U.T @ Mb @ U)
    binv, _, lb = _ritz(gw, W.T @ Mb @ W)
    sr = np.array([stk[r + i] for i in range(1, m + 1)])
    ss = np.array([stk[b0 + s + i - 1] for i in range(1, m + 1)])
    lam = np.array([lap[b1 + r + s + i - 1] for i in range(1, m + 1)])
    ratio = np.diag(ainv) * np.diag(binv) * lam
    return SplitMatrices(
        mesh, r, s, m, b1, U, W, ainv, binv, la, lb, sr, ss, lam, gu, gw,
        bool(np.all(sr <= la * (1 + MINMAX_REL))), bool(np.all(ss <= lb * (1 + MINMAX_REL))), ratio,
    )


def dump_subspace_json(sub: ProofSubspace, path=None) -> str:
    """Serialise coefficients, Gram matrices, A entries and bounds."""
    res = matrix_A(sub)
    doc = {
        "mesh": sub.mesh.describe(),
        "h": sub.mesh.h,
        "m": sub.m,
        "n": sub.n,
        "b1": sub.b1,
        "coefficients": [c.tolist() for c in sub.coefficients],
        "basis_indices": [list(x) for x in sub.basis_indices],
        "energy_gram": sub.energy_gram.tolist(),
        "boundary_gram": sub.boundary_gram.tolist(),
        "A_inverse": res.inverse.tolist(),
        "A_eigenvalues": res.eigenvalues.tolist(),
        "sigma": res.sigma.tolist(),
        "minmax_ok": res.minmax_ok,
        "diag_products": res.diag_products.tolist(),
        "laplace_bounds": res.laplace_bounds.tolist(),
        "conjugate_residuals": [c.relative_residual for c in sub.conjugates],
        "constraints": sub.constraints,
    }
    text = json.dumps(doc, indent=2, sort_keys=False)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
