"""Steklov and boundary-Laplace spectra, discrete and closed form.

The Dirichlet-to-Neumann operator on functions is the boundary Schur
complement of the P1 stiffness.  The 1-form problem on planar meshes uses
the Whitney energy ``|dw|^2 + |delta_h w|^2`` reduced onto boundary edges,
against the L2 norm of the tangential trace.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import splu

from . import fem
from .mesh import Mesh, MeshError, topology

__all__ = [
    "Spectrum",
    "EigenSolveError",
    "generalized_sym_eig",
    "dirichlet_to_neumann",
    "steklov_functions",
    "steklov_1forms_planar",
    "boundary_laplace",
    "disk_steklov_analytic",
    "annulus_steklov_analytic",
    "annulus_mode_pair",
    "circle_laplace_analytic",
    "circles_laplace_analytic",
    "disk_steklov_1form_radial",
    "clusters",
    "write_spectrum_csv",
]

ZERO_REL = 1e-9
CLUSTER_REL = 1e-6


class EigenSolveError(RuntimeError):
    """Generalized eigenproblem breakdown (indefinite B, residual failure)."""


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray
    kind: str  # steklov-0 | steklov-1 | boundary-laplace
    provenance: str  # "fem" | "analytic"
    zero_modes: int
    h: float | None = None
    vectors: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, k: int) -> float:
        """One-based access, matching the ``sigma_1 <= sigma_2 <= ...`` labels."""
        if k < 1 or k > len(self.values):
            raise IndexError(f"{self.kind} index {k} outside computed range 1..{len(self.values)}")
        return float(self.values[k - 1])

    def scaled(self, factor: float) -> Spectrum:
        return replace(self, values=self.values * factor)


def _validated(values, kind, provenance, h=None, vectors=None, scale_ref=None) -> Spectrum:
    values = np.asarray(values, dtype=float)
    ref = float(np.max(np.abs(values))) if scale_ref is None else float(scale_ref)
    ref = max(ref, np.finfo(float).tiny)
    if np.any(values < -ZERO_REL * ref):
        raise EigenSolveError(f"negative eigenvalue {values.min():.3e} in {kind} spectrum")
    if np.any(np.diff(values) < -1e-12 * ref):
        raise EigenSolveError("eigenvalues not ascending")
    values = np.maximum(values, 0.0)
    zero = int(np.count_nonzero(values <= ZERO_REL * ref))
    values[:zero] = 0.0
    return Spectrum(values, kind, provenance, zero, h, vectors)


def clusters(values, rel: float = CLUSTER_REL) -> list[tuple[float, int]]:
    """Group ascending values into (value, multiplicity) clusters."""
    out: list[list] = []
    for v in values:
        if out and abs(v - out[-1][0]) <= rel * max(abs(v), abs(out[-1][0]), 1e-300):
            out[-1][1] += 1
        else:
            out.append([float(v), 1])
    return [(v, k) for v, k in out]


# ---------------------------------------------------------------------------
# generic solver


def _dense(a):
    if isinstance(a, fem.DiscreteOperator):
        a = a.matrix
    if sparse.issparse(a):
        a = a.toarray()
    return np.asarray(a, dtype=float)


def generalized_sym_eig(A, B, count: int | None = None, check: bool = True):
    """Ascending eigenpairs of ``A x = lam B x`` (dense LAPACK).

    Returns ``(values, vectors)`` with B-orthonormal columns.
    """
    a = _dense(A)
    b = _dense(B)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n, n):
        raise ValueError("A and B must be square and of equal size")
    count = n if count is None else int(count)
    if not 1 <= count <= n:
        raise ValueError(f"count must be in 1..{n}")
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    try:
        if count == n:
            vals, vecs = sla.eigh(a, b, driver="gvd")
        else:
            vals, vecs = sla.eigh(a, b, subset_by_index=[0, count - 1], driver="gvx")
    except np.linalg.LinAlgError as exc:
        raise EigenSolveError(f"B is not positive definite on the solve space: {exc}") from exc
    if check:
        anorm = max(np.linalg.norm(a, 2) if n <= 400 else np.linalg.norm(a, "fro"), 1e-300)
        res = np.linalg.norm(a @ vecs - (b @ vecs) * vals, axis=0)
        if np.any(res > 1e-8 * anorm * max(1.0, np.linalg.norm(b, 2) if n <= 400 else 1.0)):
            raise EigenSolveError(f"eigen residual {res.max():.3e} exceeds tolerance (|A|={anorm:.3e})")
    return vals, vecs


def _scale_ref(a, b, vals) -> float:
    """Largest-eigenvalue proxy used for the relative zero threshold."""
    da, db = np.abs(np.diag(_dense(a))), np.abs(np.diag(_dense(b)))
    return float(max(np.abs(vals).max(), (da / np.maximum(db, 1e-300)).max()))


# ---------------------------------------------------------------------------
# functions


def dirichlet_to_neumann(mesh: Mesh, stiffness=None) -> np.ndarray:
    """Dense boundary Schur complement ``K_bb - K_bi K_ii^{-1} K_ib``.

    Rows and columns follow ``mesh.boundary_vertices``.
    """
    k = (fem.stiffness_scalar(mesh) if stiffness is None else stiffness).matrix.tocsc()
    b = mesh.boundary_vertices
    i = mesh.interior_vertices
    if len(b) == 0:
        raise MeshError("mesh has no boundary")
    kbb = k[b][:, b].toarray()
    if len(i) == 0:
        return kbb
    kii = k[i][:, i].tocsc()
    kib = k[i][:, b].toarray()
    try:
        lu = splu(kii)
    except RuntimeError as exc:
        raise MeshError(f"interior stiffness block is singular: {exc}") from exc
    s = kbb - kib.T @ lu.solve(kib)
    return 0.5 * (s + s.T)


def steklov_functions(mesh: Mesh, count: int, vectors: bool = False) -> Spectrum:
    """First ``count`` Steklov eigenvalues of functions (sigma_1 = 0 first)."""
    nb = len(mesh.boundary_vertices)
    if not 1 <= count <= nb:
        raise ValueError(f"count must be in 1..{nb} (boundary DOF count)")
    s = dirichlet_to_neumann(mesh)
    _, mb = fem.boundary_laplacian(mesh)
    vals, vecs = generalized_sym_eig(s, mb, count)
    return _validated(vals, "steklov-0", "fem", mesh.h, vecs if vectors else None, _scale_ref(s, mb, vals))


def boundary_laplace(mesh: Mesh, count: int, vectors: bool = False) -> Spectrum:
    """Merged spectrum of the 1-D Laplacian on all boundary loops.

    With ``vectors=True`` the zero eigenspace basis starts with the constant
    vector, followed by loop-indicator combinations orthogonal to it; other
    eigenvectors get the sign convention "first clearly nonzero entry
    positive".
    """
    nb = len(mesh.boundary_vertices)
    if not 1 <= count <= nb:
        raise ValueError(f"count must be in 1..{nb} (boundary DOF count)")
    kb, mb = fem.boundary_laplacian(mesh)
    vals, vecs = generalized_sym_eig(kb, mb, count)
    sp = _validated(vals, "boundary-laplace", "fem", mesh.h, None, _scale_ref(kb, mb, vals))
    if vectors:
        vecs = _canonical_vectors(mesh, sp.values, vecs, mb.matrix.toarray(), sp.zero_modes)
        sp = replace(sp, vectors=vecs)
    return sp


def _canonical_vectors(mesh, values, vecs, mb, zero):
    vecs = vecs.copy()
    nloops = len(mesh.boundary_loops)
    if zero:
        # indicator basis of the kernel, constant first, M-orthonormalised
        nb = vecs.shape[0]
        ind = np.zeros((nb, nloops))
        start = 0
        for k, loop in enumerate(mesh.boundary_loops):
            ind[start : start + len(loop), k] = 1.0
            start += len(loop)
        basis = np.column_stack([np.ones(nb), ind[:, 1:]])
        q = _m_orthonormalize(basis, mb)
        vecs[:, : min(zero, nloops)] = q[:, : min(zero, nloops)]
    for j in range(min(zero, nloops), vecs.shape[1]):
        v = vecs[:, j]
        big = np.flatnonzero(np.abs(v) > 1e-8 * np.abs(v).max())
        if big.size and v[big[0]] < 0:
            vecs[:, j] = -v
    return vecs


def _m_orthonormalize(x, m):
    g = x.T @ m @ x
    r = np.linalg.cholesky(g)
    return np.linalg.solve(r, x.T).T


def steklov_1forms_planar(mesh: Mesh, count: int, vectors: bool = False, natural: bool = True) -> Spectrum:
    """Steklov eigenvalues of 1-forms on a planar mesh.

    Minimises ``(|dw|^2 + |delta_h w|^2) / oint |iota* w|^2`` over Whitney
    fields; interior edge DOFs are eliminated by the harmonic (energy
    minimising) extension, leaving a dense problem on the boundary edges.
    ``natural=False`` instead imposes the weak normal-trace rows as hard
    constraints (kept for comparison; it converges more slowly).
    """
    forms = fem.edge_forms_1form(mesh)
    bnd = forms.tangential_boundary_mass.dofs.boundary
    if not 1 <= count <= len(bnd):
        raise ValueError(f"count must be in 1..{len(bnd)} (boundary edge count)")
    e = forms.energy(natural=natural).tocsc()
    if natural:
        basis = None
        inner = forms.d_form.dofs.interior
        ebb = e[bnd][:, bnd].toarray()
        eib = e[inner][:, bnd].toarray()
        lu = splu(e[inner][:, inner].tocsc())
        s = ebb - eib.T @ lu.solve(eib)
        tm = forms.tangential_boundary_mass.matrix[bnd][:, bnd].toarray()
    else:
        # null-space basis of the constraint rows, then the generalized problem
        c = forms.normal_trace_constraint.matrix.toarray()
        basis = sla.null_space(c)
        if basis.shape[1] == 0:
            raise MeshError("normal-trace constraints leave an empty space")
        ed = e.toarray()
        tmat = forms.tangential_boundary_mass.matrix.toarray()
        a = basis.T @ ed @ basis
        bm = basis.T @ tmat @ basis
        # the trace map is rank deficient on the constrained space: reduce onto
        # its range with a Schur complement
        w, q = np.linalg.eigh(0.5 * (bm + bm.T))
        keep = w > 1e-12 * w.max()
        q1, q0 = q[:, keep], q[:, ~keep]
        a11, a10, a00 = q1.T @ a @ q1, q1.T @ a @ q0, q0.T @ a @ q0
        s = a11 - a10 @ np.linalg.solve(a00, a10.T)
        tm = np.diag(w[keep])
    s = 0.5 * (s + s.T)
    vals, vecs = generalized_sym_eig(s, tm, count)
    ref = _scale_ref(s, tm, vals)
    return _validated(vals, "steklov-1", "fem", mesh.h, vecs if vectors else None, ref)


# ---------------------------------------------------------------------------
# closed-form oracles


def disk_steklov_analytic(radius: float, count: int) -> Spectrum:
    """``0, 1, 1, 2, 2, ...`` divided by the radius."""
    k = np.arange(count)
    vals = np.ceil(k / 2.0) / radius
    return Spectrum(vals.astype(float), "steklov-0", "analytic", 1)


def circle_laplace_analytic(length: float, count: int) -> Spectrum:
    """``(2 pi k / L)^2`` with multiplicity two for k >= 1."""
    k = np.ceil(np.arange(count) / 2.0)
    return Spectrum((2 * np.pi * k / length) ** 2, "boundary-laplace", "analytic", 1)


def circles_laplace_analytic(lengths, count: int) -> Spectrum:
    """Sorted union of circle spectra (one circle per boundary loop)."""
    vals = np.sort(np.concatenate([circle_laplace_analytic(L, count).values for L in lengths]))[:count]
    return Spectrum(vals, "boundary-laplace", "analytic", int(np.count_nonzero(vals == 0)))


def annulus_mode_pair(r_in: float, r_out: float, k: int) -> tuple[float, float]:
    """Both Steklov eigenvalues of Fourier mode ``k`` on the annulus.

    The radial profile ranges over span{r^k, r^-k} (span{1, log r} for
    ``k = 0``); the Steklov conditions on both circles give a 2x2 pencil whose
    characteristic quadratic is solved in closed form.
    """
    a, b = float(r_in), float(r_out)
    if k == 0:
        # u = c0 + c1 log r
        N = np.array([[0.0, 1.0 / b], [0.0, -1.0 / a]])
        D = np.array([[1.0, math.log(b)], [1.0, math.log(a)]])
    else:
        # outer: d/dr, inner: -d/dr
        N = np.array([[k * b ** (k - 1), -k * b ** (-k - 1)], [-k * a ** (k - 1), k * a ** (-k - 1)]])
        D = np.array([[b**k, b**-k], [a**k, a**-k]])
    # det(N - s D) = q2 s^2 + q1 s + q0
    q2 = D[0, 0] * D[1, 1] - D[0, 1] * D[1, 0]
    q1 = -(N[0, 0] * D[1, 1] + D[0, 0] * N[1, 1] - N[0, 1] * D[1, 0] - D[0, 1] * N[1, 0])
    q0 = N[0, 0] * N[1, 1] - N[0, 1] * N[1, 0]
    disc = math.sqrt(max(q1 * q1 - 4 * q2 * q0, 0.0))
    # numerically stable roots
    if q1 >= 0:
        t = -0.5 * (q1 + disc)
    else:
        t = -0.5 * (q1 - disc)
    r1 = t / q2
    r2 = q0 / t if t != 0 else 0.0
    lo, hi = sorted((r1, r2))
    return (max(lo, 0.0), hi)


def annulus_steklov_analytic(r_in: float, r_out: float, count: int) -> Spectrum:
    vals = []
    k = 0
    while True:
        lo, hi = annulus_mode_pair(r_in, r_out, k)
        mult = 1 if k == 0 else 2
        vals += [lo] * mult + [hi] * mult
        k += 1
        # low branch of mode k grows like k / r_out; stop once it clears the pack
        if len(vals) >= count and k / r_out > sorted(vals)[count - 1] + 1:
            break
    vals = np.sort(np.asarray(vals))[:count]
    return Spectrum(vals, "steklov-0", "analytic", 1)


def _radial_profile(m: int, r0: float = 1e-3):
    """Integrate F'' + F'/r - m^2 F / r^2 = 0 from near the origin to r = 1.

    The regular branch is seeded with F ~ r^|m|; returns (F(1), F'(1)).
    """
    am = abs(m)
    y0 = [r0**am, am * r0 ** (am - 1) if am else 0.0]
    sol = solve_ivp(
        lambda r, y: [y[1], -y[1] / r + m * m * y[0] / (r * r)],
        (r0, 1.0),
        y0,
        rtol=1e-12,
        atol=1e-14,
        method="DOP853",
    )
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def disk_steklov_1form_radial(radius: float, count: int) -> Spectrum:
    """1-form Steklov spectrum of a disk by numerical radial integration.

    Write the field as the complex function ``w = a + i b`` with harmonic
    components and expand in Fourier modes ``F_m(r) e^{i m theta}``.  On the
    boundary frequency ``j`` couples ``m = j + 1`` with ``m = 1 - j``;
    vanishing normal part fixes the ratio of the two amplitudes and the
    eigenvalue is ``sum_m (F_m' + m F_m) / (2 F_m)`` over the coupled pair.
    Frequency ``j = 0`` has the single mode ``m = 1`` and eigenvalue
    ``(F_1' + F_1) / F_1``.
    """
    out = []
    j = 0
    while len(out) < count:
        if j == 0:
            f, fp = _radial_profile(1)
            sig = (fp + f) / f
        else:
            sig = 0.0
            for m in (j + 1, 1 - j):
                f, fp = _radial_profile(m)
                sig += (fp + m * f) / (2.0 * f)
        out += [sig] * (1 if j == 0 else 2)
        j += 1
    vals = np.sort(np.asarray(out[:count])) / radius
    return Spectrum(vals, "steklov-1", "analytic", 0)


# ---------------------------------------------------------------------------
# export


def write_spectrum_csv(spectrum: Spectrum, path=None, oracle: Spectrum | None = None) -> str:
    """CSV with columns index, value, kind, provenance, h (plus oracle, error)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["index", "value", "kind", "provenance", "h"]
    if oracle is not None:
        head += ["oracle", "error"]
    w.writerow(head)
    for k, v in enumerate(spectrum.values, start=1):
        row = [k, repr(float(v)), spectrum.kind, spectrum.provenance, "" if spectrum.h is None else repr(float(spectrum.h))]
        if oracle is not None:
            o = float(oracle.values[k - 1])
            row += [repr(o), repr(float(v) - o)]
        w.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def expected_zero_modes(mesh: Mesh, kind: str) -> int:
    top = topology(mesh)
    return {"steklov-0": top.b0, "steklov-1": top.b1, "boundary-laplace": top.boundary_component_count}[kind]
