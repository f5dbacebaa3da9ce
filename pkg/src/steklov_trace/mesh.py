"""Triangulated planar domains and embedded surfaces with boundary.

Meshes are immutable value objects.  Generated analytic domains (disk,
annulus, ellipse) remember their boundary curves so that :func:`refine`
can push new boundary vertices back onto the exact curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

__all__ = [
    "Mesh",
    "MeshError",
    "TopologyInfo",
    "Measures",
    "generate_disk",
    "generate_annulus",
    "generate_ellipse",
    "generate_rectangle",
    "load_mesh",
    "write_mesh",
    "topology",
    "measures",
    "refine",
    "scale",
    "disjoint_union",
]

DEGENERATE_REL = 1e-12


class MeshError(ValueError):
    """Raised for invalid or unsupported mesh input."""


@dataclass(frozen=True)
class TopologyInfo:
    b0: int
    b1: int
    boundary_component_count: int
    euler_characteristic: int


@dataclass(frozen=True)
class Measures:
    area: float
    boundary_length: float
    loop_lengths: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Oriented triangle mesh.

    Attributes
    ----------
    vertices : (V, 2) or (V, 3) float array
    triangles : (F, 3) int array, positively oriented
    boundary_loops : tuple of int arrays, each traversed with the domain on
        the left
    shape : descriptor of the analytic domain (``("disk", R)``, ...) or
        ``None`` for ingested meshes; used for boundary re-projection.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: tuple
    shape: tuple | None = None
    target_h: float | None = field(default=None, compare=False)

    def __post_init__(self):
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)
        for loop in self.boundary_loops:
            loop.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def is_planar(self) -> bool:
        return self.vertices.shape[1] == 2

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique edges (E, 2), each stored low index first."""
        return _edge_table(self.triangles)[0]

    @cached_property
    def triangle_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Per triangle the edge ids of (v0v1, v1v2, v2v0) and the signs
        relating the triangle's traversal to the stored edge direction."""
        _, tri_edges, signs = _edge_table(self.triangles)
        return tri_edges, signs

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        if not self.boundary_loops:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.boundary_loops)

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """(Eb, 2) directed boundary edges following the loops."""
        out = [np.column_stack([lp, np.roll(lp, -1)]) for lp in self.boundary_loops]
        if not out:
            return np.zeros((0, 2), dtype=np.int64)
        return np.vstack(out)

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        return np.abs(_signed_areas(self.vertices, self.triangles))

    @cached_property
    def h(self) -> float:
        """Maximum edge length."""
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1).max())

    def describe(self) -> str:
        if self.shape is None:
            return "mesh"
        name, *params = self.shape
        return name + "(" + ",".join(f"{p:g}" for p in params) + ")"


def _signed_areas(vertices, triangles):
    p0, p1, p2 = (vertices[triangles[:, k]] for k in range(3))
    if vertices.shape[1] == 2:
        a, b = p1 - p0, p2 - p0
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    # surfaces: unsigned, orientation is handled combinatorially
    return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)


def _edge_table(triangles):
    halfedges = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    lo = halfedges.min(axis=1)
    hi = halfedges.max(axis=1)
    keys = np.column_stack([lo, hi])
    edges, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    signs = np.where(halfedges[:, 0] == lo, 1, -1)
    return edges, inverse.reshape(-1, 3), signs.reshape(-1, 3)


def _boundary_loops(triangles) -> tuple:
    """Extract boundary loops from directed boundary half-edges.

    Raises MeshError on non-manifold edges or orientation conflicts.
    """
    halfedges = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    keys = np.sort(halfedges, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if counts.max(initial=0) > 2:
        raise MeshError("non-manifold edge: shared by more than two triangles")
    # interior edges must be traversed once in each direction
    dir_keys = halfedges[:, 0].astype(np.int64) * (triangles.max() + 1) + halfedges[:, 1]
    if np.unique(dir_keys).size != dir_keys.size:
        raise MeshError("inconsistent triangle orientation")
    bmask = counts[inverse] == 1
    bhalf = halfedges[bmask]
    if bhalf.size == 0:
        return ()
    nxt = {}
    for a, b in bhalf:
        if int(a) in nxt:
            raise MeshError("non-manifold vertex on boundary")
        nxt[int(a)] = int(b)
    loops = []
    seen = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur in seen or cur not in nxt:
                raise MeshError("boundary is not a union of simple closed loops")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(np.asarray(loop, dtype=np.int64))
    return tuple(loops)


def _orient_consistently(triangles):
    """Flip triangles so neighbours traverse shared edges oppositely."""
    nt = len(triangles)
    halfedges = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    keys = np.sort(halfedges, axis=1)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    if counts.max(initial=0) > 2:
        raise MeshError("non-manifold edge: shared by more than two triangles")
    inverse = inverse.reshape(-1)
    ascending = (halfedges[:, 0] < halfedges[:, 1]).astype(np.int64)
    order = np.argsort(inverse, kind="stable")
    partner = np.full(3 * nt, -1, dtype=np.int64)
    paired = counts[inverse[order]] == 2
    first = order[paired][0::2]
    second = order[paired][1::2]
    partner[first] = second
    partner[second] = first
    flip = np.full(nt, -1, dtype=np.int64)
    for seed in range(nt):
        if flip[seed] >= 0:
            continue
        flip[seed] = 0
        stack = [seed]
        while stack:
            t = stack.pop()
            for h in range(3 * t, 3 * t + 3):
                g = partner[h]
                if g < 0:
                    continue
                s = g // 3
                want = ascending[g] ^ ascending[h] ^ flip[t] ^ 1
                if flip[s] < 0:
                    flip[s] = want
                    stack.append(s)
                elif flip[s] != want:
                    raise MeshError("inconsistent orientation not repairable (non-orientable surface)")
    out = triangles.copy()
    out[flip == 1] = triangles[flip == 1][:, ::-1]
    return out


def _build(vertices, triangles, shape=None, target_h=None, orient=True) -> Mesh:
    vertices = np.ascontiguousarray(vertices, dtype=float)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if triangles.ndim != 2 or triangles.shape[1] != 3 or len(triangles) == 0:
        raise MeshError("triangles must be a non-empty (F, 3) array")
    if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
        raise MeshError("vertices must be (V, 2) or (V, 3)")
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshError("triangle index out of range")
    if orient:
        if vertices.shape[1] == 2:
            neg = _signed_areas(vertices, triangles) < 0
            triangles = triangles.copy()
            triangles[neg] = triangles[neg][:, ::-1]
        else:
            triangles = _orient_consistently(triangles)
    area = np.abs(_signed_areas(vertices, triangles))
    if np.any(area < DEGENERATE_REL * area.mean()):
        raise MeshError("degenerate (zero-area) triangle")
    if vertices.shape[1] == 2 and np.any(_signed_areas(vertices, triangles) <= 0):
        raise MeshError("triangle orientation is not positive")
    loops = _boundary_loops(triangles)
    return Mesh(vertices, triangles, loops, shape, target_h)


# ---------------------------------------------------------------------------
# generators


def _zip_rings(ring_a, ang_a, ring_b, ang_b):
    """Triangulate the band between two closed rings sorted by angle."""
    p, q = len(ring_a), len(ring_b)
    # unwrap B relative to the first vertex of A
    shift = (ang_b - ang_a[0]) % (2 * np.pi)
    j0 = int(np.argmin(np.minimum(shift, 2 * np.pi - shift)))
    ua = ang_a - ang_a[0]
    ua = np.append(ua, 2 * np.pi)
    ub = np.array([(ang_b[(j0 + k) % q] - ang_a[0]) for k in range(q + 1)])
    ub = np.unwrap(ub)
    ub = ub - 2 * np.pi * np.floor((ub[0] + np.pi) / (2 * np.pi))
    ub[-1] = ub[0] + 2 * np.pi
    tris = []
    i = j = 0
    while i < p or j < q:
        ai, bj = ring_a[i % p], ring_b[(j0 + j) % q]
        if j >= q or (i < p and ua[i + 1] <= ub[j + 1]):
            tris.append((ai, ring_a[(i + 1) % p], bj))
            i += 1
        else:
            tris.append((ai, ring_b[(j0 + j + 1) % q], bj))
            j += 1
    return tris


def _ring_mesh(radii, counts, center: bool):
    pts = []
    rings = []
    angs = []
    idx = 0
    tris = []
    if center:
        pts.append(np.zeros((1, 2)))
        idx = 1
    for k, (r, n) in enumerate(zip(radii, counts)):
        offset = 0.5 * (k % 2) * 2 * np.pi / n
        th = offset + 2 * np.pi * np.arange(n) / n
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        rings.append(np.arange(idx, idx + n))
        angs.append(th % (2 * np.pi))
        idx += n
    if center:
        r0 = rings[0]
        tris.extend((0, int(r0[i]), int(r0[(i + 1) % len(r0)])) for i in range(len(r0)))
    for k in range(len(rings) - 1):
        oa = np.argsort(angs[k], kind="stable")
        ob = np.argsort(angs[k + 1], kind="stable")
        tris.extend(_zip_rings(rings[k][oa], angs[k][oa], rings[k + 1][ob], angs[k + 1][ob]))
    return np.vstack(pts), np.asarray(tris, dtype=np.int64)


def _check_positive(**kw):
    for name, val in kw.items():
        if not (isinstance(val, (int, float, np.floating, np.integer)) and math.isfinite(val) and val > 0):
            raise MeshError(f"{name} must be a positive number, got {val!r}")


def generate_disk(radius: float, target_h: float) -> Mesh:
    """Concentric-ring triangulation of the disk of given radius."""
    _check_positive(radius=radius, target_h=target_h)
    if target_h >= radius:
        raise MeshError("target_h must be smaller than the radius")
    k = math.ceil(radius / target_h)
    radii = radius * np.arange(1, k + 1) / k
    counts = [max(6, math.ceil(2 * np.pi * r / (0.9 * target_h))) for r in radii]
    v, t = _ring_mesh(radii, counts, center=True)
    return _build(v, t, ("disk", float(radius)), target_h)


def generate_annulus(r_inner: float, r_outer: float, target_h: float) -> Mesh:
    """Concentric-ring triangulation of r_inner < |x| < r_outer."""
    _check_positive(r_inner=r_inner, r_outer=r_outer, target_h=target_h)
    if r_inner >= r_outer:
        raise MeshError("r_inner must be smaller than r_outer")
    k = max(1, math.ceil((r_outer - r_inner) / target_h))
    radii = r_inner + (r_outer - r_inner) * np.arange(k + 1) / k
    counts = [max(6, math.ceil(2 * np.pi * r / (0.9 * target_h))) for r in radii]
    v, t = _ring_mesh(radii, counts, center=False)
    return _build(v, t, ("annulus", float(r_inner), float(r_outer)), target_h)


def generate_ellipse(a: float, b: float, target_h: float) -> Mesh:
    """Unit-disk ring mesh mapped affinely onto the ellipse with semi-axes a, b."""
    _check_positive(a=a, b=b, target_h=target_h)
    if target_h >= min(a, b):
        raise MeshError("target_h must be smaller than both semi-axes")
    disk = generate_disk(1.0, target_h / max(a, b))
    v = disk.vertices * np.array([a, b])
    return _build(v, disk.triangles, ("ellipse", float(a), float(b)), target_h)


def generate_rectangle(width: float, height: float, target_h: float) -> Mesh:
    """Structured right-triangle mesh of [0, width] x [0, height]."""
    _check_positive(width=width, height=height, target_h=target_h)
    nx = max(1, math.ceil(width / target_h))
    ny = max(1, math.ceil(height / target_h))
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    v = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    t = np.vstack([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return _build(v, t, ("rectangle", float(width), float(height)), target_h)


# ---------------------------------------------------------------------------
# I/O


def load_mesh(path) -> Mesh:
    """Read an ASCII OFF triangle mesh.

    Grammar (comments start with ``#``, blank lines ignored)::

        OFF
        V F 0
        x y [z]      # V lines; two coordinates mean a planar mesh
        3 i j k      # F lines, zero-based vertex indices

    A 3-D file whose z coordinates are all zero is read as planar.
    """
    path = Path(path)
    try:
        lines = [ln.split("#", 1)[0].strip() for ln in path.read_text().splitlines()]
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != "OFF":
        raise MeshError("parse failure: missing OFF header")
    try:
        nv, nf, *_ = (int(x) for x in lines[1].split())
        vrows = [[float(x) for x in ln.split()] for ln in lines[2 : 2 + nv]]
        frows = [[int(x) for x in ln.split()] for ln in lines[2 + nv : 2 + nv + nf]]
    except (ValueError, IndexError) as exc:
        raise MeshError(f"parse failure: {exc}") from exc
    if len(vrows) != nv or len(frows) != nf:
        raise MeshError("parse failure: truncated file")
    dims = {len(r) for r in vrows}
    if len(dims) != 1 or dims.pop() not in (2, 3):
        raise MeshError("parse failure: vertex lines need 2 or 3 coordinates")
    if any(len(r) != 4 or r[0] != 3 for r in frows):
        raise MeshError("parse failure: only triangular faces '3 i j k' are supported")
    v = np.asarray(vrows, dtype=float)
    if v.shape[1] == 3 and np.all(v[:, 2] == 0.0):
        v = v[:, :2]
    t = np.asarray([r[1:] for r in frows], dtype=np.int64)
    return _build(v, t)


def write_mesh(mesh: Mesh, path) -> Path:
    """Write ``mesh`` as ASCII OFF; output depends only on the mesh data."""
    path = Path(path)
    out = ["OFF", f"{mesh.n_vertices} {mesh.n_triangles} 0"]
    out += [" ".join(repr(float(x)) for x in row) for row in mesh.vertices]
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    path.write_text("\n".join(out) + "\n")
    return path


# ---------------------------------------------------------------------------
# topology, measures, refinement


def topology(mesh: Mesh) -> TopologyInfo:
    nv, nf = mesh.n_vertices, mesh.n_triangles
    ne = len(mesh.edges)
    chi = nv - ne + nf
    e = mesh.edges
    adj = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(nv, nv))
    b0, labels = csgraph.connected_components(adj, directed=False)
    # per component: b1 = 1 - chi with boundary, 2 - chi when closed
    has_bdry = np.zeros(b0, dtype=bool)
    if len(mesh.boundary_vertices):
        has_bdry[np.unique(labels[mesh.boundary_vertices])] = True
    b2 = int(np.count_nonzero(~has_bdry))
    b1 = b0 + b2 - chi
    return TopologyInfo(int(b0), int(b1), len(mesh.boundary_loops), int(chi))


def measures(mesh: Mesh) -> Measures:
    lengths = []
    for loop in mesh.boundary_loops:
        p = mesh.vertices[loop]
        lengths.append(float(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1).sum()))
    return Measures(float(mesh.triangle_areas.sum()), float(sum(lengths)), tuple(lengths))


def _project_to_shape(shape, pts):
    name = shape[0]
    if name == "disk":
        r = np.linalg.norm(pts, axis=1, keepdims=True)
        return pts * (shape[1] / r)
    if name == "annulus":
        r = np.linalg.norm(pts, axis=1, keepdims=True)
        target = np.where(np.abs(r - shape[1]) < np.abs(r - shape[2]), shape[1], shape[2])
        return pts * (target / r)
    if name == "ellipse":
        a, b = shape[1], shape[2]
        t = np.arctan2(pts[:, 1] / b, pts[:, 0] / a)
        return np.column_stack([a * np.cos(t), b * np.sin(t)])
    return pts


def refine(mesh: Mesh) -> Mesh:
    """Uniform 1-to-4 split; new boundary vertices of analytic domains are
    re-projected onto the exact boundary curve."""
    edges = mesh.edges
    tri_edges, _ = mesh.triangle_edges
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    if mesh.shape is not None and mesh.boundary_loops:
        bset = np.zeros(nv, dtype=bool)
        bset[mesh.boundary_vertices] = True
        # boundary edges are those with exactly one incident triangle
        counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
        on_bdry = (counts == 1) & bset[edges[:, 0]] & bset[edges[:, 1]]
        mids = mids.copy()
        mids[on_bdry] = _project_to_shape(mesh.shape, mids[on_bdry])
    v = np.vstack([mesh.vertices, mids])
    t = mesh.triangles
    m01, m12, m20 = (nv + tri_edges[:, k] for k in range(3))
    new = np.vstack(
        [
            np.column_stack([t[:, 0], m01, m20]),
            np.column_stack([m01, t[:, 1], m12]),
            np.column_stack([m20, m12, t[:, 2]]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    th = None if mesh.target_h is None else mesh.target_h / 2
    return _build(v, new, mesh.shape, th, orient=False)


def scale(mesh: Mesh, c: float) -> Mesh:
    """Mesh scaled by c > 0 about the origin (same connectivity)."""
    _check_positive(c=c)
    shape = None
    if mesh.shape is not None:
        shape = (mesh.shape[0], *(c * p for p in mesh.shape[1:]))
    th = None if mesh.target_h is None else c * mesh.target_h
    return _build(mesh.vertices * c, mesh.triangles, shape, th, orient=False)


def disjoint_union(a: Mesh, b: Mesh) -> Mesh:
    if a.vertices.shape[1] != b.vertices.shape[1]:
        raise MeshError("cannot join planar and embedded meshes")
    v = np.vstack([a.vertices, b.vertices])
    t = np.vstack([a.triangles, b.triangles + a.n_vertices])
    return _build(v, t, None, None, orient=False)
