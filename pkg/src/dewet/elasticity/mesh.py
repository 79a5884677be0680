"""Structured triangulations of the film region under a profile graph."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateElement
from ..profile import Profile
from ..kernels import p1_gradients


@dataclass
class Mesh:
    """Triangulation with boundary bookkeeping.

    ``fiber``/``eta`` locate each vertex as ``x = x_fiber``, ``y = eta * h_fiber``
    for meshes built from a profile (both -1 for other meshes).
    ``graph_tri[j]`` is the triangle carrying graph segment j.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    bottom_edges: np.ndarray
    graph_edges: np.ndarray
    dirichlet_mask: np.ndarray
    fiber: np.ndarray = field(default=None)
    eta: np.ndarray = field(default=None)
    graph_tri: np.ndarray = field(default=None)
    n: int = 0
    ny: int = 0

    @property
    def bottom_mask(self) -> np.ndarray:
        m = np.zeros(len(self.vertices), dtype=bool)
        m[self.bottom_edges.ravel()] = True
        return m

    @property
    def graph_mask(self) -> np.ndarray:
        m = np.zeros(len(self.vertices), dtype=bool)
        m[self.graph_edges.ravel()] = True
        return m

    def areas(self) -> np.ndarray:
        return p1_gradients(self.vertices, self.triangles)[0]

    def area(self) -> float:
        return float(self.areas().sum())

    def aspect_ratios(self) -> np.ndarray:
        """Longest edge squared over twice the area; 2/sqrt(3) for an equilateral triangle."""
        P = self.vertices[self.triangles]
        e = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 1], P[:, 0] - P[:, 2]], axis=1)
        longest = np.max(np.sum(e * e, axis=2), axis=1)
        return longest / (2.0 * self.areas())

    def to_dict(self) -> dict:
        return {
            "vertices": self.vertices.tolist(),
            "triangles": self.triangles.tolist(),
            "bottom_edges": self.bottom_edges.tolist(),
            "graph_edges": self.graph_edges.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _check(mesh: Mesh, A0: float):
    a = mesh.areas()
    bad = np.flatnonzero(a < 1e-14 * A0)
    if len(bad):
        raise DegenerateElement(f"{len(bad)} triangles with area < 1e-14*A0 (min {a.min():.3e})")


def build_mesh(p: Profile, ny: int, A0: float | None = None) -> Mesh:
    """Fibered mesh: ``ny`` layers on every interior node column, corners collapse to one vertex.

    Column cells left of the midpoint use one diagonal and their mirror images
    the other, so symmetric profiles give mirror-symmetric meshes.
    """
    if ny < 1:
        raise ValueError("ny must be >= 1")
    n = p.n
    x = p.x
    h = p.h
    nv = 2 + (n - 2) * (ny + 1)
    fiber = np.empty(nv, dtype=np.int64)
    eta = np.empty(nv)
    ids = np.empty((n, ny + 1), dtype=np.int64)
    ids[0, :] = 0
    ids[n - 1, :] = nv - 1
    fiber[0], eta[0] = 0, 0.0
    fiber[-1], eta[-1] = n - 1, 0.0
    layers = np.arange(ny + 1) / ny
    for j in range(1, n - 1):
        base = 1 + (j - 1) * (ny + 1)
        ids[j] = base + np.arange(ny + 1)
        fiber[ids[j]] = j
        eta[ids[j]] = layers
    verts = np.column_stack((x[fiber], eta * h[fiber]))
    verts[0, 1] = verts[-1, 1] = 0.0

    tris = []
    graph_tri = np.empty(n - 1, dtype=np.int64)
    k = np.arange(ny)
    # left corner fan
    c0 = np.column_stack((np.zeros(ny, dtype=np.int64), ids[1, k], ids[1, k + 1]))
    tris.append(c0)
    count = ny
    graph_tri[0] = ny - 1
    mid = (n - 1) / 2.0
    for j in range(1, n - 2):
        a, b = ids[j, k], ids[j + 1, k]
        c, d = ids[j + 1, k + 1], ids[j, k + 1]
        if j + 0.5 < mid:
            t = np.concatenate((np.column_stack((a, b, c)), np.column_stack((a, c, d))))
        else:
            t = np.concatenate((np.column_stack((a, b, d)), np.column_stack((b, c, d))))
        tris.append(t)
        # the second block's last layer holds the graph edge c-d
        graph_tri[j] = count + 2 * ny - 1
        count += 2 * ny
    c1 = np.column_stack((ids[n - 2, k], np.full(ny, nv - 1), ids[n - 2, k + 1]))
    tris.append(c1)
    graph_tri[n - 2] = count + ny - 1
    tris = np.concatenate(tris).astype(np.int64)

    bottom = np.column_stack((ids[:-1, 0], ids[1:, 0]))
    graph = np.column_stack((ids[:-1, ny], ids[1:, ny]))
    mesh = Mesh(
        vertices=verts,
        triangles=tris,
        bottom_edges=bottom,
        graph_edges=graph,
        dirichlet_mask=np.zeros(nv, dtype=bool),
        fiber=fiber,
        eta=eta,
        graph_tri=graph_tri,
        n=n,
        ny=ny,
    )
    mesh.dirichlet_mask = mesh.bottom_mask
    _check(mesh, A0 if A0 is not None else max(float(p.dx * h.sum()), 1e-300))
    return mesh


def rectangle_mesh(a: float, b: float, height: float, nx: int, ny: int) -> Mesh:
    """Structured rectangle [a,b]x[0,height]; Dirichlet on bottom and both lateral sides."""
    xs = np.linspace(a, b, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack((X.ravel(), Y.ravel()))
    idx = np.arange((nx + 1) * (ny + 1)).reshape(nx + 1, ny + 1)
    tris = []
    for i in range(nx):
        for j in range(ny):
            p0, p1, p2, p3 = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            tris += [(p0, p1, p2), (p0, p2, p3)]
    tris = np.array(tris, dtype=np.int64)
    bottom = np.column_stack((idx[:-1, 0], idx[1:, 0]))
    top = np.column_stack((idx[:-1, -1], idx[1:, -1]))
    mask = np.zeros(len(verts), dtype=bool)
    mask[idx[:, 0]] = True
    mask[idx[0, :]] = True
    mask[idx[-1, :]] = True
    mesh = Mesh(verts, tris, bottom, top, mask, fiber=np.full(len(verts), -1), eta=np.full(len(verts), -1.0))
    _check(mesh, (b - a) * height)
    return mesh


def refine_mesh(mesh: Mesh) -> Mesh:
    """Red refinement (every triangle split into four through edge midpoints).

    The P1 space of the result contains that of ``mesh``; Dirichlet flags are
    inherited by midpoints of boundary edges whose endpoints are both flagged.
    """
    V = mesh.vertices
    T = mesh.triangles
    edges = np.concatenate((T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]))
    key = np.sort(edges, axis=1)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    mids = 0.5 * (V[uniq[:, 0]] + V[uniq[:, 1]])
    nv = len(V)
    newV = np.vstack((V, mids))
    nt = len(T)
    m01 = nv + inv[:nt]
    m12 = nv + inv[nt : 2 * nt]
    m20 = nv + inv[2 * nt :]
    a, b, c = T[:, 0], T[:, 1], T[:, 2]
    newT = np.concatenate(
        (
            np.column_stack((a, m01, m20)),
            np.column_stack((m01, b, m12)),
            np.column_stack((m20, m12, c)),
            np.column_stack((m01, m12, m20)),
        )
    )
    lookup = {tuple(e): nv + i for i, e in enumerate(uniq)}

    def split(edges_):
        out = []
        for e0, e1 in edges_:
            m = lookup[tuple(sorted((int(e0), int(e1))))]
            out += [(e0, m), (m, e1)]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    bottom = split(mesh.bottom_edges)
    graph = split(mesh.graph_edges)
    mask = np.concatenate((mesh.dirichlet_mask, np.zeros(len(uniq), dtype=bool)))
    on_boundary = np.bincount(inv, minlength=len(uniq)) == 1
    both = mesh.dirichlet_mask[uniq[:, 0]] & mesh.dirichlet_mask[uniq[:, 1]]
    mask[nv:] = both & on_boundary
    out = Mesh(newV, newT, bottom, graph, mask, fiber=np.full(len(newV), -1), eta=np.full(len(newV), -1.0))
    _check(out, mesh.area())
    return out


def mesh_csv(mesh: Mesh, u: np.ndarray | None = None) -> str:
    buf = io.StringIO()
    buf.write("x,y,u1,u2\n")
    if u is None:
        u = np.zeros_like(mesh.vertices)
    for (x, y), (a, b) in zip(mesh.vertices, u):
        buf.write(f"{x:.17g},{y:.17g},{a:.17g},{b:.17g}\n")
    return buf.getvalue()
