"""P1 finite elements for the Lamé system with mismatch Dirichlet data on the substrate."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import SingularSystem, SolverDiverged
from ..kernels import assemble_elasticity, element_forces, p1_gradients, pcg
from ..params import PhysicalParams
from ..profile import Profile
from ..surface import ProfileGradient
from .mesh import Mesh, build_mesh

RTOL = 1e-10


def stress(xi, lam: float, mu: float) -> np.ndarray:
    """C xi = mu (xi + xi^T) + lam tr(xi) I for one or a stack of 2x2 matrices."""
    xi = np.asarray(xi, dtype=float)
    tr = np.trace(xi, axis1=-2, axis2=-1)
    return mu * (xi + np.swapaxes(xi, -1, -2)) + lam * tr[..., None, None] * np.eye(2)


def energy_density(xi, params: PhysicalParams | None = None, lam: float | None = None, mu: float | None = None):
    """W(xi) = 1/2 C xi : xi."""
    if params is not None:
        lam, mu = params.lam, params.mu
    xi = np.asarray(xi, dtype=float)
    return 0.5 * np.sum(stress(xi, lam, mu) * xi, axis=(-2, -1))


def density_bounds(lam: float, mu: float) -> tuple[float, float]:
    """Sharp constants c, C with c|sym xi|^2 <= W(xi) <= C|sym xi|^2 (eigenvalues of C/2 on symmetric tensors)."""
    return min(mu, mu + lam), max(mu, mu + lam)


@dataclass
class DisplacementField:
    mesh: Mesh
    u: np.ndarray
    dirichlet_mask: np.ndarray
    reaction: np.ndarray = field(default=None, repr=False)
    iterations: int = 0
    relres: float = 0.0

    def gradients(self) -> np.ndarray:
        """Constant displacement gradient per triangle, du_i/dx_j."""
        _, g = p1_gradients(self.mesh.vertices, self.mesh.triangles)
        return np.einsum("tbi,tbj->tij", self.u[self.mesh.triangles], g)

    def to_csv(self) -> str:
        from .mesh import mesh_csv

        return mesh_csv(self.mesh, self.u)

    def to_json(self) -> str:
        d = self.mesh.to_dict()
        d["u"] = self.u.tolist()
        d["dirichlet"] = np.flatnonzero(self.dirichlet_mask).tolist()
        return json.dumps(d)


def mismatch_data(mesh: Mesh, params: PhysicalParams) -> np.ndarray:
    """Substrate data u = (e0 x, 0) at every vertex (only Dirichlet entries are used)."""
    g = np.zeros_like(mesh.vertices)
    g[:, 0] = params.e0 * mesh.vertices[:, 0]
    return g


def stiffness(mesh: Mesh, params: PhysicalParams) -> sp.csr_matrix:
    rows, cols, vals = assemble_elasticity(mesh.vertices, mesh.triangles, params.lam, params.mu)
    N = 2 * len(mesh.vertices)
    K = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    K.sum_duplicates()
    return K


def solve_lame(
    mesh: Mesh,
    params: PhysicalParams,
    dirichlet: np.ndarray | None = None,
    x0: np.ndarray | None = None,
    rtol: float = RTOL,
) -> DisplacementField:
    """Minimize the P1 elastic energy with u fixed on ``mesh.dirichlet_mask``.

    ``dirichlet`` gives prescribed values per vertex (defaults to the
    mismatch data); ``x0`` is an optional warm start for the free dofs.
    """
    mask = mesh.dirichlet_mask
    if not mask.any():
        raise SingularSystem("no Dirichlet vertices: rigid motions are not excluded")
    g = mismatch_data(mesh, params) if dirichlet is None else np.asarray(dirichlet, dtype=float)
    K = stiffness(mesh, params)
    fixed = np.repeat(mask, 2)
    free = ~fixed
    u = np.zeros(2 * len(mesh.vertices))
    u[fixed] = g.reshape(-1)[fixed]
    Kff = K[free][:, free].tocsr()
    Kff.sort_indices()
    b = -(K[free][:, fixed] @ u[fixed])
    nfree = int(free.sum())
    it, relres = 0, 0.0
    if nfree:
        start = np.zeros(nfree) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)[free]
        cap = int(50 * math.sqrt(nfree) + 1000)
        xf, it, relres = pcg(
            Kff.indptr.astype(np.int64), Kff.indices.astype(np.int64), Kff.data, b, start, rtol, cap
        )
        if it < 0:
            raise SingularSystem("constrained stiffness is not positive definite")
        if it > cap:
            raise SolverDiverged(f"CG hit the iteration cap {cap} (relres {relres:.3e})")
        u[free] = xf
    reaction = (K @ u).reshape(-1, 2)
    reaction[~mask] = 0.0
    return DisplacementField(mesh, u.reshape(-1, 2), mask.copy(), reaction, it, relres)


def element_energies(f: DisplacementField, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray]:
    """(areas, W) per triangle."""
    area = f.mesh.areas()
    W, _ = element_forces(f.mesh.vertices, f.mesh.triangles, f.u, params.lam, params.mu)
    return area, W


def elastic_energy(f: DisplacementField, params: PhysicalParams) -> float:
    area, W = element_energies(f, params)
    return float(np.dot(area, W))


def boundary_energy_trace(f: DisplacementField, p: Profile, params: PhysicalParams) -> np.ndarray:
    """Nodal W(Eu) on the graph from the top-layer triangles, averaged where two meet."""
    mesh = f.mesh
    if mesh.graph_tri is None or mesh.n != p.n:
        raise ValueError("field was not solved on a mesh built from this profile")
    _, W = element_energies(f, params)
    seg = W[mesh.graph_tri]
    out = np.empty(p.n)
    out[0], out[-1] = seg[0], seg[-1]
    out[1:-1] = 0.5 * (seg[:-1] + seg[1:])
    return out


def korn_ratio(f: DisplacementField, params: PhysicalParams) -> float:
    """int |grad u|^2 / (int |Eu|^2 + e0^2 |Omega|); 0 for the zero field."""
    area = f.mesh.areas()
    G = f.gradients()
    E = 0.5 * (G + np.swapaxes(G, 1, 2))
    num = float(np.dot(area, np.sum(G * G, axis=(1, 2))))
    den = float(np.dot(area, np.sum(E * E, axis=(1, 2)))) + params.e0**2 * float(area.sum())
    if den == 0.0:
        return 0.0
    return num / den


def vertex_shape_forces(f: DisplacementField, params: PhysicalParams) -> np.ndarray:
    """dE/dX per vertex for the solved field, including the moving Dirichlet data (e0 x, 0)."""
    mesh = f.mesh
    _, F = element_forces(mesh.vertices, mesh.triangles, f.u, params.lam, params.mu)
    out = np.zeros_like(mesh.vertices)
    np.add.at(out, mesh.triangles.ravel(), F.reshape(-1, 2))
    out[:, 0] += params.e0 * f.reaction[:, 0]
    return out


def elastic_gradient(f: DisplacementField, p: Profile, params: PhysicalParams) -> ProfileGradient:
    """Gradient of the minimal elastic energy with respect to (alpha, beta, nodal h).

    Vertices follow the profile as x = alpha + s (beta - alpha), y = eta h(s).
    """
    mesh = f.mesh
    F = vertex_shape_forces(f, params)
    s = mesh.fiber / (p.n - 1)
    gh = np.bincount(mesh.fiber, weights=F[:, 1] * mesh.eta, minlength=p.n)
    ga = float(np.dot(F[:, 0], 1.0 - s))
    gb = float(np.dot(F[:, 0], s))
    return ProfileGradient(gh, ga, gb)


def solve_profile(p: Profile, params: PhysicalParams, ny: int, x0=None, rtol: float = RTOL) -> DisplacementField:
    """Mesh the film under ``p`` and solve."""
    return solve_lame(build_mesh(p, ny, params.A0), params, x0=x0, rtol=rtol)

