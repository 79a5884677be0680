"""Time the numpy and compiled kernel backends on the same mesh.

    python3 benchmarks/bench_kernels.py [--nodes 201] [--layers 8] [--repeat 5]

Prints one row per kernel with the best-of-N wall time of each backend and
the speedup, after checking that both backends agree.
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from dewet.elasticity.mesh import build_mesh
from dewet.kernels import backends
from dewet.params import PhysicalParams
from dewet.profile import cosine_bump


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def workloads(mod, mesh, prm, Kff, b):
    V, T = mesh.vertices, mesh.triangles
    ip, ix = Kff.indptr.astype(np.int64), Kff.indices.astype(np.int64)
    u = np.random.default_rng(0).standard_normal(V.shape)
    x = np.random.default_rng(1).standard_normal(Kff.shape[0])
    return {
        "p1_gradients": lambda: mod.p1_gradients(V, T)[0],
        "assemble_elasticity": lambda: mod.assemble_elasticity(V, T, prm.lam, prm.mu)[2],
        "csr_matvec": lambda: mod.csr_matvec(ip, ix, Kff.data, x),
        "pcg": lambda: mod.pcg(ip, ix, Kff.data, b, np.zeros_like(b), 1e-10, 100000)[0],
        "element_forces": lambda: mod.element_forces(V, T, u, prm.lam, prm.mu)[1],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=201)
    ap.add_argument("--layers", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    prm = PhysicalParams()
    mesh = build_mesh(cosine_bump(args.nodes, prm.A0, 2.0), args.layers)
    ref = backends()["numpy"]
    r, c, v = ref.assemble_elasticity(mesh.vertices, mesh.triangles, prm.lam, prm.mu)
    N = 2 * len(mesh.vertices)
    K = sp.coo_matrix((v, (r, c)), shape=(N, N)).tocsr()
    free = ~np.repeat(mesh.dirichlet_mask, 2)
    Kff = K[free][:, free].tocsr()
    Kff.sort_indices()
    b = Kff @ np.ones(Kff.shape[0])

    mods = backends()
    print(f"mesh: {len(mesh.vertices)} vertices, {len(mesh.triangles)} triangles, {Kff.shape[0]} free dofs")
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name in mods) + (f"{'speedup':>10}" if len(mods) > 1 else ""))
    loads = {name: workloads(mod, mesh, prm, Kff, b) for name, mod in mods.items()}
    for kernel in loads["numpy"]:
        times, outs = {}, {}
        for name in mods:
            times[name], outs[name] = best_of(loads[name][kernel], args.repeat)
        if "cython" in outs:
            a, z = np.asarray(outs["numpy"]), np.asarray(outs["cython"])
            err = np.max(np.abs(a - z)) / max(np.max(np.abs(a)), 1e-300)
            assert err < 1e-8, f"{kernel}: backends disagree ({err:.2e})"
        row = f"{kernel:<22}" + "".join(f"{times[name] * 1e3:>10.3f}ms" for name in mods)
        if "cython" in times:
            row += f"{times['numpy'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
