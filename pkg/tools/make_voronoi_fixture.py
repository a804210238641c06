"""Generate the 25-cell Voronoi mesh of the unit square used by the patch tests.

Seeds are mirrored across the four sides so that the Voronoi regions of the
original seeds are bounded exactly by the square.

    python tools/make_voronoi_fixture.py tests/data/voronoi25.json
"""

import sys

import numpy as np
from scipy.spatial import Voronoi

from polyvem.mesh import build_mesh, save_mesh


def voronoi_unit_square(n_cells: int, seed: int):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.05, 0.95, size=(n_cells, 2))
    mirrored = [pts]
    for axis in (0, 1):
        for side in (0.0, 1.0):
            m = pts.copy()
            m[:, axis] = 2.0 * side - m[:, axis]
            mirrored.append(m)
    vor = Voronoi(np.vstack(mirrored))

    # merge Voronoi vertices that coincide up to round-off
    keys, verts, remap = {}, [], {}
    for i, v in enumerate(vor.vertices):
        v = np.clip(v, 0.0, 1.0) if np.all((v > -1e-9) & (v < 1 + 1e-9)) else v
        key = tuple(np.round(v, 9))
        if key not in keys:
            keys[key] = len(verts)
            verts.append(v)
        remap[i] = keys[key]

    cells = []
    for c in range(n_cells):
        region = vor.regions[vor.point_region[c]]
        loop = []
        for i in region:
            j = remap[i]
            if not loop or loop[-1] != j:
                loop.append(j)
        if loop[0] == loop[-1]:
            loop.pop()
        cells.append(loop)

    used = sorted({i for loop in cells for i in loop})
    new = {old: k for k, old in enumerate(used)}
    verts = np.array([verts[i] for i in used])
    cells = [[new[i] for i in loop] for loop in cells]

    tags = {"bottom": [], "right": [], "top": [], "left": []}
    mesh = build_mesh(verts, cells)
    for a, b in mesh.boundary_edges():
        mid = 0.5 * (verts[a] + verts[b])
        side = min(
            (("bottom", mid[1]), ("right", 1.0 - mid[0]), ("top", 1.0 - mid[1]), ("left", mid[0])),
            key=lambda s: abs(s[1]))[0]
        tags[side].append((a, b))
    return build_mesh(verts, cells, tags)


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/data/voronoi25.json"
    mesh = voronoi_unit_square(25, seed=7)
    save_mesh(mesh, out)
    print(f"{out}: {mesh.n_cells} cells, {mesh.n_vertices} vertices, area {mesh.total_area():.15f}")
