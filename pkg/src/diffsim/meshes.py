"""Mesh containers, primitive generators, and Wavefront OBJ / .tet file IO.

Tet meshes pair an OBJ file (vertices + optional surface faces) with an
adjacent ``.tet`` index file containing one ``t i j k l`` line per element
(0-based indices).
"""

import os

import numpy as np


class TetMesh:
    """Tetrahedral mesh with precomputed rest-shape data.

    rest_positions: (N, 3) rest vertex positions [m]
    tets: (M, 4) vertex indices, positively oriented (V_e > 0)
    """

    def __init__(self, rest_positions, tets):
        self.rest_positions = np.asarray(rest_positions, dtype=np.float64)
        self.tets = np.asarray(tets, dtype=np.int64)
        x = self.rest_positions
        t = self.tets
        Dm = np.stack(
            [x[t[:, 1]] - x[t[:, 0]], x[t[:, 2]] - x[t[:, 0]], x[t[:, 3]] - x[t[:, 0]]],
            axis=2,
        )
        vol = np.linalg.det(Dm) / 6.0
        if np.any(vol <= 0):
            bad = int(np.argmax(vol <= 0))
            raise ValueError(f"tet {bad} has non-positive rest volume {vol[bad]:g}")
        self.Dm_inv = np.linalg.inv(Dm)
        self.rest_volume = vol
        self.surface = boundary_faces(self.tets)

    @property
    def num_vertices(self):
        return self.rest_positions.shape[0]

    @property
    def num_elements(self):
        return self.tets.shape[0]


class TriShellMesh:
    """Triangle mesh for thin shells with hinge (interior edge) data.

    Interior edges are stored as (E, 4) index rows [w0, w1, e0, e1]:
    e0-e1 is the shared edge, w0/w1 the opposite "wing" vertices of the two
    incident triangles. rest_dihedral holds the signed rest angle per edge.
    """

    def __init__(self, rest_positions, triangles):
        self.rest_positions = np.asarray(rest_positions, dtype=np.float64)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        x = self.rest_positions
        tri = self.triangles
        e1 = x[tri[:, 1]] - x[tri[:, 0]]
        e2 = x[tri[:, 2]] - x[tri[:, 0]]
        n = np.cross(e1, e2)
        self.rest_area = 0.5 * np.linalg.norm(n, axis=1)
        if np.any(self.rest_area <= 0):
            raise ValueError("degenerate rest triangle")
        # local 2D frame per triangle: columns of Dm are edge vectors in that frame
        u = e1 / np.linalg.norm(e1, axis=1, keepdims=True)
        nrm = n / np.linalg.norm(n, axis=1, keepdims=True)
        v = np.cross(nrm, u)
        Dm = np.empty((tri.shape[0], 2, 2))
        Dm[:, 0, 0] = np.sum(e1 * u, axis=1)
        Dm[:, 1, 0] = np.sum(e1 * v, axis=1)
        Dm[:, 0, 1] = np.sum(e2 * u, axis=1)
        Dm[:, 1, 1] = np.sum(e2 * v, axis=1)
        self.Dm_inv = np.linalg.inv(Dm)
        self.edges = interior_edges(self.triangles)
        from .dynamics.shell import dihedral_angles

        if len(self.edges):
            self.rest_dihedral = dihedral_angles(self.rest_positions, self.edges)
        else:
            self.rest_dihedral = np.zeros(0)

    @property
    def num_vertices(self):
        return self.rest_positions.shape[0]

    @property
    def num_elements(self):
        return self.triangles.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]


def boundary_faces(tets):
    """Outward-oriented boundary triangles of a tet mesh."""
    # faces of tet (i,j,k,l) wound so normals point out of the element
    faces = np.concatenate(
        [
            tets[:, [0, 2, 1]],
            tets[:, [0, 1, 3]],
            tets[:, [0, 3, 2]],
            tets[:, [1, 2, 3]],
        ]
    )
    key = np.sort(faces, axis=1)
    _, idx, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    return faces[idx[counts == 1]]


def interior_edges(triangles):
    """Hinge records [w0, w1, e0, e1] for edges shared by exactly 2 triangles."""
    edge_map = {}
    for t in triangles:
        for a, b, w in ((t[0], t[1], t[2]), (t[1], t[2], t[0]), (t[2], t[0], t[1])):
            key = (min(a, b), max(a, b))
            edge_map.setdefault(key, []).append((int(a), int(b), int(w)))
    rows = []
    for key, tris in edge_map.items():
        if len(tris) > 2:
            raise ValueError(f"edge {key} shared by {len(tris)} triangles")
        if len(tris) != 2:
            continue
        (a, b, w0), (_, _, w1) = tris
        rows.append((w0, w1, a, b))
    if not rows:
        return np.zeros((0, 4), dtype=np.int64)
    return np.array(sorted(rows), dtype=np.int64)


# ---------------------------------------------------------------------------
# primitive generators


def box_tet_mesh(nx, ny, nz, size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    """Axis-aligned box split into a (nx, ny, nz) grid of 5-tet cubes."""
    sx, sy, sz = size
    ox, oy, oz = origin
    gx = np.linspace(0, sx, nx + 1) + ox
    gy = np.linspace(0, sy, ny + 1) + oy
    gz = np.linspace(0, sz, nz + 1) + oz
    vid = lambda i, j, k: (i * (ny + 1) + j) * (nz + 1) + k
    verts = np.array([[gx[i], gy[j], gz[k]]
                      for i in range(nx + 1) for j in range(ny + 1) for k in range(nz + 1)])
    tets = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = [vid(i + a, j + b, k + d)
                     for a in range(2) for b in range(2) for d in range(2)]
                # corner order: (x,y,z) bits -> index a*4 + b*2 + d
                if (i + j + k) % 2 == 0:
                    cells = [(0, 1, 2, 4), (1, 2, 3, 7), (1, 4, 5, 7), (2, 4, 6, 7), (1, 2, 4, 7)]
                else:
                    cells = [(0, 1, 3, 5), (0, 2, 3, 6), (0, 4, 5, 6), (3, 5, 6, 7), (0, 3, 5, 6)]
                for cell in cells:
                    tets.append([c[m] for m in cell])
    tets = np.array(tets)
    # fix orientation so all volumes are positive
    d0 = verts[tets[:, 1]] - verts[tets[:, 0]]
    d1 = verts[tets[:, 2]] - verts[tets[:, 0]]
    d2 = verts[tets[:, 3]] - verts[tets[:, 0]]
    vol = np.einsum("ij,ij->i", np.cross(d0, d1), d2)
    flip = vol < 0
    tets[flip] = tets[flip][:, [0, 2, 1, 3]]
    return TetMesh(verts, tets)


def cloth_grid(nx, ny, size=(1.0, 1.0), origin=(0.0, 0.0, 0.0), plane="xz"):
    """Regular cloth grid of 2*nx*ny triangles lying in the given plane."""
    sx, sy = size
    ax = {"xz": (0, 2), "xy": (0, 1), "yz": (1, 2)}[plane]
    verts = np.zeros(((nx + 1) * (ny + 1), 3))
    for i in range(nx + 1):
        for j in range(ny + 1):
            p = np.array(origin, dtype=np.float64)
            p[ax[0]] += sx * i / nx
            p[ax[1]] += sy * j / ny
            verts[i * (ny + 1) + j] = p
    tris = []
    vid = lambda i, j: i * (ny + 1) + j
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append([a, b, c])
            tris.append([a, c, d])
    return TriShellMesh(verts, np.array(tris))


def box_surface(extents=(1.0, 1.0, 1.0)):
    """Triangulated box surface centered at the origin: (verts, tris)."""
    ex, ey, ez = [0.5 * e for e in extents]
    verts = np.array([[sx * ex, sy * ey, sz * ez]
                      for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    tris = []
    for a, b, c, d in quads:
        tris.append([a, b, c])
        tris.append([a, c, d])
    return verts, np.array(tris)


def box_unit_inertia(extents=(1.0, 1.0, 1.0)):
    """Inertia tensor of a unit-mass solid box about its center."""
    ex, ey, ez = extents
    return np.diag([(ey**2 + ez**2) / 12.0, (ex**2 + ez**2) / 12.0, (ex**2 + ey**2) / 12.0])


# ---------------------------------------------------------------------------
# file IO


def load_obj(path):
    """Minimal OBJ loader (v/f lines only). Returns (verts, tris)."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate
                    faces.append([idx[0], idx[k], idx[k + 1]])
    return np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64)


def save_obj(path, verts, tris=None):
    with open(path, "w") as fh:
        for v in verts:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        if tris is not None:
            for t in tris:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def load_tet_file(path):
    """Load `t i j k l` element lines (0-based)."""
    tets = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts and parts[0] == "t":
                tets.append([int(p) for p in parts[1:5]])
    return np.array(tets, dtype=np.int64)


def save_tet_file(path, tets):
    with open(path, "w") as fh:
        for t in tets:
            fh.write(f"t {t[0]} {t[1]} {t[2]} {t[3]}\n")


def load_tet_mesh(obj_path):
    """Load an OBJ + adjacent .tet file as a TetMesh."""
    verts, _ = load_obj(obj_path)
    tet_path = os.path.splitext(obj_path)[0] + ".tet"
    return TetMesh(verts, load_tet_file(tet_path))
