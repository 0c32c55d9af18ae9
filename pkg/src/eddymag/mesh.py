"""Structured tetrahedral meshes of the cavity box and the magnet region.

Each grid cube is split into six tetrahedra sharing the cube's main
diagonal, the classic construction whose dihedral angles never exceed a
right angle. That property is what makes the nodal normalization step
energy-stable, and ``check_weak_acuteness`` verifies it numerically on the
assembled scalar stiffness matrix rather than trusting the construction.

Edges are stored once, oriented from the lower to the higher global vertex
index; tets reference them with a sign. A mesh is immutable after
construction and safe to share between threads.
"""

from dataclasses import dataclass, replace

import numpy as np

# Local vertex pairs that define the six edges of a tet.
LOCAL_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])

# Six positively oriented tets per cube, sharing the 0-7 diagonal.
# Corner c of a cube is the one offset by the bit pattern
# (c & 1, (c >> 1) & 1, (c >> 2) & 1) in units of the cell size.
_CUBE_TETS = np.array([
    (0, 1, 3, 7),
    (0, 5, 1, 7),
    (0, 3, 2, 7),
    (0, 2, 6, 7),
    (0, 4, 5, 7),
    (0, 6, 4, 7),
])


@dataclass(eq=False)
class Mesh:
    """Tetrahedral mesh of the cavity with an embedded magnet submesh."""

    vertices: np.ndarray        # (V, 3)
    tets: np.ndarray            # (T, 4) vertex indices, positively oriented
    edges: np.ndarray           # (M, 2) vertex index pairs, first < second
    edge_tangents: np.ndarray   # (M, 3) unit tangents, low to high vertex
    edge_lengths: np.ndarray    # (M,)
    tet_edges: np.ndarray       # (T, 6) edge index per local edge
    tet_edge_signs: np.ndarray  # (T, 6) +-1 orientation factors
    tet_volumes: np.ndarray     # (T,)
    tet_gradients: np.ndarray   # (T, 4, 3) nodal-function gradients
    ferro_mask: np.ndarray      # (T,) True where the tet lies in the magnet
    magnet_vertices: np.ndarray  # (N,) global ids of magnet vertices, sorted
    global_to_magnet: np.ndarray  # (V,) local id or -1
    h: float                    # maximal tet diameter
    box: np.ndarray             # (3, 2) cavity bounds
    cell_volume: float | None = None  # grid cell volume, uniform meshes only
    grid_n: int | None = None

    @property
    def N(self):
        return len(self.magnet_vertices)

    @property
    def M(self):
        return len(self.edges)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def magnet_tets(self):
        """Tets of the magnet region, vertices renumbered magnet-locally."""
        local = self.global_to_magnet[self.tets[self.ferro_mask]]
        if (local < 0).any():
            raise RuntimeError("magnet tet references a vertex outside the magnet map")
        return local

    @classmethod
    def from_arrays(cls, vertices, tets, box=None, ferro_tet_mask=None,
                    cell_volume=None, grid_n=None):
        """Build a mesh from raw vertex and tet arrays.

        Tets must be positively oriented. Intended for tests and small
        hand-made meshes; the uniform builder below goes through here too.
        """
        vertices = np.ascontiguousarray(vertices, dtype=float)
        tets = np.ascontiguousarray(tets, dtype=np.int64)

        coords = vertices[tets]                         # (T, 4, 3)
        mats = np.concatenate([np.ones((len(tets), 4, 1)), coords], axis=2)
        volumes = np.linalg.det(mats) / 6.0
        if not (volumes > 0).all():
            raise ValueError("all tets must have positive signed volume")
        gradients = np.linalg.inv(mats)[:, 1:, :].transpose(0, 2, 1).copy()

        pair_a = tets[:, LOCAL_EDGES[:, 0]]
        pair_b = tets[:, LOCAL_EDGES[:, 1]]
        lo = np.minimum(pair_a, pair_b)
        hi = np.maximum(pair_a, pair_b)
        flat = np.stack([lo.ravel(), hi.ravel()], axis=1)
        edges, inverse = np.unique(flat, axis=0, return_inverse=True)
        tet_edges = inverse.reshape(len(tets), 6)
        tet_edge_signs = np.where(pair_a < pair_b, 1, -1).astype(np.int8)

        vec = vertices[edges[:, 1]] - vertices[edges[:, 0]]
        lengths = np.linalg.norm(vec, axis=1)
        tangents = vec / lengths[:, None]

        diffs = coords[:, LOCAL_EDGES[:, 1]] - coords[:, LOCAL_EDGES[:, 0]]
        h = float(np.sqrt((diffs ** 2).sum(axis=2).max()))

        if box is None:
            box = np.stack([vertices.min(axis=0), vertices.max(axis=0)], axis=1)
        else:
            box = np.asarray(box, dtype=float)

        if ferro_tet_mask is None:
            ferro_tet_mask = np.ones(len(tets), dtype=bool)
        magnet_vertices, global_to_magnet = _vertex_maps(vertices, tets, ferro_tet_mask)

        return cls(
            vertices=vertices, tets=tets, edges=edges,
            edge_tangents=tangents, edge_lengths=lengths,
            tet_edges=tet_edges, tet_edge_signs=tet_edge_signs,
            tet_volumes=volumes, tet_gradients=gradients,
            ferro_mask=ferro_tet_mask,
            magnet_vertices=magnet_vertices, global_to_magnet=global_to_magnet,
            h=h, box=box, cell_volume=cell_volume, grid_n=grid_n,
        )


def _vertex_maps(vertices, tets, mask):
    magnet_vertices = np.unique(tets[mask])
    global_to_magnet = np.full(len(vertices), -1, dtype=np.int64)
    global_to_magnet[magnet_vertices] = np.arange(len(magnet_vertices))
    return magnet_vertices, global_to_magnet


def build_uniform_cube_mesh(n_per_axis, box=((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))):
    """Subdivide an axis-aligned box into n^3 cells of six tets each.

    The magnet region defaults to the whole box; use
    ``restrict_to_ferromagnet`` to shrink it.
    """
    n = int(n_per_axis)
    if n < 1:
        raise ValueError("n_per_axis must be a positive integer")
    box = np.asarray(box, dtype=float)
    if box.shape != (3, 2) or not (box[:, 1] > box[:, 0]).all():
        raise ValueError("box must be three (lo, hi) pairs with lo < hi")

    axes = [np.linspace(box[d, 0], box[d, 1], n + 1) for d in range(3)]
    zz, yy, xx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    vertices = np.stack([xx, yy, zz], axis=-1).reshape(-1, 3)

    kk, jj, ii = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()

    def vid(i, j, k):
        return i + (n + 1) * (j + (n + 1) * k)

    corners = np.stack(
        [vid(ii + (c & 1), jj + ((c >> 1) & 1), kk + ((c >> 2) & 1)) for c in range(8)],
        axis=1)                                          # (cubes, 8)
    tets = corners[:, _CUBE_TETS].reshape(-1, 4)

    spacing = (box[:, 1] - box[:, 0]) / n
    mesh = Mesh.from_arrays(vertices, tets, box=box,
                            cell_volume=float(np.prod(spacing)), grid_n=n)

    total = mesh.tet_volumes.sum()
    target = float(np.prod(box[:, 1] - box[:, 0]))
    if abs(total - target) > 1e-12 * target:
        raise RuntimeError("tet volumes do not tile the box")
    return mesh


def restrict_to_ferromagnet(mesh, d_box):
    """Return a mesh whose magnet region is the given axis-aligned box.

    The box faces must lie on mesh planes so that no tet straddles the
    magnet boundary.
    """
    d_box = np.asarray(d_box, dtype=float)
    if d_box.shape != (3, 2) or not (d_box[:, 1] > d_box[:, 0]).all():
        raise ValueError("d_box must be three (lo, hi) pairs with lo < hi")

    scale = float((mesh.box[:, 1] - mesh.box[:, 0]).max())
    for d in range(3):
        grid_coords = np.unique(mesh.vertices[:, d])
        for val in d_box[d]:
            if np.abs(grid_coords - val).min() > 1e-9 * scale:
                raise ValueError(
                    "d_box face at coordinate %g (axis %d) is not on a mesh plane"
                    % (val, d))

    centers = mesh.vertices[mesh.tets].mean(axis=1)
    mask = np.ones(len(mesh.tets), dtype=bool)
    for d in range(3):
        mask &= (centers[:, d] > d_box[d, 0]) & (centers[:, d] < d_box[d, 1])

    marked = float(mesh.tet_volumes[mask].sum())
    target = float(np.prod(d_box[:, 1] - d_box[:, 0]))
    if abs(marked - target) > 1e-12 * max(target, 1.0):
        raise ValueError("magnet box is not a union of mesh cells")

    magnet_vertices, global_to_magnet = _vertex_maps(mesh.vertices, mesh.tets, mask)
    return replace(mesh, ferro_mask=mask, magnet_vertices=magnet_vertices,
                   global_to_magnet=global_to_magnet)


@dataclass
class AcutenessReport:
    ok: bool
    worst_offdiag: float


def check_weak_acuteness(mesh, tol=1e-14):
    """Inspect the magnet-region scalar stiffness matrix off-diagonal signs.

    Nonpositive off-diagonal entries are what the normalization stability
    argument needs; the report carries the worst offender.
    """
    from .assembly import assemble_p1_stiffness

    stiff = assemble_p1_stiffness(mesh).tocoo()
    off = stiff.row != stiff.col
    worst = float(stiff.data[off].max()) if off.any() else 0.0
    return AcutenessReport(ok=worst <= tol, worst_offdiag=worst)
