"""Sparse bilinear forms and the coupled per-step linear system.

Unknown ordering throughout: [frame-1 nodal coefficients (N) | frame-2
nodal coefficients (N) | edge circulations (M)]. The velocity is expanded
in the two tangent frame directions per node, which eliminates the
pointwise orthogonality constraint and yields a square (2N+M) system per
time step.

Quadrature policy: closed forms for the piecewise linear mass and
stiffness, a degree-2 rule for quadratic integrands (edge mass, velocity
to field coupling), and a degree-3 rule for the cubic triple-product term.
All are exact for their integrands, so the discrete energy identities hold
to roundoff; the degree arguments exist so tests can confirm that raising
the order changes nothing.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_EDGES
from .quadrature import tet_rule


def validate_params(params):
    if params.damping <= 0:
        raise ValueError("damping must be positive")
    if params.dt <= 0:
        raise ValueError("time step must be positive")
    if not 0.0 <= params.theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if params.permeability <= 0:
        raise ValueError("permeability must be positive")
    if params.conductivity < 0:
        raise ValueError("conductivity must be nonnegative")


def _magnet_parts(mesh):
    mask = mesh.ferro_mask
    return (mesh.magnet_tets, mesh.tet_volumes[mask], mesh.tet_gradients[mask])


def assemble_p1_mass(mesh):
    """Consistent scalar mass on the magnet region, exact closed form."""
    tets, vols, _ = _magnet_parts(mesh)
    base = (np.ones((4, 4)) + np.eye(4)) / 20.0
    local = vols[:, None, None] * base
    rows = np.broadcast_to(tets[:, :, None], local.shape)
    cols = np.broadcast_to(tets[:, None, :], local.shape)
    n = mesh.N
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(n, n)).tocsr()


def assemble_p1_stiffness(mesh):
    """Scalar stiffness on the magnet region; gradients are constant per tet."""
    tets, vols, grads = _magnet_parts(mesh)
    local = np.einsum("t,tax,tbx->tab", vols, grads, grads)
    rows = np.broadcast_to(tets[:, :, None], local.shape)
    cols = np.broadcast_to(tets[:, None, :], local.shape)
    n = mesh.N
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(n, n)).tocsr()


def _edge_basis_at_points(grads, signs, lam):
    """Signed edge basis values, (T, 6, P, 3) for P rule points."""
    ga = grads[:, LOCAL_EDGES[:, 0], :]
    gb = grads[:, LOCAL_EDGES[:, 1], :]
    la = lam[:, LOCAL_EDGES[:, 0]]
    lb = lam[:, LOCAL_EDGES[:, 1]]
    psi = np.einsum("pe,tex->tepx", la, gb) - np.einsum("pe,tex->tepx", lb, ga)
    return psi * signs[:, :, None, None]


def assemble_edge_mass(mesh, degree=2):
    lam, w = tet_rule(degree)
    psi = _edge_basis_at_points(mesh.tet_gradients, mesh.tet_edge_signs, lam)
    local = np.einsum("t,p,tepx,tfpx->tef", mesh.tet_volumes, w, psi, psi)
    rows = np.broadcast_to(mesh.tet_edges[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.tet_edges[:, None, :], local.shape)
    m = mesh.M
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(m, m)).tocsr()


def assemble_curlcurl(mesh):
    """Curl-curl form; edge basis curls are constant per tet."""
    ga = mesh.tet_gradients[:, LOCAL_EDGES[:, 0], :]
    gb = mesh.tet_gradients[:, LOCAL_EDGES[:, 1], :]
    curls = 2.0 * np.cross(ga, gb) * mesh.tet_edge_signs[:, :, None]
    local = np.einsum("t,tex,tfx->tef", mesh.tet_volumes, curls, curls)
    rows = np.broadcast_to(mesh.tet_edges[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.tet_edges[:, None, :], local.shape)
    m = mesh.M
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(m, m)).tocsr()


def coupling_triplets(mesh, degree=2):
    """Raw (node, edge, 3-vector) integrals of edge basis times nodal basis.

    Integration runs over magnet tets only, which is the zero extension of
    the velocity into the cavity. Returned triplets are unaccumulated.
    """
    tets, vols, grads = _magnet_parts(mesh)
    signs = mesh.tet_edge_signs[mesh.ferro_mask]
    edge_ids = mesh.tet_edges[mesh.ferro_mask]
    lam, w = tet_rule(degree)
    psi = _edge_basis_at_points(grads, signs, lam)
    vecs = np.einsum("t,p,pc,tepx->tcex", vols, w, lam, psi)
    rows = np.broadcast_to(tets[:, :, None], vecs.shape[:3])
    cols = np.broadcast_to(edge_ids[:, None, :], vecs.shape[:3])
    return rows.ravel(), cols.ravel(), vecs.reshape(-1, 3)


def assemble_coupling(mesh, frame, degree=2):
    """2N x M coupling of frame-expanded nodal basis with the edge basis."""
    rows, cols, vecs = coupling_triplets(mesh, degree)
    return _coupling_from_triplets(mesh, (rows, cols, vecs), frame)


def _coupling_from_triplets(mesh, triplets, frame):
    rows, cols, vecs = triplets
    n, m = mesh.N, mesh.M
    vals1 = np.einsum("ex,ex->e", frame.t1[rows], vecs)
    vals2 = np.einsum("ex,ex->e", frame.t2[rows], vecs)
    all_rows = np.concatenate([rows, rows + n])
    all_cols = np.concatenate([cols, cols])
    all_vals = np.concatenate([vals1, vals2])
    return sp.coo_matrix((all_vals, (all_rows, all_cols)), shape=(2 * n, m)).tocsr()


def assemble_cross_term(m, frame, degree=3):
    """Skew 2N x 2N matrix of the magnetization cross-product form.

    Entry ((i,n),(j,p)) integrates phi_p phi_n ((m x t_{p,j}) . t_{n,i})
    over the magnet; the interpolated magnetization makes the integrand
    cubic.
    """
    mesh = m.mesh
    tets, vols, _ = _magnet_parts(mesh)
    lam, w = tet_rule(degree)
    frames = np.stack([frame.t1, frame.t2], axis=1)        # (N, 2, 3)
    ta = frames[tets]                                      # (T, 4, 2, 3)
    mv = m.coeffs[tets]                                    # (T, 4, 3)
    mq = np.einsum("pc,tcx->tpx", lam, mv)                 # field at rule points
    crossm = np.cross(mq[:, :, None, None, :], ta[:, None, :, :, :])
    pair = np.einsum("p,pa,pb->pab", w, lam, lam)
    local = np.einsum("t,pab,taix,tpbjx->taibj", vols, pair, ta, crossm)

    n = mesh.N
    shifted = tets[:, :, None] + np.arange(2) * n          # (T, 4, 2)
    rows = np.broadcast_to(shifted[:, :, :, None, None], local.shape)
    cols = np.broadcast_to(shifted[:, None, None, :, :], local.shape)
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(2 * n, 2 * n)).tocsr()


def _frame_expand(triplets, frames, n):
    """Scale scalar-form triplets by per-node frame dot products, 2N x 2N."""
    rows, cols, vals = triplets
    fr = frames[rows]                                      # (nnz, 2, 3)
    fc = frames[cols]
    dots = np.einsum("eix,ejx->eij", fr, fc)               # (nnz, 2, 2)
    out_rows = []
    out_cols = []
    out_vals = []
    for i in range(2):
        for j in range(2):
            out_rows.append(rows + i * n)
            out_cols.append(cols + j * n)
            out_vals.append(vals * dots[:, i, j])
    return sp.coo_matrix(
        (np.concatenate(out_vals), (np.concatenate(out_rows), np.concatenate(out_cols))),
        shape=(2 * n, 2 * n)).tocsr()


def tangent_load(scalar_stiffness, m, frame):
    """Frame components of the exchange load built from the current state."""
    load = scalar_stiffness @ m.coeffs                     # (N, 3)
    return np.concatenate([
        np.einsum("nx,nx->n", load, frame.t1),
        np.einsum("nx,nx->n", load, frame.t2),
    ])


@dataclass
class StepSystem:
    """Sparse matrix and right-hand side for one time step's coupled solve."""
    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_nodes: int
    n_edges: int


class StepAssembler:
    """Caches everything about a mesh that does not change between steps."""

    def __init__(self, mesh):
        self.mesh = mesh
        mass = assemble_p1_mass(mesh).tocoo()
        self._mass_triplets = (mass.row, mass.col, mass.data)
        stiff = assemble_p1_stiffness(mesh)
        self.scalar_mass = mass.tocsr()
        self.scalar_stiffness = stiff
        stiff_coo = stiff.tocoo()
        self._stiff_triplets = (stiff_coo.row, stiff_coo.col, stiff_coo.data)
        self.edge_mass = assemble_edge_mass(mesh)
        self.curlcurl = assemble_curlcurl(mesh)
        self._coupling = coupling_triplets(mesh)
        self._field_cache = {}

    def field_operators(self, params):
        """(A22, mass part, curl part) for the current parameter set."""
        key = (params.dt, params.permeability, params.conductivity)
        if key not in self._field_cache:
            me_scaled = (params.permeability / params.dt) * self.edge_mass
            kcc_scaled = (params.conductivity / 2.0) * self.curlcurl
            self._field_cache[key] = (
                (me_scaled + kcc_scaled).tocsr(), me_scaled.tocsr(), kcc_scaled.tocsr())
        return self._field_cache[key]

    def build(self, m, h_prev, frame, params, cross_degree=3):
        validate_params(params)
        mesh = self.mesh
        n = mesh.N
        mu = params.precession ** 2 + params.damping ** 2

        frames = np.stack([frame.t1, frame.t2], axis=1)
        mt = _frame_expand(self._mass_triplets, frames, n)
        kt = _frame_expand(self._stiff_triplets, frames, n)
        a11 = params.damping * mt + (params.dt * params.theta * mu) * kt
        if params.precession != 0.0:
            a11 = a11 - params.precession * assemble_cross_term(m, frame, cross_degree)

        b = _coupling_from_triplets(mesh, self._coupling, frame)
        a12 = (-mu / 2.0) * b
        a21 = params.permeability * b.T.tocsr()
        a22, me_scaled, kcc_scaled = self.field_operators(params)

        matrix = sp.bmat([[a11, a12], [a21, a22]], format="csr")

        eta = h_prev.coeffs
        rhs = np.empty(2 * n + mesh.M)
        rhs[: 2 * n] = -mu * tangent_load(self.scalar_stiffness, m, frame) \
            + (mu / 2.0) * (b @ eta)
        rhs[2 * n:] = me_scaled @ eta - kcc_scaled @ eta
        return StepSystem(matrix=matrix, rhs=rhs, n_nodes=n, n_edges=mesh.M)


def build_step_system(m, h_prev, frame, params):
    """One-shot system build; use a StepAssembler for repeated steps."""
    return StepAssembler(m.mesh).build(m, h_prev, frame, params)


def dump_matrix_market(matrix, path):
    from scipy.io import mmwrite
    mmwrite(str(path), matrix)
