"""Nodal vector fields, circulation-based edge fields, and tangent frames.

A NodalField stores one 3-vector per magnet vertex and is understood as the
continuous piecewise linear interpolant of those values. An EdgeField stores
one circulation per oriented cavity edge and reconstructs inside each tet as
a + b x x, the lowest order curl-conforming element. The TangentFrame pins
an orthonormal basis of the plane orthogonal to the magnetization at every
node; the per-step linear system is solved in those two coordinates, which
is what keeps the discrete velocity exactly tangent.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import LOCAL_EDGES
from .quadrature import EDGE_GAUSS2


@dataclass(eq=False)
class NodalField:
    coeffs: np.ndarray  # (N, 3)
    mesh: object

    def nodal_norms(self):
        return np.linalg.norm(self.coeffs, axis=1)


@dataclass(eq=False)
class EdgeField:
    coeffs: np.ndarray  # (M,)
    mesh: object


@dataclass(eq=False)
class TangentFrame:
    t1: np.ndarray  # (N, 3)
    t2: np.ndarray  # (N, 3)
    base: NodalField


def interpolate_nodal(f, mesh):
    """Sample an analytic field at the magnet vertices."""
    points = mesh.vertices[mesh.magnet_vertices]
    coeffs = np.array([f(p) for p in points], dtype=float).reshape(len(points), 3)
    return NodalField(coeffs=coeffs, mesh=mesh)


def interpolate_edge(f, mesh):
    """Circulations of an analytic field, two point Gauss per edge.

    Exact whenever the tangential component is cubic along each edge; for
    smoother data this is the interpolation-level error of the method.
    """
    p0 = mesh.vertices[mesh.edges[:, 0]]
    p1 = mesh.vertices[mesh.edges[:, 1]]
    coeffs = np.zeros(mesh.M)
    for s in EDGE_GAUSS2:
        pts = p0 + s * (p1 - p0)
        vals = np.array([f(p) for p in pts], dtype=float).reshape(len(pts), 3)
        coeffs += 0.5 * np.einsum("ex,ex->e", vals, mesh.edge_tangents)
    return EdgeField(coeffs=coeffs * mesh.edge_lengths, mesh=mesh)


def evaluate_edge_field(u, point, tet_index, tol=1e-10):
    """Reconstruct an edge field at one point of one tet."""
    mesh = u.mesh
    tet = mesh.tets[tet_index]
    grads = mesh.tet_gradients[tet_index]
    verts = mesh.vertices[tet]

    mat = np.ones((4, 4))
    mat[1:, :] = verts.T
    lam = np.linalg.solve(mat, np.array([1.0, *np.asarray(point, dtype=float)]))
    if lam.min() < -tol or lam.max() > 1.0 + tol:
        raise ValueError("point lies outside the requested tet")

    val = np.zeros(3)
    for le, (a, b) in enumerate(LOCAL_EDGES):
        c = mesh.tet_edge_signs[tet_index, le] * u.coeffs[mesh.tet_edges[tet_index, le]]
        val += c * (lam[a] * grads[b] - lam[b] * grads[a])
    return val


def edge_field_at_barycenters(u):
    """Vectorized reconstruction at every tet barycenter, (T, 3)."""
    mesh = u.mesh
    ga = mesh.tet_gradients[:, LOCAL_EDGES[:, 0], :]
    gb = mesh.tet_gradients[:, LOCAL_EDGES[:, 1], :]
    c = mesh.tet_edge_signs * u.coeffs[mesh.tet_edges]
    return np.einsum("te,tex->tx", c, 0.25 * (gb - ga))


def tangent_frame(m, norm_tol=1e-6):
    """Deterministic orthonormal frame orthogonal to m at every node.

    Rule: take the coordinate axis with the smallest magnetization
    component in absolute value (ties resolved toward the lower axis
    index), project it onto the tangent plane, normalize, and complete by
    a cross product.
    """
    coeffs = m.coeffs
    norms = np.linalg.norm(coeffs, axis=1)
    if np.abs(norms - 1.0).max() > norm_tol:
        raise ValueError("tangent frame requires unit nodal magnetization")

    axis = np.argmin(np.abs(coeffs), axis=1)
    a = np.eye(3)[axis]
    t1 = a - (np.einsum("nx,nx->n", a, coeffs))[:, None] * coeffs
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(coeffs, t1)
    return TangentFrame(t1=t1, t2=t2, base=m)


def project_normalize(m, v, dt):
    """Advance the magnetization along v and renormalize every node.

    The denominator equals sqrt(1 + dt^2 |v|^2) whenever v is tangent to m
    at the node, so it never drops below one; a small denominator therefore
    signals corrupted tangency upstream and raises.
    """
    updated = m.coeffs + dt * v.coeffs
    denom = np.linalg.norm(updated, axis=1)
    if denom.min() < 0.5:
        raise ValueError(
            "normalization denominator %.3g below 0.5, tangency was violated upstream"
            % denom.min())
    return NodalField(coeffs=updated / denom[:, None], mesh=m.mesh)
