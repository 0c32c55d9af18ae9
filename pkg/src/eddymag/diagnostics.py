"""Monitored norms, the discrete energy, and the cumulative energy ledger.

The ledger is the runtime form of the scheme's stability statement: the
discrete energy plus all accumulated dissipation must never exceed the
initial energy (up to a small relative slack absorbing solver residuals).
Violations are reported, not raised, because the explicit end of the theta
range is allowed to be unstable and observing that is itself an experiment.
"""

from dataclasses import dataclass

import numpy as np

from . import assembly

LEDGER_RTOL = 1e-8


class DiagnosticContext:
    """Caches the quadratic-form matrices used by the monitors."""

    def __init__(self, mesh, scalar_mass=None, scalar_stiffness=None,
                 edge_mass=None, curlcurl=None):
        self.mesh = mesh
        self.scalar_mass = scalar_mass if scalar_mass is not None \
            else assembly.assemble_p1_mass(mesh)
        self.scalar_stiffness = scalar_stiffness if scalar_stiffness is not None \
            else assembly.assemble_p1_stiffness(mesh)
        self.edge_mass = edge_mass if edge_mass is not None \
            else assembly.assemble_edge_mass(mesh)
        self.curlcurl = curlcurl if curlcurl is not None \
            else assembly.assemble_curlcurl(mesh)

    def grad_sq(self, coeffs):
        return float(sum(c @ (self.scalar_stiffness @ c) for c in coeffs.T))

    def nodal_l2_sq(self, coeffs):
        return float(sum(c @ (self.scalar_mass @ c) for c in coeffs.T))

    def edge_l2_sq(self, eta):
        return float(eta @ (self.edge_mass @ eta))

    def curl_sq(self, eta):
        return float(eta @ (self.curlcurl @ eta))


_CONTEXTS = {}


def context_for(mesh, assembler=None):
    ctx = _CONTEXTS.get(id(mesh))
    if ctx is not None and ctx.mesh is mesh:
        return ctx
    if assembler is not None:
        ctx = DiagnosticContext(mesh, scalar_mass=assembler.scalar_mass,
                                scalar_stiffness=assembler.scalar_stiffness,
                                edge_mass=assembler.edge_mass,
                                curlcurl=assembler.curlcurl)
    else:
        ctx = DiagnosticContext(mesh)
    _CONTEXTS[id(mesh)] = ctx
    return ctx


def norms(state):
    """Monitored norms: magnet gradient, cavity field, cavity curl."""
    ctx = context_for(state.m.mesh)
    return {
        "grad_m": np.sqrt(max(ctx.grad_sq(state.m.coeffs), 0.0)),
        "h_l2": np.sqrt(max(ctx.edge_l2_sq(state.h.coeffs), 0.0)),
        "curl_h": np.sqrt(max(ctx.curl_sq(state.h.coeffs), 0.0)),
    }


def energy_coefficient(params):
    """Weight of the squared curl term inside the discrete energy."""
    return params.damping / params.coupling * params.conductivity / params.permeability


def discrete_energy(state, params):
    ctx = context_for(state.m.mesh)
    return (ctx.grad_sq(state.m.coeffs)
            + ctx.edge_l2_sq(state.h.coeffs)
            + energy_coefficient(params) * ctx.curl_sq(state.h.coeffs))


@dataclass
class LedgerRow:
    step: int
    lhs: float
    rhs: float
    ok: bool


def energy_ledger(trajectory, params=None):
    """Recompute the cumulative inequality from a trajectory's records.

    Returns one row per record; row 0 compares the initial energy against
    itself. The dissipation sums use the squared quantities stored while
    stepping, so this is a pure reduction and can be re-run offline.
    """
    if params is None:
        params = trajectory.params
    records = trajectory.records
    if not records:
        raise ValueError("trajectory has no records")
    e0 = records[0].energy
    bound = e0 * (1.0 + LEDGER_RTOL)
    c_v = params.damping / params.coupling
    c_curl = 2.0 * params.conductivity / params.permeability
    rows = []
    sum_v = sum_dth = sum_curl = 0.0
    for rec in records:
        if rec.step > 0:
            sum_v += params.dt * rec.diss_v
            sum_dth += params.dt * rec.diss_dth
            sum_curl += params.dt * rec.diss_curl_mid
        lhs = rec.energy + c_v * (sum_v + sum_dth) + c_curl * sum_curl
        rows.append(LedgerRow(step=rec.step, lhs=lhs, rhs=e0, ok=lhs <= bound))
    return rows


def discrete_lp_norm(u, p):
    """Lattice norm of a nodal field: cell volume times summed powers.

    For p = infinity this is the largest nodal magnitude. Only defined on
    uniform grid meshes, where the cell volume is known.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    mags = u.nodal_norms()
    if np.isinf(p):
        return float(mags.max(initial=0.0))
    cell = u.mesh.cell_volume
    if cell is None:
        raise ValueError("lattice norm needs a uniform grid mesh")
    return float((cell * (mags ** p).sum()) ** (1.0 / p))
