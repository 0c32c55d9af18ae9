"""The time stepping loop: initialize, solve, renormalize, record.

Each step builds the coupled velocity/field system in the tangent frame of
the current magnetization, solves it, reconstructs the velocity and new
field, and renormalizes the nodal magnetization. The loop keeps a running
energy ledger and per-step verification quantities (nodal norm deviation,
tangency defect, rate-bound margin) so that every invariant the scheme
promises is checked while it runs, not after.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import StepAssembler, validate_params
from .diagnostics import LEDGER_RTOL, context_for, energy_coefficient
from .fields import (EdgeField, NodalField, interpolate_edge, interpolate_nodal,
                     project_normalize, tangent_frame)
from .solver import SolverFailure, solve_sparse


@dataclass(frozen=True)
class SchemeParams:
    """Physical and numerical parameters of one run.

    The torque coupling coefficient is derived, never set: it equals
    precession^2 + damping^2.
    """

    precession: float = 1.0
    damping: float = 1.0
    permeability: float = 1.0
    conductivity: float = 1.0
    theta: float = 0.7
    dt: float = 1e-3
    t_end: float = 1.0

    def __post_init__(self):
        validate_params(self)
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")

    @property
    def coupling(self):
        return self.precession ** 2 + self.damping ** 2


@dataclass(eq=False)
class SimState:
    step_index: int
    m: NodalField
    h: EdgeField
    v_last: NodalField
    time: float


@dataclass
class StepRecord:
    step: int
    t: float
    grad_m: float
    h_l2: float
    curl_h: float
    energy: float
    ledger_lhs: float
    ledger_ok: bool
    # squared dissipation quantities entering the ledger
    diss_v: float = 0.0
    diss_dth: float = 0.0
    diss_curl_mid: float = 0.0
    # per-step verification extras
    norm_dev: float = 0.0
    rate_margin: float = 0.0
    tangency_max: float = 0.0
    min_denominator: float = 1.0
    residual: float = 0.0


@dataclass
class Trajectory:
    records: list
    snapshots: list
    params: SchemeParams
    initial_energy: float
    solver_tol: float = 1e-10
    final_state: SimState = None

    @property
    def violations(self):
        return sum(1 for rec in self.records if not rec.ledger_ok)


def init_state(m0, h0, mesh, params=None):
    """Interpolate the initial data; m0 must be nodally unit length."""
    m = interpolate_nodal(m0, mesh)
    dev = np.abs(m.nodal_norms() - 1.0).max()
    if dev > 1e-8:
        raise ValueError(
            "initial magnetization deviates from unit length by %.3e at a node" % dev)
    h = interpolate_edge(h0, mesh)
    v0 = NodalField(coeffs=np.zeros_like(m.coeffs), mesh=mesh)
    return SimState(step_index=0, m=m, h=h, v_last=v0, time=0.0)


def step_with_info(state, params, assembler=None, solver_tol=1e-10, solve_fn=None):
    """Advance one step; returns (new_state, info) with verification data."""
    mesh = state.m.mesh
    if assembler is None:
        assembler = StepAssembler(mesh)
    frame = tangent_frame(state.m)
    system = assembler.build(state.m, state.h, frame, params)

    try:
        if solve_fn is not None:
            x = solve_fn(system.matrix, system.rhs)
        else:
            x = solve_sparse(system.matrix, system.rhs, tol=solver_tol)
    except SolverFailure as err:
        raise SolverFailure(
            "step %d: %s" % (state.step_index + 1, err),
            residual=err.residual, dim=err.dim) from err

    n = system.n_nodes
    v = NodalField(
        coeffs=x[:n, None] * frame.t1 + x[n:2 * n, None] * frame.t2, mesh=mesh)
    h_new = EdgeField(coeffs=x[2 * n:].copy(), mesh=mesh)

    denom = np.linalg.norm(state.m.coeffs + params.dt * v.coeffs, axis=1)
    m_new = project_normalize(state.m, v, params.dt)

    bnorm = float(np.linalg.norm(system.rhs))
    residual = 0.0 if bnorm == 0.0 else \
        float(np.linalg.norm(system.matrix @ x - system.rhs)) / bnorm

    new_state = SimState(step_index=state.step_index + 1, m=m_new, h=h_new,
                         v_last=v, time=(state.step_index + 1) * params.dt)
    info = {"frame": frame, "velocity": v, "denominators": denom,
            "residual": residual}
    return new_state, info


def step(state, params, assembler=None, solver_tol=1e-10):
    """Advance one step and return only the new state."""
    new_state, _ = step_with_info(state, params, assembler, solver_tol)
    return new_state


def _verification_extras(old_state, new_state, info, params):
    v = info["velocity"].coeffs
    v_mag = np.linalg.norm(v, axis=1)
    dm = np.linalg.norm(new_state.m.coeffs - old_state.m.coeffs, axis=1)
    tangency = np.abs(np.einsum("nx,nx->n", v, old_state.m.coeffs))
    return {
        "norm_dev": float(np.abs(new_state.m.nodal_norms() - 1.0).max()),
        "rate_margin": float((dm / params.dt - v_mag).max()),
        "tangency_max": float((tangency / (1.0 + v_mag)).max()),
        "min_denominator": float(info["denominators"].min()),
        "residual": info["residual"],
    }


def run(state, params, n_steps=None, solver_tol=1e-10, snapshot_every=0,
        progress=None):
    """Drive the loop for n_steps (default t_end / dt) and record everything."""
    mesh = state.m.mesh
    assembler = StepAssembler(mesh)
    ctx = context_for(mesh, assembler=assembler)

    if n_steps is None:
        ratio = params.t_end / params.dt
        n_steps = int(np.floor(ratio + 1e-9))
        if abs(ratio - round(ratio)) > 1e-9:
            warnings.warn(
                "t_end is not an integer multiple of dt; running %d steps" % n_steps)

    coeff_curl = energy_coefficient(params)
    c_v = params.damping / params.coupling
    c_curl = 2.0 * params.conductivity / params.permeability

    def energy_parts(st):
        g = ctx.grad_sq(st.m.coeffs)
        h2 = ctx.edge_l2_sq(st.h.coeffs)
        c2 = ctx.curl_sq(st.h.coeffs)
        return g, h2, c2, g + h2 + coeff_curl * c2

    g, h2, c2, e0 = energy_parts(state)
    bound = e0 * (1.0 + LEDGER_RTOL)
    records = [StepRecord(step=0, t=0.0, grad_m=np.sqrt(max(g, 0.0)),
                          h_l2=np.sqrt(max(h2, 0.0)), curl_h=np.sqrt(max(c2, 0.0)),
                          energy=e0, ledger_lhs=e0, ledger_ok=e0 <= bound)]
    snapshots = []
    if snapshot_every > 0:
        snapshots.append((0, state))

    sum_v = sum_dth = sum_curl = 0.0
    for j in range(1, n_steps + 1):
        new_state, info = step_with_info(state, params, assembler, solver_tol)

        eta_prev = state.h.coeffs
        eta_new = new_state.h.coeffs
        diss_v = ctx.nodal_l2_sq(info["velocity"].coeffs)
        diss_dth = ctx.edge_l2_sq((eta_new - eta_prev) / params.dt)
        diss_curl = ctx.curl_sq(0.5 * (eta_new + eta_prev))
        sum_v += params.dt * diss_v
        sum_dth += params.dt * diss_dth
        sum_curl += params.dt * diss_curl

        g, h2, c2, energy = energy_parts(new_state)
        lhs = energy + c_v * (sum_v + sum_dth) + c_curl * sum_curl

        records.append(StepRecord(
            step=j, t=new_state.time,
            grad_m=np.sqrt(max(g, 0.0)), h_l2=np.sqrt(max(h2, 0.0)),
            curl_h=np.sqrt(max(c2, 0.0)), energy=energy,
            ledger_lhs=lhs, ledger_ok=lhs <= bound,
            diss_v=diss_v, diss_dth=diss_dth, diss_curl_mid=diss_curl,
            **_verification_extras(state, new_state, info, params)))

        if snapshot_every > 0 and j % snapshot_every == 0:
            snapshots.append((j, new_state))
        if progress is not None:
            progress(j, n_steps, records[-1])
        state = new_state

    return Trajectory(records=records, snapshots=snapshots, params=params,
                      initial_energy=e0, solver_tol=solver_tol,
                      final_state=state)
