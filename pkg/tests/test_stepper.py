"""The time stepping loop: initialization, invariants, ledger, determinism."""

import warnings

import numpy as np
import pytest

from eddymag.diagnostics import energy_ledger
from eddymag.experiment import initial_field, initial_magnetization
from eddymag.fields import interpolate_edge, interpolate_nodal
from eddymag.mesh import build_uniform_cube_mesh
from eddymag.solver import SolverFailure
from eddymag.stepper import SchemeParams, init_state, run, step, step_with_info


def vortex_state(n, hs=0.0, params=None):
    mesh = build_uniform_cube_mesh(n)
    params = params or SchemeParams()
    state = init_state(initial_magnetization,
                       lambda x: initial_field(x, hs), mesh, params)
    return mesh, state, params


def test_init_state_samples_magnetization_at_vertices():
    mesh, state, _ = vortex_state(2)
    pts = mesh.vertices[mesh.magnet_vertices]
    want = np.array([initial_magnetization(p) for p in pts])
    assert np.array_equal(state.m.coeffs, want)
    assert np.abs(state.m.nodal_norms() - 1.0).max() < 1e-14
    assert state.step_index == 0 and state.time == 0.0
    assert np.array_equal(state.v_last.coeffs, np.zeros((mesh.N, 3)))


def test_init_state_field_circulations_match_two_point_rule():
    mesh, state, _ = vortex_state(2, hs=30.0)
    # independent straight-line recomputation of the interpolation contract
    s_lo = 0.5 - 0.5 / np.sqrt(3.0)
    s_hi = 0.5 + 0.5 / np.sqrt(3.0)
    for e in range(mesh.M):
        p0 = mesh.vertices[mesh.edges[e, 0]]
        p1 = mesh.vertices[mesh.edges[e, 1]]
        acc = 0.0
        for s in (s_lo, s_hi):
            acc += 0.5 * initial_field(p0 + s * (p1 - p0), 30.0) @ (p1 - p0)
        assert state.h.coeffs[e] == pytest.approx(acc, rel=1e-13, abs=1e-13)


def test_init_state_rejects_non_unit_data():
    mesh = build_uniform_cube_mesh(1)
    with pytest.raises(ValueError):
        init_state(lambda x: np.array([0.0, 0.0, 2.0]),
                   lambda x: np.zeros(3), mesh, SchemeParams())


def test_uniform_state_is_an_equilibrium():
    mesh = build_uniform_cube_mesh(2)
    params = SchemeParams(dt=1e-2)
    state = init_state(lambda x: np.array([0.0, 0.0, 1.0]),
                       lambda x: np.array([0.0, 0.0, 4.0]), mesh, params)
    new_state, info = step_with_info(state, params)
    assert np.abs(info["velocity"].coeffs).max() < 1e-10
    assert np.abs(new_state.m.coeffs - state.m.coeffs).max() < 1e-10
    assert np.abs(new_state.h.coeffs - state.h.coeffs).max() < 1e-10


def test_step_preserves_unit_norm_and_tangency():
    mesh, state, params = vortex_state(2, hs=30.0)
    for _ in range(5):
        new_state, info = step_with_info(state, params)
        v = info["velocity"].coeffs
        # velocity lies in the tangent plane of the previous magnetization
        dots = np.abs(np.einsum("nx,nx->n", v, state.m.coeffs))
        assert dots.max() < 1e-10 * (1.0 + np.abs(v).max())
        assert np.abs(new_state.m.nodal_norms() - 1.0).max() < 1e-13
        # nodal movement per unit time never exceeds the velocity magnitude
        dm = np.linalg.norm(new_state.m.coeffs - state.m.coeffs, axis=1)
        assert (dm / params.dt <= np.linalg.norm(v, axis=1) + 1e-10).all()
        state = new_state


def test_run_records_and_ledger():
    mesh, state, params = vortex_state(2)
    traj = run(state, params, n_steps=20)
    assert len(traj.records) == 21
    assert traj.records[0].step == 0
    assert traj.records[-1].t == pytest.approx(20 * params.dt, rel=1e-12)
    assert traj.initial_energy == pytest.approx(traj.records[0].energy, rel=1e-15)
    for rec in traj.records:
        assert rec.ledger_ok, "ledger violated at step %d" % rec.step
        assert rec.ledger_lhs <= traj.initial_energy * (1.0 + 1e-8)
        assert rec.norm_dev < 1e-12
    assert traj.violations == 0
    # each step's estimate drops nonnegative extra dissipation, so the
    # combined left-hand side decreases step over step while the plain
    # energy may wiggle
    lhs = [rec.ledger_lhs for rec in traj.records]
    assert all(b <= a * (1.0 + 1e-12) for a, b in zip(lhs, lhs[1:]))
    assert traj.final_state.step_index == 20


def test_post_hoc_ledger_matches_online_values():
    _, state, params = vortex_state(2, hs=30.0)
    traj = run(state, params, n_steps=10)
    rows = energy_ledger(traj)
    assert len(rows) == len(traj.records)
    for row, rec in zip(rows, traj.records):
        assert row.lhs == pytest.approx(rec.ledger_lhs, rel=1e-12)
        assert row.ok == rec.ledger_ok


def test_fully_implicit_damping_only_run_decays():
    params = SchemeParams(precession=0.0, theta=1.0, dt=1e-2, t_end=0.1)
    _, state, _ = vortex_state(2, hs=0.0, params=params)
    traj = run(state, params)
    energies = [rec.energy for rec in traj.records]
    assert len(energies) == 11
    assert all(b <= a * (1.0 + 1e-10) for a, b in zip(energies, energies[1:]))
    assert energies[-1] < energies[0]


def test_zero_steps_leaves_initial_record_only():
    _, state, params = vortex_state(1)
    traj = run(state, params, n_steps=0)
    assert len(traj.records) == 1
    assert traj.records[0].step == 0
    assert traj.final_state is state


def test_non_integer_step_count_warns():
    params = SchemeParams(dt=1e-3, t_end=0.0035)
    _, state, _ = vortex_state(1, params=params)
    with pytest.warns(UserWarning):
        traj = run(state, params)
    assert len(traj.records) == 4  # 3 whole steps fit


def test_runs_are_bit_identical():
    def one():
        _, state, params = vortex_state(2, hs=-100.0)
        return run(state, params, n_steps=5)

    a, b = one(), one()
    for ra, rb in zip(a.records, b.records):
        assert (ra.energy, ra.ledger_lhs, ra.grad_m, ra.h_l2, ra.curl_h) \
            == (rb.energy, rb.ledger_lhs, rb.grad_m, rb.h_l2, rb.curl_h)
    assert np.array_equal(a.final_state.m.coeffs, b.final_state.m.coeffs)
    assert np.array_equal(a.final_state.h.coeffs, b.final_state.h.coeffs)


def test_snapshot_cadence():
    _, state, params = vortex_state(1)
    traj = run(state, params, n_steps=10, snapshot_every=4)
    assert [idx for idx, _ in traj.snapshots] == [0, 4, 8]
    none = run(state, params, n_steps=3, snapshot_every=0)
    assert none.snapshots == []


def test_solver_failure_reports_step_index():
    _, state, params = vortex_state(1)

    def failing_solve(a, b):
        raise SolverFailure("synthetic breakdown", residual=1.0, dim=a.shape[0])

    with pytest.raises(SolverFailure, match="step 1:"):
        step_with_info(state, params, solve_fn=failing_solve)


def test_scheme_params_validation_and_coupling():
    p = SchemeParams(precession=2.0, damping=3.0)
    assert p.coupling == pytest.approx(13.0)
    with pytest.raises(ValueError):
        SchemeParams(theta=1.5)
    with pytest.raises(ValueError):
        SchemeParams(t_end=0.0)
    with pytest.raises(ValueError):
        SchemeParams(damping=0.0)


def test_step_convenience_wrapper():
    _, state, params = vortex_state(1)
    new_state = step(state, params)
    assert new_state.step_index == 1
    assert new_state.time == pytest.approx(params.dt)
