"""Finite element simulation of eddy-current coupled magnetization dynamics."""

__version__ = "0.1.0"

from .mesh import Mesh, build_uniform_cube_mesh, check_weak_acuteness, restrict_to_ferromagnet
from .fields import (
    EdgeField, NodalField, TangentFrame,
    evaluate_edge_field, interpolate_edge, interpolate_nodal,
    project_normalize, tangent_frame,
)
from .assembly import StepAssembler, StepSystem, build_step_system
from .solver import SolverFailure, dense_solve_oracle, solve_sparse
from .stepper import SchemeParams, SimState, Trajectory, init_state, run, step
from .diagnostics import discrete_energy, discrete_lp_norm, energy_ledger, norms
from .experiment import (
    SimulationConfig, export_csv, export_vtk, initial_field,
    initial_magnetization, run_experiment,
)
