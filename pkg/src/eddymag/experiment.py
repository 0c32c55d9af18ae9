"""The vortex relaxation benchmark: config, initial data, driver, exports.

The benchmark puts a planar vortex magnetization in the unit cube, an
applied field of strength hs along z minus the magnetization inside the
magnet, and runs the scheme while logging the energy ledger. Artifacts are
a CSV time series, optional legacy ASCII VTK snapshots, and a plain text
summary. The CSV uses 17 significant digits so a re-parse reproduces every
float bit for bit.
"""

import dataclasses
import time as _time
from dataclasses import dataclass

import numpy as np

from .diagnostics import energy_ledger
from .fields import edge_field_at_barycenters
from .mesh import build_uniform_cube_mesh, check_weak_acuteness, restrict_to_ferromagnet
from .stepper import SchemeParams, init_state, run

_UNIT_BOX = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))

CSV_COLUMNS = ("step", "t", "grad_m", "h_l2", "curl_h", "energy",
               "ledger_lhs", "ledger_ok")


def initial_magnetization(point):
    """Planar vortex centered at (0.5, 0.5) with a downward far field.

    With r the in-plane distance to the center: outside r = 1/2 the value
    is (0, 0, -1); inside, with A = (1 - 2r)^4 / 4, the value is
    (2 x* A, A^2 - r^2) / (A^2 + r^2), which is a unit vector identically
    and meets the outer branch continuously at r = 1/2.
    """
    x = np.asarray(point, dtype=float)
    xs = np.array([x[0] - 0.5, x[1] - 0.5, 0.0])
    r2 = xs[0] ** 2 + xs[1] ** 2
    if r2 >= 0.25:
        return np.array([0.0, 0.0, -1.0])
    a = (1.0 - 2.0 * np.sqrt(r2)) ** 4 / 4.0
    return np.array([2.0 * xs[0] * a, 2.0 * xs[1] * a, a * a - r2]) / (a * a + r2)


def _in_box(x, box, tol=1e-12):
    return all(lo - tol <= x[i] <= hi + tol for i, (lo, hi) in enumerate(box))


def initial_field(point, hs, d_box=_UNIT_BOX):
    """Constant applied field (0, 0, hs) minus the magnetization inside the magnet."""
    x = np.asarray(point, dtype=float)
    val = np.array([0.0, 0.0, float(hs)])
    if _in_box(x, d_box):
        val -= initial_magnetization(x)
    return val


@dataclass
class SimulationConfig:
    """Everything one run needs; defaults reproduce the vortex benchmark."""

    n: int = 8
    box: tuple = _UNIT_BOX
    d_box: tuple = _UNIT_BOX
    precession: float = 1.0
    damping: float = 1.0
    permeability: float = 1.0
    conductivity: float = 1.0
    theta: float = 0.7
    dt: float = 1e-3
    t_end: float = 1.0
    hs: float = 0.0
    out_dir: str = "out"
    snapshot_every: int = 0
    solver_tol: float = 1e-10

    # file/CLI spellings for the numeric knobs
    _KEY_ALIASES = {"k": "dt", "T": "t_end"}

    def scheme_params(self):
        return SchemeParams(precession=self.precession, damping=self.damping,
                            permeability=self.permeability,
                            conductivity=self.conductivity, theta=self.theta,
                            dt=self.dt, t_end=self.t_end)

    @classmethod
    def from_file(cls, path):
        """Parse a flat key=value config file; '#' starts a comment."""
        cfg = cls()
        fields = {f.name for f in dataclasses.fields(cls)}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError("%s:%d: expected key=value, got %r"
                                     % (path, lineno, raw.rstrip()))
                key, value = (part.strip() for part in line.split("=", 1))
                key = cls._KEY_ALIASES.get(key, key)
                if key not in fields:
                    raise ValueError("%s:%d: unknown key %r" % (path, lineno, key))
                setattr(cfg, key, _parse_value(key, value))
        cfg.scheme_params()  # validate eagerly
        return cfg


def _parse_value(key, value):
    if key in ("n", "snapshot_every"):
        return int(value)
    if key in ("box", "d_box"):
        nums = [float(part) for part in value.split(",")]
        if len(nums) != 6:
            raise ValueError("box values need 6 comma separated numbers")
        return tuple((nums[2 * i], nums[2 * i + 1]) for i in range(3))
    if key == "out_dir":
        return value
    return float(value)


def export_csv(trajectory, path):
    """Fixed-column CSV of the per-step record, lossless float formatting."""
    try:
        with open(path, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in trajectory.records:
                fh.write("%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n"
                         % (rec.step, rec.t, rec.grad_m, rec.h_l2, rec.curl_h,
                            rec.energy, rec.ledger_lhs, int(rec.ledger_ok)))
    except OSError as err:
        raise OSError("writing CSV to %s failed: %s" % (path, err)) from err


def read_csv(path):
    """Re-parse an exported CSV into a list of per-row dicts."""
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError("unexpected CSV header in %s" % path)
        for line in fh:
            parts = line.strip().split(",")
            row = {"step": int(parts[0]), "ledger_ok": bool(int(parts[7]))}
            for name, text in zip(CSV_COLUMNS[1:7], parts[1:7]):
                row[name] = float(text)
            rows.append(row)
    return rows


def export_vtk(state, path):
    """Legacy ASCII VTK unstructured grid of one state.

    Points carry the magnetization as vectors named m (zero outside the
    magnet, where no magnetization is defined); cells carry the magnetic
    field reconstructed at tet barycenters as vectors named H, since the
    curl-conforming field has no nodal values.
    """
    mesh = state.m.mesh
    m_full = np.zeros((mesh.n_vertices, 3))
    m_full[mesh.magnet_vertices] = state.m.coeffs
    h_bary = edge_field_at_barycenters(state.h)

    try:
        with open(path, "w") as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write("magnetization and magnetic field, step %d\n" % state.step_index)
            fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
            fh.write("POINTS %d double\n" % mesh.n_vertices)
            for p in mesh.vertices:
                fh.write("%.17g %.17g %.17g\n" % (p[0], p[1], p[2]))
            n_tets = len(mesh.tets)
            fh.write("CELLS %d %d\n" % (n_tets, 5 * n_tets))
            for tet in mesh.tets:
                fh.write("4 %d %d %d %d\n" % tuple(tet))
            fh.write("CELL_TYPES %d\n" % n_tets)
            fh.write("10\n" * n_tets)
            fh.write("POINT_DATA %d\nVECTORS m double\n" % mesh.n_vertices)
            for v in m_full:
                fh.write("%.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
            fh.write("CELL_DATA %d\nVECTORS H double\n" % n_tets)
            for v in h_bary:
                fh.write("%.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
    except OSError as err:
        raise OSError("writing VTK to %s failed: %s" % (path, err)) from err


def run_experiment(config, quiet=False):
    """Build the mesh, run the scheme, write artifacts; returns a result dict."""
    import os

    t_wall = _time.perf_counter()
    mesh = build_uniform_cube_mesh(config.n, box=config.box)
    if config.d_box != config.box:
        mesh = restrict_to_ferromagnet(mesh, config.d_box)
    acute = check_weak_acuteness(mesh)
    params = config.scheme_params()

    if not quiet:
        print("mesh: %d vertices, %d tets, %d edges, %d magnet nodes, h=%.4g"
              % (mesh.n_vertices, len(mesh.tets), mesh.M, mesh.N, mesh.h))
        print("weak acuteness: %s (worst off-diagonal %.3e)"
              % ("ok" if acute.ok else "VIOLATED", acute.worst_offdiag))

    state = init_state(lambda x: initial_magnetization(x),
                       lambda x: initial_field(x, config.hs, config.d_box),
                       mesh, params)

    os.makedirs(config.out_dir, exist_ok=True)
    snap_dir = os.path.join(config.out_dir, "snapshots")
    if config.snapshot_every > 0:
        os.makedirs(snap_dir, exist_ok=True)

    def progress(j, total, rec):
        if not quiet and (j % max(1, total // 10) == 0 or j == total):
            print("  step %d/%d  t=%.4g  energy=%.6g  ledger=%s"
                  % (j, total, rec.t, rec.energy,
                     "ok" if rec.ledger_ok else "VIOLATED"))

    traj = run(state, params, solver_tol=config.solver_tol,
               snapshot_every=config.snapshot_every, progress=progress)

    csv_path = os.path.join(config.out_dir, "timeseries.csv")
    export_csv(traj, csv_path)
    for step_idx, snap_state in traj.snapshots:
        export_vtk(snap_state,
                   os.path.join(snap_dir, "step_%06d.vtk" % step_idx))

    ledger_rows = energy_ledger(traj)
    violations = sum(1 for row in ledger_rows if not row.ok)
    first_violation = next((row.step for row in ledger_rows if not row.ok), None)
    energies = [rec.energy for rec in traj.records]
    wall = _time.perf_counter() - t_wall
    summary = {
        "n": config.n, "dt": params.dt, "theta": params.theta, "hs": config.hs,
        "steps": len(traj.records) - 1,
        "weakly_acute": acute.ok,
        "energy_min": min(energies), "energy_max": max(energies),
        "initial_energy": traj.initial_energy,
        "final_energy": energies[-1],
        "ledger_violations": violations,
        "first_violation_step": first_violation,
        "wall_seconds": wall,
    }
    summary_path = os.path.join(config.out_dir, "summary.txt")
    with open(summary_path, "w") as fh:
        for key, value in summary.items():
            fh.write("%s = %s\n" % (key, value))

    if not quiet:
        print("wrote %s (%d rows), %d snapshots, %s in %.1fs"
              % (csv_path, len(traj.records), len(traj.snapshots),
                 summary_path, wall))

    return {"trajectory": traj, "mesh": mesh, "summary": summary,
            "csv_path": csv_path, "summary_path": summary_path,
            "acuteness": acute}
