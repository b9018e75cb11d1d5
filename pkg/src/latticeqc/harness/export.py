"""CSV and legacy-VTK writers. Floats are written with ``repr`` so values
round-trip exactly; files use LF line endings and are replaced atomically."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from ..exceptions import ExportError
from ..lattice import axial_stresses, node_energies

FIELD_HEADER = ("node_id", "x0", "y0", "ux", "uy", "energy")
CURVE_HEADER = ("step", "u", "F", "failed_count")
CONVERGENCE_HEADER = ("scheme", "element_size", "n_dofs", "n_sampling_nodes", "e_disp", "e_disp_disc",
                      "e_disp_sam", "e_U", "e_U_disc", "e_U_sam")
FIT_HEADER = ("scheme", "norm", "order", "intercept", "r_squared")


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_field_csv(path, model, u_full) -> Path:
    """One row per node: initial position, displacement and node energy
    (half of every incident live strut's energy)."""
    u = np.asarray(u_full, dtype=float).reshape(model.n_nodes, 2)
    energy = node_energies(model, u)
    pos = model.positions
    rows = ((i, pos[i, 0], pos[i, 1], u[i, 0], u[i, 1], energy[i]) for i in range(model.n_nodes))
    return write_atomic(path, _csv_text(FIELD_HEADER, rows))


def read_field_csv(path):
    """Parse a field table back into ``(ids, x0, u, energy)`` arrays."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != FIELD_HEADER:
            raise ExportError(f"unexpected field header {header}")
        data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, 6)
    return data[:, 0].astype(np.int64), data[:, 1:3], data[:, 3:5], data[:, 5]


def write_curve_csv(path, history) -> Path:
    steps = history.steps if history is not None else ()
    rows = ((s.step, s.displacement, s.reaction, s.failed_count) for s in steps)
    return write_atomic(path, _csv_text(CURVE_HEADER, rows))


def write_summary_csv(path, metrics: dict) -> Path:
    return write_atomic(path, _csv_text(("metric", "value"), metrics.items()))


def write_convergence_csv(path, rows) -> Path:
    return write_atomic(path, _csv_text(CONVERGENCE_HEADER, ([r[k] for k in CONVERGENCE_HEADER] for r in rows)))


def write_fit_csv(path, fits: dict) -> Path:
    rows = []
    for scheme, per_norm in fits.items():
        for norm, fit in per_norm.items():
            rows.append((scheme, norm, fit.order, fit.intercept, fit.r_squared))
    return write_atomic(path, _csv_text(FIT_HEADER, rows))


def write_vtk(path, model, u_full, title="lattice") -> Path:
    """Legacy ASCII unstructured grid: one line cell per live strut, nodal
    displacement vectors, per-cell alive flag and axial stress."""
    u = np.asarray(u_full, dtype=float).reshape(model.n_nodes, 2)
    live = np.flatnonzero(model.alive)
    stress = axial_stresses(model, u)[live]
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {model.n_nodes} double"]
    out += [f"{fmt(x)} {fmt(y)} 0.0" for x, y in model.positions]
    out.append(f"CELLS {len(live)} {3 * len(live)}")
    out += [f"2 {a} {b}" for a, b in model.struts[live]]
    out.append(f"CELL_TYPES {len(live)}")
    out += ["3"] * len(live)
    out += [f"POINT_DATA {model.n_nodes}", "VECTORS displacement double"]
    out += [f"{fmt(ux)} {fmt(uy)} 0.0" for ux, uy in u]
    out += [f"CELL_DATA {len(live)}", "SCALARS alive int 1", "LOOKUP_TABLE default"]
    out += ["1"] * len(live)
    out += ["SCALARS stress double 1", "LOOKUP_TABLE default"]
    out += [fmt(s) for s in stress]
    return write_atomic(path, "\n".join(out) + "\n")
