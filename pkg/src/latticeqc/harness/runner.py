"""Build, solve and compare one configured case, or a convergence suite."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..error_norms import ErrorReport, displacement_error, energy_error, fit_convergence_order, split_errors
from ..exceptions import ConfigError, LatticeQCError
from ..fracture import FractureHistory, FractureLoading, run_quasistatic_fracture
from ..lattice import (LatticeModel, Material, carve_notch, generate_square_lattice,
                       generate_triangular_lattice, notch_tip_nodes)
from ..mesh import CoarseMesh, build_coarse_mesh, full_resolution_mesh
from ..sampling import SamplingAssignment, build_sampling
from ..solver import AXES, DirichletBC, Solution, full_sampling, rn_constraints, solve
from . import export
from .config import CaseConfig

logger = logging.getLogger(__name__)

MIN_ELEMENT_SIZE = 10.0


@dataclass(frozen=True, eq=False)
class CaseResult:
    config: CaseConfig
    model: LatticeModel
    mesh: CoarseMesh
    assignment: SamplingAssignment
    solution: Solution = None
    references: dict = field(default_factory=dict)
    errors: ErrorReport = None
    sampling_only: dict = None
    history: FractureHistory = None
    reference_history: FractureHistory = None
    counts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    notch_tips: np.ndarray = None
    reaction: float = None
    files: dict = field(default_factory=dict)

    def comparison(self) -> dict:
        """Fracture curve metrics against the full-resolution history."""
        h, ref = self.history, self.reference_history
        if h is None or ref is None:
            return {}
        n = min(len(h.steps), len(ref.steps))
        f, f_ref = h.reactions[:n], ref.reactions[:n]
        peak = float(np.max(np.abs(ref.reactions)))
        a, b = set(h.dead_struts), set(ref.dead_struts)
        denom = max(len(a), len(b))
        out = {
            "work_ratio": h.external_work / ref.external_work if ref.external_work else float("nan"),
            "final_reaction_ratio": (h.steps[-1].reaction / ref.steps[-1].reaction
                                     if ref.steps[-1].reaction else float("nan")),
            "curve_max_deviation": float(np.max(np.abs(f - f_ref)) / peak) if peak > 0 else 0.0,
            "failed_overlap": len(a & b) / denom if denom else 1.0,
            "reference_external_work": ref.external_work,
            "reference_failed": len(ref.dead_struts),
        }
        return out

    def summary(self) -> dict:
        cfg = self.config
        out = {
            "case": cfg.name,
            "scheme": self.assignment.scheme,
            "reference": cfg.reference.mode,
            "element_size": cfg.mesh.element_size if cfg.mesh.element_size is not None else "none",
        }
        out.update(self.counts)
        if self.solution is not None:
            out["total_energy"] = self.solution.total_energy
            out["solver_residual"] = self.solution.solver_residual
        if self.reaction is not None:
            out["reaction"] = self.reaction
        if self.errors is not None:
            out.update(self.errors.as_dict())
        if self.sampling_only:
            out.update(self.sampling_only)
        if self.history is not None:
            h = self.history
            out["external_work"] = h.external_work
            out["final_reaction"] = h.steps[-1].reaction
            out["failed_struts"] = len(h.dead_struts)
            out["coarse_failures"] = len(h.coarse_failures)
            out["terminated"] = h.terminated
            first = h.first_failure
            out["first_failed_strut"] = -1 if first is None else first
            if self.notch_tips is not None and len(self.notch_tips) and first is not None:
                out["first_failure_at_notch_tip"] = bool(
                    np.isin(self.model.struts[first], self.notch_tips).any())
            out.update(self.comparison())
        return out


def build_model(config: CaseConfig):
    """Lattice with the configured notch; returns ``(model, notch_tip_ids)``."""
    lat = config.lattice
    mat = config.material
    material = Material(mat.young_modulus, mat.yield_stress, lat.spacing, mat.cross_section)
    if lat.kind == "square":
        model = generate_square_lattice(lat.width, lat.height, lat.spacing, lat.bracing, material)
    else:
        model = generate_triangular_lattice(lat.width, lat.height, lat.spacing, material, lat.orientation)
    tips = np.empty(0, dtype=np.int64)
    if lat.notch is not None:
        carved, old_to_new = carve_notch(model, lat.notch)
        tips = notch_tip_nodes(model, old_to_new)
        model = carved
    return model, tips


def resolve_bcs(config: CaseConfig, model: LatticeModel):
    """Dirichlet constraints from the config; returns ``(fixed, loaded)``
    where ``loaded`` is the single flagged constraint or ``None``."""
    fixed, loaded = [], None
    l0 = model.material.strut_length
    for spec in config.bc:
        if spec.where == "point":
            d = np.linalg.norm(model.positions - np.asarray(spec.at), axis=1)
            k = int(np.argmin(d))
            if d[k] > 0.5 * l0:
                raise ConfigError(f"no lattice node within {0.5 * l0} mm of {spec.at}")
            nodes = np.array([k])
        else:
            if spec.where not in model.boundary_sets:
                names = ", ".join(sorted(model.boundary_sets))
                raise ConfigError(f"unknown boundary set {spec.where!r} (known: {names}, point)")
            nodes = model.boundary_sets[spec.where]
        for axis in AXES[spec.axis]:
            bc = DirichletBC(tuple(int(n) for n in nodes), axis, spec.value)
            if spec.loaded:
                loaded = bc
            else:
                fixed.append(bc)
    return fixed, loaded


def build_mesh(config: CaseConfig, model: LatticeModel, element_size=None) -> CoarseMesh:
    size = config.mesh.element_size if element_size is None else element_size
    if size is None:
        return full_resolution_mesh(model)
    if size < MIN_ELEMENT_SIZE:
        logger.warning("element size %g l0 is below the recommended minimum of %g l0",
                       size, MIN_ELEMENT_SIZE)
    return build_coarse_mesh(model, element_size=size * model.material.strut_length,
                             fr_region=config.mesh.full_resolution)


def _counts(model, mesh, assignment) -> dict:
    roles = mesh.role_counts()
    samp = assignment.counts()
    return {
        "n_nodes": model.n_nodes,
        "n_struts": model.n_struts,
        "n_elements": len(mesh.elements),
        "n_dofs": mesh.n_dofs,
        "n_irn": roles["IRN"],
        "n_nirn": roles["NIRN"],
        "n_gn": roles["GN"],
        "n_psn": samp["PSN"],
        "n_ssn": samp["SSN"],
        "n_nsn": samp["NSN"],
        "n_sampling_nodes": samp["sampling"],
        "n_negative_weights": int(np.sum(assignment.weights < 0)),
        "n_explicit_elements": len(assignment.explicit_elements),
    }


def _reaction(mesh, solution, bc):
    if bc is None or solution is None:
        return None
    dofs, _ = rn_constraints(mesh, [bc])
    return solution.reaction_sum(dofs)


def _with_context(name, exc):
    try:
        new = type(exc)(f"[{name}] {exc}")
    except Exception:
        return exc
    new.__cause__ = exc
    return new


def run_case(config: CaseConfig, out_dir=None, export_files=True) -> CaseResult:
    """Model -> mesh -> sampling -> solve (with references) -> exports.

    ``out_dir`` overrides ``config.output.dir``; pass ``export_files=False``
    to skip writing.
    """
    try:
        result = _run_case(config)
    except LatticeQCError as exc:
        raise _with_context(config.name, exc) from exc
    if export_files:
        files = export_outputs(result, out_dir if out_dir is not None else config.output.dir)
        object.__setattr__(result, "files", files)
    return result


def _run_case(config: CaseConfig) -> CaseResult:
    timings = {}
    t0 = time.perf_counter()
    model, tips = build_model(config)
    fixed, loaded = resolve_bcs(config, model)
    mesh = build_mesh(config, model)
    assignment = build_sampling(mesh, config.sampling.scheme, config.sampling.psn_selection)
    timings["setup"] = time.perf_counter() - t0
    tol = config.solver.tol
    ref_mode = config.reference.mode
    counts = _counts(model, mesh, assignment)

    if config.loading.mode == "fracture":
        loading = FractureLoading(loaded.nodes, loaded.axis, loaded.value, config.loading.steps,
                                  batch=config.loading.removal == "batch")
        t = time.perf_counter()
        history = run_quasistatic_fracture(model, mesh, assignment, fixed, loading, tol)
        timings["solve"] = time.perf_counter() - t
        ref_history = None
        if ref_mode == "fr":
            t = time.perf_counter()
            fr_mesh = full_resolution_mesh(model)
            ref_history = run_quasistatic_fracture(model, fr_mesh, full_sampling(fr_mesh), fixed, loading, tol)
            timings["reference"] = time.perf_counter() - t
        return CaseResult(config, model, mesh, assignment, history.solution, {}, None, None, history,
                          ref_history, counts, timings, tips)

    bcs = fixed + ([loaded] if loaded is not None else [])
    t = time.perf_counter()
    rr = solve(model, mesh, assignment, bcs, tol=tol)
    timings["solve"] = time.perf_counter() - t
    refs, errors, sam = {}, None, None
    if ref_mode in ("fr", "fs"):
        t = time.perf_counter()
        fs = rr if assignment.scheme == "fs" else solve(model, mesh, full_sampling(mesh), bcs, tol=tol)
        refs["fs"] = fs
        if ref_mode == "fr":
            fr_mesh = full_resolution_mesh(model)
            refs["fr"] = solve(model, fr_mesh, full_sampling(fr_mesh), bcs, tol=tol)
            errors = split_errors(refs["fr"].u_full, fs.u_full, rr.u_full, model)
        else:
            # without a full-resolution field the sampling errors are
            # normalized by the full-sampling field
            sam = {"e_disp_sam": displacement_error(fs.u_full, rr.u_full),
                   "e_U_sam": energy_error(model, fs.u_full, rr.u_full)}
        timings["reference"] = time.perf_counter() - t
    return CaseResult(config, model, mesh, assignment, rr, refs, errors, sam, None, None, counts,
                      timings, tips, _reaction(mesh, rr, loaded))


def export_outputs(result: CaseResult, out_dir) -> dict:
    """Write the enabled outputs of ``result`` below ``out_dir``."""
    out = Path(out_dir)
    opts = result.config.output
    files = {}
    if opts.field and result.solution is not None:
        files["field"] = export.write_field_csv(out / "field.csv", result.model, result.solution.u_full)
    if opts.curve and result.config.loading.mode == "fracture":
        files["curve"] = export.write_curve_csv(out / "curve.csv", result.history)
        if result.reference_history is not None:
            files["curve_fr"] = export.write_curve_csv(out / "curve_fr.csv", result.reference_history)
    if opts.summary:
        files["summary"] = export.write_summary_csv(out / "summary.csv", result.summary())
    if opts.vtk and result.solution is not None:
        model = result.history.model if result.history is not None else result.model
        files["vtk"] = export.write_vtk(out / "lattice.vtk", model, result.solution.u_full, result.config.name)
    return files


@dataclass(frozen=True, eq=False)
class SuiteResult:
    rows: list
    fits: dict
    files: dict = field(default_factory=dict)


def run_convergence_suite(config: CaseConfig, sizes=None, schemes=None, out_dir=None,
                          export_files=True) -> SuiteResult:
    """Static runs over element sizes (in l0) and schemes, each compared with
    one shared full-resolution solution; fits the order of both norms per
    scheme when at least three sizes are given."""
    sizes = list(sizes if sizes is not None else config.suite.sizes)
    schemes = list(schemes if schemes is not None else (config.suite.schemes or [config.sampling.scheme]))
    if not sizes:
        raise ConfigError("a suite needs element sizes")
    if config.loading.mode != "static":
        raise ConfigError("convergence suites run static cases only")
    try:
        model, _ = build_model(config)
        fixed, loaded = resolve_bcs(config, model)
        bcs = fixed + ([loaded] if loaded is not None else [])
        tol = config.solver.tol
        fr_mesh = full_resolution_mesh(model)
        fr = solve(model, fr_mesh, full_sampling(fr_mesh), bcs, tol=tol)
        rows = []
        for size in sizes:
            mesh = build_mesh(config, model, element_size=size)
            fs = solve(model, mesh, full_sampling(mesh), bcs, tol=tol)
            for scheme in schemes:
                a = build_sampling(mesh, scheme, config.sampling.psn_selection)
                rr = fs if scheme == "fs" else solve(model, mesh, a, bcs, tol=tol)
                rep = split_errors(fr.u_full, fs.u_full, rr.u_full, model)
                row = {"scheme": scheme, "element_size": float(size), "n_dofs": mesh.n_dofs,
                       "n_sampling_nodes": a.n_sampling_nodes}
                row.update({k: getattr(rep, k) for k in
                            ("e_disp", "e_disp_disc", "e_disp_sam", "e_U", "e_U_disc", "e_U_sam")})
                rows.append(row)
        fits = {}
        if len(sizes) >= 3:
            for scheme in schemes:
                sel = [r for r in rows if r["scheme"] == scheme]
                h = [r["element_size"] for r in sel]
                per = {}
                for norm in ("e_disp", "e_U"):
                    v = [r[norm] for r in sel]
                    if min(v) > 0:
                        per[norm] = fit_convergence_order(h, v)
                    else:
                        logger.warning("%s %s is zero at some size; no order fitted", scheme, norm)
                fits[scheme] = per
    except LatticeQCError as exc:
        raise _with_context(config.name, exc) from exc
    result = SuiteResult(rows, fits)
    if export_files:
        out = Path(out_dir if out_dir is not None else config.output.dir)
        files = {"convergence": export.write_convergence_csv(out / "convergence.csv", rows)}
        if fits:
            files["fits"] = export.write_fit_csv(out / "convergence_fit.csv", fits)
        object.__setattr__(result, "files", files)
    return result
