"""Relative error norms between lattice displacement fields.

``displacement_error`` is the discrete L2 analogue over all nodes.
``energy_error`` is the H1 analogue: it compares relative displacements
``u_j - u_i`` over every pair of nodes joined by a live strut. Counting each
pair in both directions doubles numerator and denominator alike, so one term
per strut gives the same ratio.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import LatticeQCError

TRIANGLE_SLACK = 1e-12


class ErrorNormError(LatticeQCError, ValueError):
    category = "error_norm"


def _field(u, n=None):
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 2)
    if n is not None and len(u) != n:
        raise ErrorNormError(f"field has {len(u)} nodes, expected {n}")
    return u


def _ratio(num, den):
    if not den > 0:
        raise ErrorNormError("reference field has zero norm")
    return float(np.sqrt(num / den))


def displacement_error(u_ref, u_test, u_norm=None) -> float:
    """||u_ref - u_test|| / ||u_norm|| with ``u_norm`` defaulting to ``u_ref``."""
    u_ref = _field(u_ref)
    u_test = _field(u_test, len(u_ref))
    u_norm = u_ref if u_norm is None else _field(u_norm, len(u_ref))
    d = u_ref - u_test
    return _ratio(np.sum(d * d), np.sum(u_norm * u_norm))


def _pair_differences(model, u):
    s = model.struts[model.alive]
    return u[s[:, 1]] - u[s[:, 0]]


def energy_error(model, u_ref, u_test, u_norm=None) -> float:
    """Relative norm of relative-displacement differences over live struts."""
    n = model.n_nodes
    u_ref = _field(u_ref, n)
    u_test = _field(u_test, n)
    u_norm = u_ref if u_norm is None else _field(u_norm, n)
    d = _pair_differences(model, u_ref - u_test)
    r = _pair_differences(model, u_norm)
    return _ratio(np.sum(d * d), np.sum(r * r))


@dataclass(frozen=True)
class ErrorReport:
    e_disp: float
    e_disp_disc: float
    e_disp_sam: float
    e_U: float
    e_U_disc: float
    e_U_sam: float

    @property
    def triangle_ok_disp(self) -> bool:
        return self.e_disp <= self.e_disp_disc + self.e_disp_sam + TRIANGLE_SLACK

    @property
    def triangle_ok_energy(self) -> bool:
        return self.e_U <= self.e_U_disc + self.e_U_sam + TRIANGLE_SLACK

    @property
    def triangle_ok(self) -> tuple:
        return self.triangle_ok_disp, self.triangle_ok_energy

    def as_dict(self) -> dict:
        out = asdict(self)
        out["triangle_ok_disp"] = self.triangle_ok_disp
        out["triangle_ok_energy"] = self.triangle_ok_energy
        return out


def split_errors(u_fr, u_fs, u_rr, model) -> ErrorReport:
    """Total (FR vs RR), discretization (FR vs FS) and sampling (FS vs RR)
    errors, all normalized by the full-resolution field."""
    n = model.n_nodes
    u_fr, u_fs, u_rr = (_field(u, n) for u in (u_fr, u_fs, u_rr))
    return ErrorReport(
        e_disp=displacement_error(u_fr, u_rr),
        e_disp_disc=displacement_error(u_fr, u_fs),
        e_disp_sam=displacement_error(u_fs, u_rr, u_norm=u_fr),
        e_U=energy_error(model, u_fr, u_rr),
        e_U_disc=energy_error(model, u_fr, u_fs),
        e_U_sam=energy_error(model, u_fs, u_rr, u_norm=u_fr),
    )


@dataclass(frozen=True)
class ConvergenceFit:
    sizes: tuple
    norms: tuple
    order: float
    intercept: float
    r_squared: float

    def predict(self, size) -> float:
        return float(np.exp(self.intercept) * np.asarray(size, float) ** self.order)


def fit_convergence_order(sizes, norms) -> ConvergenceFit:
    """Least-squares slope of log(norm) against log(size)."""
    h = np.asarray(sizes, dtype=float)
    e = np.asarray(norms, dtype=float)
    if h.shape != e.shape or h.ndim != 1:
        raise ErrorNormError("sizes and norms must be 1-D and of equal length")
    if len(h) < 3:
        raise ErrorNormError("a convergence fit needs at least 3 sizes")
    if np.any(~np.isfinite(h)) or np.any(~np.isfinite(e)) or np.any(h <= 0) or np.any(e <= 0):
        raise ErrorNormError("sizes and norms must be positive")
    x, y = np.log(h), np.log(e)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return ConvergenceFit(tuple(h.tolist()), tuple(e.tolist()), float(slope), float(intercept), r2)
