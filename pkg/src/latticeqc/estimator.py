"""Scikit-learn style wrapper around mesh construction, sampling and solve.

``fit`` takes a ``LatticeModel`` (it plays the role of ``X``) and prepares the
reduced system; ``transform`` maps reduced unknowns to the full lattice field
and ``inverse_transform`` restricts a full field back to the representative
nodes. ``predict`` solves for given boundary conditions.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ConfigError
from .lattice import LatticeModel
from .mesh import build_coarse_mesh, full_resolution_mesh, interpolate_full_field
from .sampling import SCHEMES, build_sampling
from .solver import (apply_boundary_conditions, assemble_reduced_stiffness, reduced_bar_matrix,
                     rn_constraints, solve_linear_static)


def check_lattice(model) -> LatticeModel:
    if not isinstance(model, LatticeModel):
        raise ConfigError(f"expected a LatticeModel, got {type(model).__name__}")
    if model.n_nodes == 0:
        raise ConfigError("lattice has no nodes")
    return model


def check_rectangles(rects):
    out = []
    for r in rects or ():
        r = tuple(float(v) for v in r)
        if len(r) != 4 or not (r[2] > r[0] and r[3] > r[1]):
            raise ConfigError(f"bad rectangle {r}; expected (xmin, ymin, xmax, ymax)")
        out.append(r)
    return tuple(out)


class QuasicontinuumSolver(TransformerMixin, BaseEstimator):
    """Coarse-grained linear lattice solver.

    Parameters
    ----------
    element_size : float or None
        Element edge length in mm. ``None`` keeps every node (full resolution).
    fr_regions : sequence of (xmin, ymin, xmax, ymax)
        Rectangles kept at full resolution.
    scheme : {"fs", "ess", "iss", "nas", "nss"}
    psn_selection : {"spread", "perturbed"}
    tol : float
        Relative residual tolerance of the linear solve.
    """

    def __init__(self, element_size=None, fr_regions=(), scheme="iss", psn_selection="spread", tol=1e-10):
        self.element_size = element_size
        self.fr_regions = fr_regions
        self.scheme = scheme
        self.psn_selection = psn_selection
        self.tol = tol

    def _validate_params(self):
        if self.element_size is not None and not (
                isinstance(self.element_size, numbers.Real) and self.element_size > 0):
            raise ConfigError("element_size must be a positive number or None")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.psn_selection not in ("spread", "perturbed"):
            raise ConfigError("psn_selection must be 'spread' or 'perturbed'")
        if not (isinstance(self.tol, numbers.Real) and 0 < self.tol < 1):
            raise ConfigError("tol must lie in (0, 1)")
        return check_rectangles(self.fr_regions)

    def fit(self, X, y=None):
        model = check_lattice(X)
        rects = self._validate_params()
        if self.element_size is None:
            self.mesh_ = full_resolution_mesh(model)
        else:
            self.mesh_ = build_coarse_mesh(model, element_size=self.element_size, fr_region=rects)
        self.sampling_ = build_sampling(self.mesh_, self.scheme, self.psn_selection)
        self.lattice_ = model
        self.bar_matrix_ = reduced_bar_matrix(model, self.mesh_)
        self.system_ = assemble_reduced_stiffness(model, self.mesh_, self.sampling_, bt=self.bar_matrix_)
        self.n_dofs_ = self.mesh_.n_dofs
        self.n_sampling_nodes_ = self.sampling_.n_sampling_nodes
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        """Full ``(n_nodes, 2)`` field from reduced unknowns ``(n_rn, 2)``."""
        check_is_fitted(self, "mesh_")
        u = check_array(np.asarray(X, dtype=float).reshape(-1, 2))
        return interpolate_full_field(self.mesh_, u)

    def inverse_transform(self, X):
        check_is_fitted(self, "mesh_")
        u = check_array(np.asarray(X, dtype=float).reshape(-1, 2))
        if len(u) != self.lattice_.n_nodes:
            raise ConfigError("full field does not match the fitted lattice")
        return u[self.mesh_.rn_ids]

    def solve(self, bcs, loads=()):
        check_is_fitted(self, "system_")
        system = self.system_
        if loads:
            system = assemble_reduced_stiffness(self.lattice_, self.mesh_, self.sampling_, loads,
                                                bt=self.bar_matrix_)
        dofs, values = rn_constraints(self.mesh_, bcs)
        return solve_linear_static(apply_boundary_conditions(system, dofs, values), self.tol)

    def predict(self, bcs, loads=()):
        """Full displacement field for the given constraints and loads."""
        return self.solve(bcs, loads).u_full
