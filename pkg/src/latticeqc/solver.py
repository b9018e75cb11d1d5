"""Assembly of the sampled energy over representative-node DOFs and the
linear static solve.

The sampled energy ``sum_a w_a U_a`` with half-split node energies equals a
strut sum with coefficient ``(w_a + w_b) / 2`` per strut ``(a, b)``. With the
interpolation ``u = T u_rn`` and elongations ``e = B u`` the reduced stiffness
is ``(B T)^T diag(c EA/l) (B T)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import BoundaryConditionError, SolverError
from .lattice import LatticeModel, elongations, node_energies
from .mesh import CoarseMesh, DofMap, full_resolution_mesh, interpolate_full_field
from .sampling import SSN, SamplingAssignment

logger = logging.getLogger(__name__)

AXES = {"x": (0,), "y": (1,), "xy": (0, 1)}


@dataclass(frozen=True)
class DirichletBC:
    """Prescribed displacement ``value`` (mm) on ``axis`` (0 = x, 1 = y) of
    every node in ``nodes``."""

    nodes: tuple
    axis: int
    value: float = 0.0

    def scaled(self, factor):
        return DirichletBC(self.nodes, self.axis, self.value * factor)


@dataclass(frozen=True)
class PointLoad:
    nodes: tuple
    axis: int
    value: float


def strut_coefficients(model: LatticeModel, weights) -> np.ndarray:
    """Effective EA/l per strut after sampling weights; dead struts give 0."""
    a, b = model.struts[:, 0], model.struts[:, 1]
    c = 0.5 * (weights[a] + weights[b]) * model.axial_stiffness
    return np.where(model.alive, c, 0.0)


def reduced_bar_matrix(model: LatticeModel, mesh: CoarseMesh) -> sp.csr_matrix:
    """Elongations as a linear map of the RN DOFs, ``B T``."""
    return (model.bar_matrix @ mesh.dof_interpolation).tocsr()


def external_force_vector(model: LatticeModel, loads=()) -> np.ndarray:
    f = np.zeros((model.n_nodes, 2))
    for load in loads:
        np.add.at(f[:, load.axis], np.asarray(load.nodes, dtype=np.int64), load.value)
    return f


def rn_constraints(mesh: CoarseMesh, bcs):
    """Map lattice-level Dirichlet data to RN DOFs.

    Constraints on representative nodes apply directly. A constrained ghost
    node on an element edge passes its value to whichever of its two corners
    are not constrained otherwise. Ghost nodes inside an element only accept
    constraints that their already constrained corners reproduce. Every
    constrained ghost node is checked against the interpolation at the end,
    so edge data has to be linear between element corners.
    """
    T = mesh.interpolation
    fixed = {}

    def put(dof, value):
        old = fixed.get(dof)
        if old is not None and abs(old - value) > 1e-12 * max(1.0, abs(old)):
            raise BoundaryConditionError(f"conflicting prescribed values on DOF {dof}")
        fixed[dof] = value

    ghost = []
    for bc in bcs:
        for node in np.atleast_1d(np.asarray(bc.nodes, dtype=np.int64)):
            row = slice(T.indptr[node], T.indptr[node + 1])
            cols, phi = T.indices[row], T.data[row]
            if len(cols) == 1 and phi[0] == 1.0:
                put(int(2 * cols[0] + bc.axis), float(bc.value))
            else:
                ghost.append((cols, phi, bc.axis, float(bc.value), int(node)))
    for cols, _, axis, value, _ in ghost:
        if len(cols) <= 2:
            for col in cols:
                fixed.setdefault(int(2 * col + axis), value)
    for cols, phi, axis, value, node in ghost:
        if any(int(2 * c + axis) not in fixed for c in cols):
            raise BoundaryConditionError(
                f"node {node} is an interior ghost node with unconstrained element corners")
        got = sum(p * fixed[int(2 * c + axis)] for c, p in zip(cols, phi))
        if abs(got - value) > 1e-9 * max(1.0, abs(value)):
            raise BoundaryConditionError(
                f"prescribed value on ghost node {node} is not reproduced by its element corners")
    dofs = np.array(sorted(fixed), dtype=np.int64)
    return dofs, np.array([fixed[d] for d in dofs], dtype=float)


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    stiffness: sp.csr_matrix
    load: np.ndarray
    dof_map: DofMap
    mesh: CoarseMesh = None
    assignment: SamplingAssignment = None
    constrained: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    prescribed: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_dofs(self):
        return self.stiffness.shape[0]

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)

    def partition(self):
        """Free block and right-hand side after moving prescribed columns."""
        free = self.free
        K = self.stiffness
        k_ff = K[free][:, free]
        rhs = self.load[free] - K[free][:, self.constrained] @ self.prescribed
        return k_ff, rhs


@dataclass(frozen=True, eq=False)
class Solution:
    u_rn: np.ndarray
    u_full: np.ndarray
    total_energy: float
    reactions: dict
    solver_residual: float
    constrained: np.ndarray = None
    reaction_values: np.ndarray = None

    def reaction_sum(self, dofs) -> float:
        return float(sum(self.reactions[int(d)] for d in dofs))


def sampled_total_energy(model: LatticeModel, mesh: CoarseMesh, assignment: SamplingAssignment, u_rn) -> float:
    """Sum of SSN energies plus weighted PSN energies of the interpolated field."""
    u = interpolate_full_field(mesh, u_rn)
    energies = node_energies(model, u)
    ssn = assignment.roles == SSN
    psn = ~ssn & (assignment.weights != 0)
    return float(energies[ssn].sum() + np.dot(assignment.weights[psn], energies[psn]))


def residual_forces(model: LatticeModel, mesh: CoarseMesh, assignment: SamplingAssignment, u_rn,
                    loads=()) -> np.ndarray:
    """Out-of-balance force on every RN DOF: minus the sampled energy gradient
    plus external forces distributed through the shape functions."""
    u = interpolate_full_field(mesh, u_rn)
    tension = strut_coefficients(model, assignment.weights) * elongations(model, u)
    g_full = model.bar_matrix.T @ tension
    T = mesh.dof_interpolation
    f = external_force_vector(model, loads).ravel()
    return T.T @ (f - g_full)


def assemble_reduced_stiffness(model: LatticeModel, mesh: CoarseMesh, assignment: SamplingAssignment,
                               loads=(), bt=None) -> ReducedSystem:
    """Hessian of the sampled energy with respect to the RN DOFs.

    ``bt`` may pass a cached ``reduced_bar_matrix``; it does not depend on
    which struts are alive.
    """
    if np.isnan(assignment.weights).any():
        raise SolverError("sampling weights are not computed")
    bt = reduced_bar_matrix(model, mesh) if bt is None else bt
    c = strut_coefficients(model, assignment.weights)
    K = (bt.T @ sp.diags(c) @ bt).tocsr()
    K = (0.5 * (K + K.T)).tocsr()
    K.sort_indices()
    load = mesh.dof_interpolation.T @ external_force_vector(model, loads).ravel()
    return ReducedSystem(K, load, mesh.dof_map, mesh, assignment)


def apply_boundary_conditions(system: ReducedSystem, dofs, values=None) -> ReducedSystem:
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.zeros(len(dofs)) if values is None else np.asarray(values, dtype=float)
    if len(dofs) != len(values):
        raise BoundaryConditionError("one prescribed value per constrained DOF")
    if len(dofs) and (dofs.min() < 0 or dofs.max() >= system.n_dofs):
        raise BoundaryConditionError("constrained DOF is not an RN DOF")
    if len(np.unique(dofs)) != len(dofs):
        raise BoundaryConditionError("duplicate constrained DOF")
    order = np.argsort(dofs)
    return ReducedSystem(system.stiffness, system.load, system.dof_map, system.mesh,
                         system.assignment, dofs[order], values[order])


def _relative_residual(k, x, b):
    r = np.linalg.norm(k @ x - b)
    nb = np.linalg.norm(b)
    return r / nb if nb > 0 else r


def _solve_free_block(k_ff, rhs, tol):
    if rhs.size == 0:
        return rhs.copy(), 0.0
    if not np.any(rhs):
        return np.zeros_like(rhs), 0.0
    # DOFs without any stiffness (isolated nodes) stay at zero when unloaded
    active = np.abs(k_ff.diagonal()) > 0
    if not active.all():
        if np.any(rhs[~active]):
            return np.zeros_like(rhs), np.inf
        x = np.zeros_like(rhs)
        x[active], _ = _solve_free_block(k_ff[active][:, active], rhs[active], tol)
        return x, _relative_residual(k_ff, x, rhs)
    x = None
    try:
        lu = spla.splu(k_ff.tocsc(), permc_spec="COLAMD")
        x = lu.solve(rhs)
        for _ in range(2):
            res = _relative_residual(k_ff, x, rhs)
            if not np.isfinite(res) or res <= tol:
                break
            x = x + lu.solve(rhs - k_ff @ x)
    except RuntimeError as exc:
        logger.info("direct factorization failed (%s); trying MINRES", exc)
    res = np.inf if x is None else _relative_residual(k_ff, x, rhs)
    if np.isfinite(res) and res <= tol:
        return x, res
    # singular but consistent systems (zero-energy modes) or loss of accuracy
    y = np.zeros_like(rhs)
    res_y = np.inf
    for _ in range(4):
        # restarted on the residual; each pass recovers digits lost to round-off
        dy, _ = spla.minres(k_ff, rhs - k_ff @ y, rtol=tol * 1e-2, maxiter=20 * k_ff.shape[0])
        y = y + dy
        res_y = _relative_residual(k_ff, y, rhs)
        if res_y <= tol:
            break
    if res_y < res:
        x, res = y, res_y
    return x, res


def solve_linear_static(system: ReducedSystem, tol=1e-10) -> Solution:
    """Solve the constrained system; reactions are ``K u - f`` on the
    constrained DOFs."""
    k_ff, rhs = system.partition()
    free = system.free
    x, res = _solve_free_block(k_ff, rhs, tol)
    if not (np.isfinite(res) and res <= tol):
        msg = f"linear solve did not converge (relative residual {res:.3e})"
        if system.assignment is not None and system.assignment.has_negative_weights:
            msg += "; negative sampling weights may make the system indefinite"
        raise SolverError(msg)
    u = np.zeros(system.n_dofs)
    u[free] = x
    u[system.constrained] = system.prescribed
    react = system.stiffness[system.constrained] @ u - system.load[system.constrained]
    reactions = {int(d): float(r) for d, r in zip(system.constrained, react)}
    mesh = system.mesh
    if mesh is not None:
        u_full = interpolate_full_field(mesh, u)
        energy = sampled_total_energy(mesh.model, mesh, system.assignment, u)
    else:
        u_full, energy = None, float(0.5 * u @ (system.stiffness @ u))
    return Solution(u, u_full, energy, reactions, float(res), system.constrained.copy(), react)


def solve(model: LatticeModel, mesh: CoarseMesh, assignment: SamplingAssignment, bcs=(), loads=(),
          tol=1e-10, bt=None) -> Solution:
    system = assemble_reduced_stiffness(model, mesh, assignment, loads, bt=bt)
    dofs, values = rn_constraints(mesh, bcs)
    return solve_linear_static(apply_boundary_conditions(system, dofs, values), tol)


def full_sampling(mesh: CoarseMesh) -> SamplingAssignment:
    n = mesh.model.n_nodes
    return SamplingAssignment("fs", np.full(n, SSN, dtype=np.int8), np.ones(n), {})


def solve_full_resolution(model: LatticeModel, bcs=(), loads=(), tol=1e-10) -> Solution:
    """Reference solve with every lattice node carrying its own DOFs."""
    mesh = full_resolution_mesh(model)
    return solve(model, mesh, full_sampling(mesh), bcs, loads, tol)
