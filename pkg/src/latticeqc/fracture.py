"""Displacement-controlled loading with progressive strut failure.

A live strut fails once its tensile axial stress reaches the yield stress;
compression never fails. Within a load step the most over-stressed strut is
removed and the system re-solved until no strut exceeds the limit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LatticeQCError, SolverError
from .lattice import LatticeModel, axial_stresses
from .mesh import GN, CoarseMesh, with_model
from .sampling import SamplingAssignment
from .solver import (DirichletBC, apply_boundary_conditions, assemble_reduced_stiffness,
                     reduced_bar_matrix, rn_constraints, solve_linear_static)

logger = logging.getLogger(__name__)

# stresses within this relative margin of the yield stress count as failed
RATIO_SLACK = 1e-12
# ratios this close are ties (mirror-symmetric struts); lower strut id wins
TIE_TOL = 1e-9


class FractureError(LatticeQCError, ValueError):
    category = "fracture"


@dataclass(frozen=True)
class FractureLoading:
    """Prescribed displacement ramp on ``nodes`` along ``axis``."""

    nodes: tuple
    axis: int
    total_displacement: float
    n_steps: int = 100
    batch: bool = False

    def __post_init__(self):
        if self.n_steps < 1:
            raise FractureError("need at least one load step")
        if self.axis not in (0, 1):
            raise FractureError("axis must be 0 or 1")
        object.__setattr__(self, "nodes", tuple(int(n) for n in np.atleast_1d(self.nodes)))

    def bc(self, step) -> DirichletBC:
        return DirichletBC(self.nodes, self.axis, self.total_displacement * step / self.n_steps)


@dataclass(frozen=True)
class LoadStep:
    step: int
    displacement: float
    reaction: float
    newly_failed: tuple = ()
    failed_count: int = 0


@dataclass(frozen=True, eq=False)
class FractureHistory:
    steps: tuple
    dead_struts: tuple
    external_work: float
    terminated: bool = False
    reason: str = ""
    model: LatticeModel = None
    solution: object = None
    coarse_failures: tuple = field(default=())

    @property
    def displacements(self) -> np.ndarray:
        return np.array([s.displacement for s in self.steps])

    @property
    def reactions(self) -> np.ndarray:
        return np.array([s.reaction for s in self.steps])

    @property
    def first_failure(self):
        return self.dead_struts[0] if self.dead_struts else None


def overstress_ratios(model: LatticeModel, u_full, yield_stress=None) -> np.ndarray:
    """sigma / sigma_y per strut; dead struts get -inf."""
    sy = model.material.yield_stress if yield_stress is None else float(yield_stress)
    ratio = axial_stresses(model, u_full) / sy
    return np.where(model.alive, ratio, -np.inf)


def evaluate_failure_criterion(model: LatticeModel, u_full, yield_stress=None) -> list:
    """``(strut, ratio)`` pairs of live struts at or above the tensile limit,
    most over-stressed first.

    Ratios within ``TIE_TOL`` (relative) of the leader of their run are
    treated as equal and ordered by strut id, so symmetric struts fail in a
    reproducible order regardless of round-off.
    """
    ratio = overstress_ratios(model, u_full, yield_stress)
    hit = np.flatnonzero(ratio >= 1.0 - RATIO_SLACK)
    order = list(hit[np.lexsort((hit, -ratio[hit]))])
    out = []
    while order:
        lead = ratio[order[0]]
        k = 1
        while k < len(order) and ratio[order[k]] >= lead * (1.0 - TIE_TOL):
            k += 1
        out.extend(sorted(order[:k]))
        order = order[k:]
    return [(int(s), float(ratio[s])) for s in out]


def external_work(history) -> float:
    """Trapezoidal integral of reaction over prescribed displacement.

    Accepts a ``FractureHistory``, a sequence of ``LoadStep`` or a
    ``(displacements, reactions)`` pair.
    """
    if isinstance(history, FractureHistory):
        u, f = history.displacements, history.reactions
    elif isinstance(history, tuple) and len(history) == 2 and not isinstance(history[0], LoadStep):
        u, f = (np.asarray(v, dtype=float) for v in history)
    else:
        u = np.array([s.displacement for s in history])
        f = np.array([s.reaction for s in history])
    if len(u) < 2 or len(u) != len(f):
        raise FractureError("external work needs at least two recorded steps")
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(u)))


class _Stepper:
    """Re-solves the reduced system for changing alive masks and load levels."""

    def __init__(self, mesh, assignment, bcs, loading, tol):
        self.mesh = mesh
        self.assignment = assignment
        self.bcs = tuple(bcs)
        self.loading = loading
        self.tol = tol
        self.bt = reduced_bar_matrix(mesh.model, mesh)
        self.loaded_dofs, _ = rn_constraints(mesh, [loading.bc(1)])

    def solve(self, model, step):
        mesh = with_model(self.mesh, model)
        system = assemble_reduced_stiffness(model, mesh, self.assignment, bt=self.bt)
        dofs, values = rn_constraints(mesh, self.bcs + (self.loading.bc(step),))
        sol = solve_linear_static(apply_boundary_conditions(system, dofs, values), self.tol)
        return sol, sol.reaction_sum(self.loaded_dofs)


def run_quasistatic_fracture(model: LatticeModel, mesh: CoarseMesh, assignment: SamplingAssignment,
                             bcs, loading: FractureLoading, tol=1e-10) -> FractureHistory:
    """Ramp the prescribed displacement in ``loading.n_steps`` equal
    increments, failing struts after every solve.

    ``bcs`` holds the fixed supports; the ramped constraint comes from
    ``loading``. The reaction reported per step is the sum of the reactions on
    the loaded degrees of freedom. A singular or unsolvable system ends the
    run early with ``terminated=True``.
    """
    if mesh.model.n_nodes != model.n_nodes:
        raise FractureError("mesh and lattice disagree on the node set")
    stepper = _Stepper(mesh, assignment, bcs, loading, tol)
    ghost = mesh.node_roles == GN
    steps = [LoadStep(0, 0.0, 0.0, (), int(np.sum(~model.alive)))]
    dead = []
    coarse = []
    terminated, reason, sol = False, "", None
    for k in range(1, loading.n_steps + 1):
        newly = []
        try:
            sol, reaction = stepper.solve(model, k)
            while True:
                failing = evaluate_failure_criterion(model, sol.u_full)
                if not failing:
                    break
                batch = [s for s, _ in failing] if loading.batch else [failing[0][0]]
                alive = model.alive.copy()
                alive[batch] = False
                model = model.with_alive(alive)
                newly.extend(batch)
                for s in batch:
                    if ghost[model.struts[s]].any():
                        coarse.append(s)
                        logger.warning("strut %d failed in the coarse-grained region; "
                                       "consider enlarging the full-resolution region", s)
                sol, reaction = stepper.solve(model, k)
        except SolverError as exc:
            terminated, reason = True, f"step {k}: {exc}"
            dead.extend(newly)
            logger.warning("fracture run stopped at %s", reason)
            break
        dead.extend(newly)
        u = loading.total_displacement * k / loading.n_steps
        steps.append(LoadStep(k, u, float(reaction), tuple(newly), int(np.sum(~model.alive))))
    work = external_work(steps) if len(steps) >= 2 else 0.0
    return FractureHistory(tuple(steps), tuple(dead), work, terminated, reason, model, sol,
                           tuple(coarse))
