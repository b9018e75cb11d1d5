"""Energy sampling rule for bilinear coarse-graining.

Inside a bilinear element the node-wise energy of a node whose neighbours all
share the element's interpolation is a full quadratic in the node's initial
position. Six primary sampling nodes (PSNs) with quadratic Lagrange functions
``psi`` therefore reproduce the energy sum of the element exactly, with weights
``w_i = sum(psi_i(r_a))`` over the element's members that are not sampled
explicitly. Secondary sampling nodes (SSNs) are counted explicitly with weight
1; the rest (NSNs) get weight 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .exceptions import SamplingError
from .mesh import GN, NIRN, CoarseMesh

logger = logging.getLogger(__name__)

NSN, SSN, PSN = 0, 1, 2
SAMPLING_ROLE_NAMES = {NSN: "NSN", SSN: "SSN", PSN: "PSN"}
SCHEMES = ("fs", "ess", "iss", "nas", "nss")
MAX_CONDITION = 1e8


@dataclass(frozen=True)
class MonomialBasis:
    exponents: tuple = ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1))

    def __len__(self):
        return len(self.exponents)

    def evaluate(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = points[:, 0:1], points[:, 1:2]
        px = np.array([e[0] for e in self.exponents])
        py = np.array([e[1] for e in self.exponents])
        return x ** px * y ** py


QUADRATIC = MonomialBasis()


def build_vandermonde(positions, basis: MonomialBasis = QUADRATIC) -> np.ndarray:
    """Row i holds the basis monomials evaluated at point i."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if len(positions) != len(basis):
        raise SamplingError(f"need {len(basis)} points, got {len(positions)}")
    if len(np.unique(positions, axis=0)) != len(positions):
        raise SamplingError("duplicate sampling positions")
    return basis.evaluate(positions)


@dataclass(frozen=True, eq=False)
class PsnSet:
    """Six primary sampling nodes of one element and their Lagrange system.

    Coordinates are shifted to ``center`` and divided by ``scale`` before the
    Vandermonde matrix is formed; the quadratic span is closed under that map,
    so ``psi`` is unchanged while the conditioning improves.
    """

    element_id: int
    node_ids: np.ndarray
    positions: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    basis: MonomialBasis = QUADRATIC
    _lu: tuple = field(default=None, repr=False)
    condition: float = np.inf

    @classmethod
    def create(cls, element_id, node_ids, positions, center=None, scale=None, basis=QUADRATIC):
        positions = np.asarray(positions, dtype=float)
        center = positions.mean(axis=0) if center is None else np.asarray(center, float)
        if scale is None:
            scale = np.maximum(np.ptp(positions, axis=0) / 2.0, 1e-300)
        scale = np.asarray(scale, float)
        lu, cond = None, np.inf
        try:
            a = build_vandermonde((positions - center) / scale, basis)
        except SamplingError:
            # coincident points; kept as a singular set
            a = None
        if a is not None:
            cond = float(np.linalg.cond(a))
            if np.isfinite(cond) and cond < 1e15:
                lu = sla.lu_factor(a.T)
        return cls(int(element_id), np.asarray(node_ids, dtype=np.int64), positions,
                   center, scale, basis, lu, cond)

    @property
    def vandermonde(self) -> np.ndarray:
        return build_vandermonde((self.positions - self.center) / self.scale, self.basis)

    def psi(self, points) -> np.ndarray:
        """``(n_points, 6)`` array of Lagrange values."""
        if self._lu is None:
            raise SamplingError(f"singular Vandermonde matrix in element {self.element_id}")
        m = self.basis.evaluate((np.atleast_2d(points) - self.center) / self.scale)
        return sla.lu_solve(self._lu, m.T).T


def eval_psi(psns: PsnSet, point) -> np.ndarray:
    """psi_1..psi_6 at a single point (or rows for several points)."""
    out = psns.psi(point)
    return out[0] if np.ndim(point) == 1 else out


@dataclass(frozen=True, eq=False)
class SamplingAssignment:
    scheme: str
    roles: np.ndarray
    weights: np.ndarray
    psn_sets: dict
    explicit_elements: tuple = ()

    def counts(self) -> dict:
        out = {name: int(np.sum(self.roles == r)) for r, name in SAMPLING_ROLE_NAMES.items()}
        out["sampling"] = out["SSN"] + out["PSN"]
        return out

    @property
    def n_sampling_nodes(self) -> int:
        return int(np.sum(self.roles != NSN))

    @property
    def has_negative_weights(self) -> bool:
        return bool(np.any(self.weights < 0))


def secondary_mask(mesh: CoarseMesh, scheme: str) -> np.ndarray:
    """Nodes sampled explicitly under ``scheme``, before explicit-element fallback."""
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise SamplingError(f"unknown sampling scheme {scheme!r}")
    roles = mesh.node_roles
    gn = roles == GN
    ssn = ~gn
    if scheme == "fs":
        ssn |= gn
    elif scheme == "ess":
        ssn |= mesh.edge_mask
    elif scheme == "iss":
        nirn = (roles == NIRN).astype(np.int8)
        touches_fr = (mesh.model.neighbor_matrix @ nirn) > 0
        ssn |= gn & (touches_fr | mesh.fr_boundary_mask)
    elif scheme == "nas":
        rn = (~gn).astype(np.int8)
        ssn |= gn & ((mesh.model.neighbor_matrix @ rn) > 0)
    return ssn


def assign_sampling_scheme(mesh: CoarseMesh, scheme: str) -> SamplingAssignment:
    """SSN/NSN roles for ``scheme``; weights are left unset (NaN)."""
    ssn = secondary_mask(mesh, scheme)
    roles = np.where(ssn, SSN, NSN).astype(np.int8)
    return SamplingAssignment(scheme.lower(), roles, np.full(len(roles), np.nan), {})


def _farthest_point_order(points, seed, rank):
    """Greedy farthest-point ordering starting at ``seed``; ties prefer lower
    ``rank`` values then lower index."""
    n = len(points)
    order = [seed]
    dmin = np.linalg.norm(points - points[seed], axis=1)
    used = np.zeros(n, dtype=bool)
    used[seed] = True
    while len(order) < n:
        score = np.where(used, -np.inf, dmin)
        best = score.max()
        tied = np.flatnonzero(np.isclose(score, best, rtol=0, atol=1e-9 * max(best, 1.0)) & ~used)
        pick = tied[np.lexsort((tied, rank[tied]))][0]
        order.append(pick)
        used[pick] = True
        dmin = np.minimum(dmin, np.linalg.norm(points - points[pick], axis=1))
    return order


def _candidate_pool(mesh: CoarseMesh, element, ssn_mask):
    model = mesh.model
    pos = model.positions
    members = element.member_nodes
    members = members[~ssn_mask[members]]
    if len(members) == 0:
        return members, []
    interior = ~element.on_edge(pos[members])
    nbr = model.neighbor_matrix
    homogeneous = np.array([
        bool(np.all(element.contains(pos[nbr.indices[nbr.indptr[m]:nbr.indptr[m + 1]]])))
        for m in members
    ])
    depth = element.edge_distance(pos[members])
    quarter = depth >= 0.25 * float(element.size.min()) - 1e-9 * float(element.size.max())
    pools = [
        members[interior & homogeneous & quarter],
        members[interior & homogeneous],
        members[interior],
        members,
    ]
    return members, pools


def select_primary_sampling_nodes(mesh: CoarseMesh, element, ssn_mask, variant="spread",
                                  max_condition=MAX_CONDITION):
    """Pick six spread-out PSNs for ``element`` or return ``None`` when the
    element has to be sampled explicitly.

    Candidates are non-SSN members, preferably interior nodes whose whole
    neighbourhood shares the element's interpolation and that sit at least a
    quarter element away from the edges. Selection is farthest-point sampling
    seeded at the node nearest the centroid. ``variant="perturbed"`` then moves
    every PSN to its nearest unused candidate, giving a second valid set.
    """
    pos = mesh.model.positions
    members, pools = _candidate_pool(mesh, element, ssn_mask)
    if len(members) < 6:
        return None
    center = element.centroid
    scale = element.size / 2.0
    for pool in pools:
        if len(pool) < 6:
            continue
        p = pos[pool]
        depth = element.edge_distance(p)
        seed = int(np.lexsort((pool, np.linalg.norm(p - center, axis=1)))[0])
        order = _farthest_point_order(p, seed, -depth)
        chosen = order[:6]
        psns = PsnSet.create(element.id, pool[chosen], p[chosen], center, scale)
        rest = order[6:]
        while psns.condition > max_condition and rest:
            chosen = chosen[:5] + [rest.pop(0)]
            psns = PsnSet.create(element.id, pool[chosen], p[chosen], center, scale)
        if psns.condition > max_condition:
            continue
        if variant == "perturbed":
            psns = _perturb(element, pool, p, chosen, center, scale, max_condition) or psns
        elif variant != "spread":
            raise SamplingError(f"unknown PSN selection variant {variant!r}")
        return psns
    logger.warning("element %d: no well-conditioned PSN set, sampling explicitly", element.id)
    return None


def _perturb(element, pool, p, chosen, center, scale, max_condition):
    chosen = list(chosen)
    for k in range(len(chosen)):
        d = np.linalg.norm(p - p[chosen[k]], axis=1)
        d[chosen] = np.inf
        if not np.isfinite(d.min()):
            continue
        trial = chosen.copy()
        trial[k] = int(np.argmin(d))
        psns = PsnSet.create(element.id, pool[trial], p[trial], center, scale)
        if psns.condition <= max_condition:
            chosen = trial
    psns = PsnSet.create(element.id, pool[chosen], p[chosen], center, scale)
    return psns if psns.condition <= max_condition else None


def compute_sampling_weights(mesh: CoarseMesh, assignment: SamplingAssignment, psn_sets) -> SamplingAssignment:
    """Fill PSN weights from ``psn_sets`` (element id -> PsnSet or None).

    Elements without a PSN set are sampled explicitly: all their members
    become SSNs.
    """
    pos = mesh.model.positions
    roles = assignment.roles.copy()
    weights = np.where(roles == SSN, 1.0, 0.0)
    explicit = []
    kept = {}
    for el in mesh.elements:
        psns = psn_sets.get(el.id)
        members = el.member_nodes
        if psns is None:
            free = members[roles[members] != SSN]
            if len(free):
                explicit.append(el.id)
                roles[free] = SSN
                weights[free] = 1.0
            continue
        if np.any(roles[psns.node_ids] == SSN):
            raise SamplingError(f"element {el.id}: a PSN is also an SSN")
        free = members[roles[members] != SSN]
        w = psns.psi(pos[free]).sum(axis=0)
        roles[psns.node_ids] = PSN
        weights[psns.node_ids] = w
        kept[el.id] = psns
        if np.any(w < 0):
            logger.debug("element %d has %d negative PSN weights (min %.3g)",
                         el.id, int(np.sum(w < 0)), w.min())
    weights[roles == NSN] = 0.0
    if np.any(weights < 0):
        logger.info("%d PSN weights are negative (min %.3g)", int(np.sum(weights < 0)), weights.min())
    return SamplingAssignment(assignment.scheme, roles, weights, kept, tuple(explicit))


def build_sampling(mesh: CoarseMesh, scheme: str, variant="spread") -> SamplingAssignment:
    """Roles, PSN selection and weights for every element."""
    base = assign_sampling_scheme(mesh, scheme)
    ssn = base.roles == SSN
    psn_sets = {}
    if base.scheme != "fs":
        for el in mesh.elements:
            psn_sets[el.id] = select_primary_sampling_nodes(mesh, el, ssn, variant)
    return compute_sampling_weights(mesh, base, psn_sets)
