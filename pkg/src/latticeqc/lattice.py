"""Periodic 2D truss lattices, strut kinematics and node-wise energies.

Displacement fields are ``(n_nodes, 2)`` arrays in mm. Kinematics are
linearized: a strut's elongation is the projection of the relative endpoint
displacement on its initial direction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exceptions import DeadStrutError, GeometryError

BOUNDARY_NAMES = ("bottom", "top", "left", "right")


@dataclass(frozen=True)
class Material:
    """Truss material and section; defaults are the aluminium-like values used
    throughout the benchmark studies (MPa, mm, mm^2)."""

    young_modulus: float = 70e3
    yield_stress: float = 134.0
    strut_length: float = 10.0
    cross_section: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not (np.isfinite(value) and value > 0):
                raise GeometryError(f"material {f.name} must be positive, got {value!r}")


@dataclass(frozen=True)
class LatticeNode:
    id: int
    position: np.ndarray
    boundary_sets: frozenset


@dataclass(frozen=True)
class Strut:
    id: int
    endpoints: tuple
    rest_length: float
    direction: np.ndarray
    offset: np.ndarray
    alive: bool


@dataclass(frozen=True, eq=False)
class LatticeModel:
    """Nodes, struts and material of a truss lattice.

    ``struts`` holds each unordered pair once as ``(alpha, beta)`` with
    ``alpha < beta``. ``alive`` flags struts that still carry load; dead
    struts stay in the arrays so strut ids remain stable during fracture.
    """

    positions: np.ndarray
    struts: np.ndarray
    material: Material
    alive: np.ndarray = None
    boundary_sets: dict = field(default_factory=dict)

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=float)
        struts = np.ascontiguousarray(self.struts, dtype=np.int64).reshape(-1, 2)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise GeometryError("positions must have shape (n, 2)")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("node positions must be finite")
        if len(struts):
            if struts.min() < 0 or struts.max() >= len(pos):
                raise GeometryError("strut endpoint out of range")
            if np.any(struts[:, 0] == struts[:, 1]):
                raise GeometryError("strut endpoints must differ")
            struts = np.sort(struts, axis=1)
            if len(np.unique(struts, axis=0)) != len(struts):
                raise GeometryError("duplicate strut")
        alive = (np.ones(len(struts), dtype=bool) if self.alive is None
                 else np.asarray(self.alive, dtype=bool).copy())
        if alive.shape != (len(struts),):
            raise GeometryError("alive mask does not match struts")
        pos.setflags(write=False)
        struts.setflags(write=False)
        alive.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "struts", struts)
        object.__setattr__(self, "alive", alive)
        sets = {k: np.asarray(v, dtype=np.int64) for k, v in self.boundary_sets.items()}
        object.__setattr__(self, "boundary_sets", sets)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_struts(self) -> int:
        return len(self.struts)

    @cached_property
    def offsets(self) -> np.ndarray:
        """C = r_beta0 - r_alpha0 for every strut."""
        return self.positions[self.struts[:, 1]] - self.positions[self.struts[:, 0]]

    @cached_property
    def rest_lengths(self) -> np.ndarray:
        return np.hypot(self.offsets[:, 0], self.offsets[:, 1])

    @cached_property
    def directions(self) -> np.ndarray:
        return self.offsets / self.rest_lengths[:, None]

    @cached_property
    def axial_stiffness(self) -> np.ndarray:
        """EA/l per strut."""
        m = self.material
        return m.young_modulus * m.cross_section / self.rest_lengths

    @cached_property
    def adjacency(self) -> list:
        """Live incident strut ids per node."""
        inc = [[] for _ in range(self.n_nodes)]
        for s in np.flatnonzero(self.alive):
            a, b = self.struts[s]
            inc[a].append(int(s))
            inc[b].append(int(s))
        return inc

    @cached_property
    def neighbor_matrix(self) -> sp.csr_matrix:
        """Symmetric boolean node-node matrix over live struts."""
        s = self.struts[self.alive]
        n = self.n_nodes
        data = np.ones(2 * len(s), dtype=bool)
        rows = np.concatenate([s[:, 0], s[:, 1]])
        cols = np.concatenate([s[:, 1], s[:, 0]])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))

    @cached_property
    def bar_matrix(self) -> sp.csr_matrix:
        """Sparse (n_struts, 2 n_nodes) map from nodal displacements to elongations."""
        m = self.n_struts
        a, b = self.struts[:, 0], self.struts[:, 1]
        nx, ny = self.directions[:, 0], self.directions[:, 1]
        rows = np.repeat(np.arange(m), 4)
        cols = np.stack([2 * a, 2 * a + 1, 2 * b, 2 * b + 1], axis=1).ravel()
        vals = np.stack([-nx, -ny, nx, ny], axis=1).ravel()
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, 2 * self.n_nodes))

    @property
    def bounding_box(self) -> np.ndarray:
        return np.array([self.positions.min(axis=0), self.positions.max(axis=0)])

    def node(self, i) -> LatticeNode:
        tags = frozenset(k for k, ids in self.boundary_sets.items() if i in ids)
        return LatticeNode(int(i), self.positions[i].copy(), tags)

    def strut(self, s) -> Strut:
        return Strut(int(s), tuple(int(v) for v in self.struts[s]),
                     float(self.rest_lengths[s]), self.directions[s].copy(),
                     self.offsets[s].copy(), bool(self.alive[s]))

    def with_alive(self, alive) -> "LatticeModel":
        return LatticeModel(self.positions, self.struts, self.material,
                            alive=alive, boundary_sets=self.boundary_sets)

    def is_connected(self) -> bool:
        from scipy.sparse.csgraph import connected_components
        n, _ = connected_components(self.neighbor_matrix, directed=False)
        return n == 1


def _boundary_sets(positions, tol):
    x, y = positions[:, 0], positions[:, 1]
    return {
        "bottom": np.flatnonzero(np.abs(y - y.min()) <= tol),
        "top": np.flatnonzero(np.abs(y - y.max()) <= tol),
        "left": np.flatnonzero(np.abs(x - x.min()) <= tol),
        "right": np.flatnonzero(np.abs(x - x.max()) <= tol),
    }


def generate_square_lattice(nx, ny, l0=10.0, bracing="x_braced", material=None):
    """Square grid of ``nx`` by ``ny`` cells with pitch ``l0``.

    ``bracing="x_braced"`` adds both diagonals of every cell; without them the
    pin-jointed grid has zero-energy shear modes.
    """
    if nx < 1 or ny < 1 or not l0 > 0:
        raise GeometryError("lattice dimensions must be positive")
    if bracing not in ("none", "x_braced"):
        raise GeometryError(f"unknown bracing {bracing!r}")
    material = material or Material(strut_length=l0)
    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    ids = j * (nx + 1) + i
    positions = np.stack([i.ravel() * l0, j.ravel() * l0], axis=1).astype(float)
    struts = [
        np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1),
        np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1),
    ]
    if bracing == "x_braced":
        struts.append(np.stack([ids[:-1, :-1].ravel(), ids[1:, 1:].ravel()], axis=1))
        struts.append(np.stack([ids[:-1, 1:].ravel(), ids[1:, :-1].ravel()], axis=1))
    struts = np.concatenate(struts)
    return LatticeModel(positions, struts, material,
                        boundary_sets=_boundary_sets(positions, 1e-9 * l0))


def generate_triangular_lattice(width_cells, height_rows, l0=10.0, material=None,
                                orientation="rows"):
    """Triangular lattice with horizontal rows spaced ``sqrt(3)/2 * l0``.

    Even rows hold ``width_cells + 1`` nodes starting at x = 0, odd rows hold
    ``width_cells`` nodes offset by ``l0 / 2``. ``orientation="columns"``
    swaps the axes so the close-packed lines run vertically.
    """
    w, rows = int(width_cells), int(height_rows)
    if w < 1 or rows < 1 or not l0 > 0:
        raise GeometryError("lattice dimensions must be positive")
    if orientation not in ("rows", "columns"):
        raise GeometryError(f"unknown orientation {orientation!r}")
    material = material or Material(strut_length=l0)
    dy = np.sqrt(3.0) / 2.0 * l0
    xs, ys, row_start = [], [], []
    count = 0
    for r in range(rows):
        n = w + 1 if r % 2 == 0 else w
        shift = 0.0 if r % 2 == 0 else 0.5
        row_start.append(count)
        xs.append((np.arange(n) + shift) * l0)
        ys.append(np.full(n, r * dy))
        count += n
    positions = np.stack([np.concatenate(xs), np.concatenate(ys)], axis=1)
    struts = []
    for r in range(rows):
        n = w + 1 if r % 2 == 0 else w
        base = row_start[r]
        k = np.arange(n - 1)
        struts.append(np.stack([base + k, base + k + 1], axis=1))
        if r + 1 == rows:
            continue
        up = row_start[r + 1]
        k = np.arange(n)
        if r % 2 == 0:
            # even node i sits between odd nodes i-1 and i of the next row
            left = k[k >= 1]
            struts.append(np.stack([base + left, up + left - 1], axis=1))
            right = k[k <= w - 1]
            struts.append(np.stack([base + right, up + right], axis=1))
        else:
            struts.append(np.stack([base + k, up + k], axis=1))
            struts.append(np.stack([base + k, up + k + 1], axis=1))
    struts = np.concatenate(struts)
    if orientation == "columns":
        positions = positions[:, ::-1].copy()
    return LatticeModel(positions, struts, material,
                        boundary_sets=_boundary_sets(positions, 1e-9 * l0))


def _segments_cross_open_rect(p, q, rect):
    """Vectorized test: does segment p->q pass through the open rectangle?"""
    xmin, ymin, xmax, ymax = rect
    d = q - p
    t0 = np.zeros(len(p))
    t1 = np.ones(len(p))
    ok = np.ones(len(p), dtype=bool)
    for k, (lo, hi) in enumerate(((xmin, xmax), (ymin, ymax))):
        dk = d[:, k]
        pk = p[:, k]
        flat = dk == 0
        ok &= ~flat | ((pk > lo) & (pk < hi))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - pk) / dk
            tb = (hi - pk) / dk
        tmin = np.where(flat, -np.inf, np.minimum(ta, tb))
        tmax = np.where(flat, np.inf, np.maximum(ta, tb))
        t0 = np.maximum(t0, tmin)
        t1 = np.minimum(t1, tmax)
    return ok & (t1 > t0)


def carve_notch(model: LatticeModel, notch):
    """Remove nodes strictly inside the rectangle ``(xmin, ymin, xmax, ymax)``
    and every strut that touches a removed node or crosses the open interior.

    Returns ``(new_model, old_to_new)``; removed nodes map to -1.
    """
    xmin, ymin, xmax, ymax = map(float, notch)
    identity = np.arange(model.n_nodes)
    if not (xmax > xmin and ymax > ymin):
        return model, identity
    # nodes within round-off of the rectangle's sides count as outside
    tol = 1e-9 * model.material.strut_length
    xmin, ymin, xmax, ymax = xmin + tol, ymin + tol, xmax - tol, ymax - tol
    pos = model.positions
    inside = ((pos[:, 0] > xmin) & (pos[:, 0] < xmax)
              & (pos[:, 1] > ymin) & (pos[:, 1] < ymax))
    p, q = pos[model.struts[:, 0]], pos[model.struts[:, 1]]
    crossing = _segments_cross_open_rect(p, q, (xmin, ymin, xmax, ymax))
    drop = inside[model.struts[:, 0]] | inside[model.struts[:, 1]] | crossing
    if not inside.any() and not drop.any():
        return model, identity
    old_to_new = np.full(model.n_nodes, -1, dtype=np.int64)
    keep = np.flatnonzero(~inside)
    old_to_new[keep] = np.arange(len(keep))
    struts = old_to_new[model.struts[~drop]]
    alive = model.alive[~drop]
    sets = {}
    for name, ids in model.boundary_sets.items():
        mapped = old_to_new[ids]
        sets[name] = mapped[mapped >= 0]
    new = LatticeModel(pos[keep], struts, model.material, alive=alive, boundary_sets=sets)
    return new, old_to_new


def notch_tip_nodes(before: LatticeModel, old_to_new) -> np.ndarray:
    """Surviving nodes (new ids) next to the notch ends.

    These are the nodes that neighboured a removed node and lie at or beyond
    the extreme removed positions along the notch's long axis.
    """
    old_to_new = np.asarray(old_to_new)
    removed = old_to_new < 0
    if not removed.any():
        return np.empty(0, dtype=np.int64)
    s = before.struts[before.alive]
    touching = removed[s[:, 0]] ^ removed[s[:, 1]]
    edge = s[touching]
    nearby = np.unique(np.where(removed[edge[:, 0]], edge[:, 1], edge[:, 0]))
    gone = before.positions[removed]
    axis = int(np.argmax(np.ptp(gone, axis=0)))
    lo, hi = gone[:, axis].min(), gone[:, axis].max()
    tol = 1e-9 * before.material.strut_length
    c = before.positions[nearby, axis]
    tips = nearby[(c <= lo + tol) | (c >= hi - tol)]
    # the mouth of an edge notch lies on the outer boundary and is no tip
    (x0, y0), (x1, y1) = before.bounding_box
    p = before.positions[tips]
    outer = (np.abs(p[:, 0] - x0) <= tol) | (np.abs(p[:, 0] - x1) <= tol) \
        | (np.abs(p[:, 1] - y0) <= tol) | (np.abs(p[:, 1] - y1) <= tol)
    return np.sort(old_to_new[tips[~outer]])


def remove_strut(model: LatticeModel, strut_id) -> LatticeModel:
    if not model.alive[strut_id]:
        raise DeadStrutError(f"strut {strut_id} is already dead")
    alive = model.alive.copy()
    alive[strut_id] = False
    return model.with_alive(alive)


def _as_field(model, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (model.n_nodes, 2):
        u = u.reshape(model.n_nodes, 2)
    return u


def elongations(model: LatticeModel, u) -> np.ndarray:
    """Linearized elongation of every strut (dead struts included)."""
    u = _as_field(model, u)
    du = u[model.struts[:, 1]] - u[model.struts[:, 0]]
    return np.einsum("ij,ij->i", du, model.directions)


def axial_stresses(model: LatticeModel, u) -> np.ndarray:
    return model.material.young_modulus * elongations(model, u) / model.rest_lengths


def strut_energies(model: LatticeModel, u) -> np.ndarray:
    """0.5 (EA/l) e^2 for live struts, 0 for dead ones."""
    e = elongations(model, u)
    return np.where(model.alive, 0.5 * model.axial_stiffness * e * e, 0.0)


def strut_elongation(model: LatticeModel, strut, u) -> float:
    if not model.alive[strut]:
        raise DeadStrutError(f"strut {strut} is dead")
    u = _as_field(model, u)
    a, b = model.struts[strut]
    return float(np.dot(u[b] - u[a], model.directions[strut]))


def strut_axial_stress(model: LatticeModel, strut, u) -> float:
    e = strut_elongation(model, strut, u)
    return model.material.young_modulus * e / float(model.rest_lengths[strut])


def node_energies(model: LatticeModel, u) -> np.ndarray:
    """Node-wise energy: each live strut's energy is split equally between its
    two endpoints."""
    half = 0.5 * strut_energies(model, u)
    out = np.zeros(model.n_nodes)
    np.add.at(out, model.struts[:, 0], half)
    np.add.at(out, model.struts[:, 1], half)
    return out


def node_energy(model: LatticeModel, node, u) -> float:
    u = _as_field(model, u)
    total = 0.0
    for s in model.adjacency[node]:
        e = strut_elongation(model, s, u)
        total += 0.25 * model.axial_stiffness[s] * e * e
    return total


def total_lattice_energy(model: LatticeModel, u) -> float:
    return float(node_energies(model, u).sum())
