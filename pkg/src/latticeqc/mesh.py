"""Coarse-graining of a lattice with 4-node bilinear quadrilaterals.

Elements are axis-aligned rectangles whose corners sit on lattice nodes. The
domain is cut by a tensor grid of x and y breaks; grid cells that overlap a
full-resolution rectangle keep every lattice node as a degree of freedom, the
remaining cells become elements.

Node roles (degrees-of-freedom view):

* ``IRN``  element corner, interpolating representative node
* ``NIRN`` node outside every element, non-interpolating representative node
* ``GN``   ghost node, displacement interpolated from its owner element
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .exceptions import BoundaryConditionError, MeshError
from .lattice import LatticeModel

IRN, NIRN, GN = 0, 1, 2
ROLE_NAMES = {IRN: "IRN", NIRN: "NIRN", GN: "GN"}


@dataclass(frozen=True, eq=False)
class QuadElement:
    id: int
    corner_rn_ids: tuple
    corner_positions: np.ndarray
    member_nodes: np.ndarray

    @property
    def lower(self):
        return self.corner_positions[0]

    @property
    def upper(self):
        return self.corner_positions[2]

    @property
    def size(self):
        return self.upper - self.lower

    @property
    def centroid(self):
        return 0.5 * (self.lower + self.upper)

    def contains(self, points, tol=None):
        points = np.atleast_2d(points)
        tol = 1e-9 * float(self.size.max()) if tol is None else tol
        return np.all((points >= self.lower - tol) & (points <= self.upper + tol), axis=1)

    def on_edge(self, points, tol=None):
        """True for points of the closed element lying on its boundary."""
        points = np.atleast_2d(points)
        tol = 1e-9 * float(self.size.max()) if tol is None else tol
        near = (np.abs(points - self.lower) <= tol) | (np.abs(points - self.upper) <= tol)
        return self.contains(points, tol) & near.any(axis=1)

    def edge_distance(self, points):
        points = np.atleast_2d(points)
        return np.minimum(points - self.lower, self.upper - points).min(axis=1)


def bilinear_shape_eval(element: QuadElement, point, tol=1e-9):
    """Bilinear shape functions of ``element`` at ``point``.

    Corners are ordered counter-clockwise from the lower-left one. Raises
    ``MeshError`` when the point lies outside the element by more than
    ``tol`` times the element size.
    """
    point = np.asarray(point, dtype=float)
    h = element.size
    if not element.contains(point, tol * float(h.max()))[0]:
        raise MeshError(f"point {point} outside element {element.id}")
    xi, eta = np.clip((point - element.lower) / h, 0.0, 1.0)
    return np.array([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])


def _bilinear_many(element, points):
    xi = (points[:, 0] - element.lower[0]) / element.size[0]
    eta = (points[:, 1] - element.lower[1]) / element.size[1]
    return np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=1)


@dataclass(frozen=True, eq=False)
class DofMap:
    """Representative node id <-> position in the reduced unknown vector.
    Node ``rn_ids[k]`` owns DOFs ``2k`` (x) and ``2k + 1`` (y)."""

    rn_ids: np.ndarray
    n_nodes: int

    @cached_property
    def index_of(self) -> np.ndarray:
        idx = np.full(self.n_nodes, -1, dtype=np.int64)
        idx[self.rn_ids] = np.arange(len(self.rn_ids))
        return idx

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.rn_ids)

    def dof(self, node, axis) -> int:
        k = self.index_of[node]
        if k < 0:
            raise BoundaryConditionError(f"node {node} is not a representative node")
        return int(2 * k + axis)


@dataclass(frozen=True, eq=False)
class CoarseMesh:
    model: LatticeModel
    elements: list
    node_roles: np.ndarray
    owner: np.ndarray
    x_breaks: np.ndarray
    y_breaks: np.ndarray
    fr_cells: np.ndarray

    @cached_property
    def rn_ids(self) -> np.ndarray:
        return np.flatnonzero(self.node_roles != GN)

    @cached_property
    def dof_map(self) -> DofMap:
        return DofMap(self.rn_ids, self.model.n_nodes)

    @property
    def n_dofs(self) -> int:
        return self.dof_map.n_dofs

    def role_counts(self) -> dict:
        return {name: int(np.sum(self.node_roles == r)) for r, name in ROLE_NAMES.items()}

    @cached_property
    def interpolation(self) -> sp.csr_matrix:
        """Scalar (n_nodes, n_rn) matrix mapping RN values to every node."""
        n = self.model.n_nodes
        idx = self.dof_map.index_of
        rows, cols, vals = [], [], []
        rn = self.rn_ids
        rows.append(rn)
        cols.append(idx[rn])
        vals.append(np.ones(len(rn)))
        pos = self.model.positions
        for el in self.elements:
            members = el.member_nodes
            if len(members) == 0:
                continue
            phi = _bilinear_many(el, pos[members])
            corner_cols = idx[np.asarray(el.corner_rn_ids)]
            rows.append(np.repeat(members, 4))
            cols.append(np.tile(corner_cols, len(members)))
            vals.append(phi.ravel())
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        # exact zeros from nodes lying on element edges are dropped
        keep = vals != 0.0
        return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, len(rn)))

    @cached_property
    def dof_interpolation(self) -> sp.csr_matrix:
        """Vector-valued (2 n_nodes, n_dofs) interpolation matrix."""
        return sp.kron(self.interpolation, sp.identity(2), format="csr")

    def fr_mask(self) -> np.ndarray:
        return self.node_roles == NIRN

    @cached_property
    def edge_mask(self) -> np.ndarray:
        """GNs lying on an edge of any element."""
        pos = self.model.positions
        mask = np.zeros(self.model.n_nodes, dtype=bool)
        gn = np.flatnonzero(self.node_roles == GN)
        for el in self.elements:
            hit = el.on_edge(pos[gn])
            mask[gn[hit]] = True
        return mask

    @cached_property
    def fr_boundary_mask(self) -> np.ndarray:
        """GNs lying on the boundary of a full-resolution grid cell."""
        pos = self.model.positions
        mask = np.zeros(self.model.n_nodes, dtype=bool)
        gn = np.flatnonzero(self.node_roles == GN)
        if len(gn) == 0:
            return mask
        for i, j in np.argwhere(self.fr_cells):
            lo = np.array([self.x_breaks[i], self.y_breaks[j]])
            hi = np.array([self.x_breaks[i + 1], self.y_breaks[j + 1]])
            tol = 1e-9 * float((hi - lo).max())
            p = pos[gn]
            inside = np.all((p >= lo - tol) & (p <= hi + tol), axis=1)
            on = ((np.abs(p - lo) <= tol) | (np.abs(p - hi) <= tol)).any(axis=1)
            mask[gn[inside & on]] = True
        return mask


def interpolate_full_field(mesh: CoarseMesh, u_rn) -> np.ndarray:
    """Full ``(n_nodes, 2)`` displacement field from the RN unknowns."""
    u_rn = np.asarray(u_rn, dtype=float).reshape(-1, 2)
    if len(u_rn) != len(mesh.rn_ids):
        raise MeshError("u_rn does not match the mesh DOF map")
    return np.asarray(mesh.interpolation @ u_rn)


def classify_dof_roles(mesh: CoarseMesh):
    """Per-node role array and counts per role."""
    return mesh.node_roles.copy(), mesh.role_counts()


def _snap(targets, candidates):
    candidates = np.unique(candidates)
    idx = np.abs(candidates[None, :] - np.asarray(targets)[:, None]).argmin(axis=1)
    return candidates[idx]


def _rows(values, tol):
    """Distinct coordinate values (within tol)."""
    v = np.sort(values)
    keep = np.concatenate([[True], np.diff(v) > tol])
    return v[keep]


def _node_lookup(positions, tol):
    scale = 1.0 / tol
    return {(round(x * scale), round(y * scale)): i for i, (x, y) in enumerate(positions)}


def _find_node(lookup, point, tol):
    scale = 1.0 / tol
    kx, ky = round(point[0] * scale), round(point[1] * scale)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            i = lookup.get((kx + dx, ky + dy))
            if i is not None:
                return i
    return None


def grid_breaks(model: LatticeModel, element_size):
    """Uniform element breaks snapped to lattice coordinates.

    The element count per axis is the smallest count whose elements are no
    larger than ``element_size`` (up to a 1e-6 relative slack). x breaks
    snap to node x-coordinates of the bottom row; y breaks snap to rows that
    carry a node at every x break, so corners always land on nodes.
    """
    if not element_size > 0:
        raise MeshError("element size must be positive")
    pos = model.positions
    (x0, y0), (x1, y1) = model.bounding_box
    l0 = model.material.strut_length
    tol = 1e-6 * l0
    nx = max(1, int(np.ceil((x1 - x0) / element_size - 1e-6)))
    ny = max(1, int(np.ceil((y1 - y0) / element_size - 1e-6)))
    bottom = pos[np.abs(pos[:, 1] - y0) <= tol]
    xb = _snap(np.linspace(x0, x1, nx + 1), bottom[:, 0])
    rows = _rows(pos[:, 1], tol)
    lookup = _node_lookup(pos, tol)
    ok_rows = [y for y in rows if all(_find_node(lookup, (x, y), tol) is not None for x in xb)]
    if not ok_rows:
        raise MeshError("no lattice row carries nodes at every x break")
    yb = _snap(np.linspace(y0, y1, ny + 1), np.array(ok_rows))
    return np.unique(xb), np.unique(yb)


def build_coarse_mesh(model: LatticeModel, element_size=None, fr_region=(),
                      x_breaks=None, y_breaks=None) -> CoarseMesh:
    """Tile the lattice with bilinear elements outside the full-resolution
    rectangles ``fr_region`` (each ``(xmin, ymin, xmax, ymax)`` in mm).

    A grid cell becomes full resolution when it overlaps any rectangle with
    positive area. Ghost nodes on shared element edges belong to the element
    with the lowest id.
    """
    pos = model.positions
    l0 = model.material.strut_length
    tol = 1e-6 * l0
    if x_breaks is None or y_breaks is None:
        if element_size is None:
            raise MeshError("element_size or explicit breaks required")
        gx, gy = grid_breaks(model, element_size)
        x_breaks = gx if x_breaks is None else x_breaks
        y_breaks = gy if y_breaks is None else y_breaks
    xb = np.asarray(x_breaks, dtype=float)
    yb = np.asarray(y_breaks, dtype=float)
    if np.any(np.diff(xb) <= 0) or np.any(np.diff(yb) <= 0):
        raise MeshError("breaks must be strictly increasing")
    (bx0, by0), (bx1, by1) = model.bounding_box
    if abs(xb[0] - bx0) > tol or abs(xb[-1] - bx1) > tol or abs(yb[0] - by0) > tol \
            or abs(yb[-1] - by1) > tol:
        raise MeshError("breaks must span the lattice bounding box")

    nx, ny = len(xb) - 1, len(yb) - 1
    fr_cells = np.zeros((nx, ny), dtype=bool)
    for rect in fr_region:
        rx0, ry0, rx1, ry1 = map(float, rect)
        if not (rx1 > rx0 and ry1 > ry0):
            raise MeshError(f"degenerate full-resolution rectangle {rect}")
        ox = (np.minimum(xb[1:], rx1) - np.maximum(xb[:-1], rx0)) > tol
        oy = (np.minimum(yb[1:], ry1) - np.maximum(yb[:-1], ry0)) > tol
        fr_cells |= ox[:, None] & oy[None, :]

    lookup = _node_lookup(pos, tol)
    elements = []
    corner_nodes = set()
    for j in range(ny):
        for i in range(nx):
            if fr_cells[i, j]:
                continue
            corners = [(xb[i], yb[j]), (xb[i + 1], yb[j]), (xb[i + 1], yb[j + 1]), (xb[i], yb[j + 1])]
            ids = []
            for c in corners:
                k = _find_node(lookup, c, tol)
                if k is None:
                    raise MeshError(f"element corner {c} is not a lattice node")
                ids.append(k)
            corner_nodes.update(ids)
            elements.append(QuadElement(len(elements), tuple(ids), pos[ids].copy(), np.empty(0, np.int64)))

    roles = np.full(model.n_nodes, NIRN, dtype=np.int8)
    owner = np.full(model.n_nodes, -1, dtype=np.int64)
    for el in elements:
        free = owner < 0
        hit = free & el.contains(pos, tol)
        owner[hit] = el.id
    corner_nodes = np.array(sorted(corner_nodes), dtype=np.int64)
    roles[owner >= 0] = GN
    roles[corner_nodes] = IRN
    owner[corner_nodes] = -1
    members = {el.id: [] for el in elements}
    for node in np.flatnonzero(owner >= 0):
        members[owner[node]].append(node)
    elements = [QuadElement(el.id, el.corner_rn_ids, el.corner_positions,
                            np.array(members[el.id], dtype=np.int64)) for el in elements]
    return CoarseMesh(model, elements, roles, owner, xb, yb, fr_cells)


def full_resolution_mesh(model: LatticeModel) -> CoarseMesh:
    """Degenerate mesh without elements: every node is its own DOF."""
    (x0, y0), (x1, y1) = model.bounding_box
    return CoarseMesh(model, [], np.full(model.n_nodes, NIRN, dtype=np.int8),
                      np.full(model.n_nodes, -1, dtype=np.int64),
                      np.array([x0, x1]), np.array([y0, y1]), np.ones((1, 1), dtype=bool))


def with_model(mesh: CoarseMesh, model: LatticeModel) -> CoarseMesh:
    """Same mesh over a lattice that differs only in its alive mask."""
    if model.n_nodes != mesh.model.n_nodes:
        raise MeshError("lattice node set changed")
    new = CoarseMesh(model, mesh.elements, mesh.node_roles, mesh.owner,
                     mesh.x_breaks, mesh.y_breaks, mesh.fr_cells)
    for key in ("rn_ids", "dof_map", "interpolation", "dof_interpolation",
                "edge_mask", "fr_boundary_mask"):
        if key in mesh.__dict__:
            new.__dict__[key] = mesh.__dict__[key]
    return new
