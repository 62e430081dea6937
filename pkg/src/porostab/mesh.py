"""Structured hexahedral grids.

Cells and nodes are numbered lexicographically with ``i`` fastest, then
``j``, then ``k``.  Local node ``a + 2*b + 4*c`` of cell ``(i, j, k)`` is
global node ``(i + a, j + b, k + c)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import ConfigError

SIDES = ("x-", "x+", "y-", "y+", "z-", "z+")
BOUNDARY = -1

# (axis, 0 for low / 1 for high) for each side token
_SIDE_AXIS = {s: (i // 2, i % 2) for i, s in enumerate(SIDES)}


@dataclass(frozen=True)
class FaceSet:
    """Axis-aligned faces.

    ``right`` holds ``BOUNDARY`` for boundary faces.  ``distance`` is the
    center-to-center distance for interior faces and the center-to-face
    distance for boundary faces.
    """

    left: np.ndarray
    right: np.ndarray
    area: np.ndarray
    distance: np.ndarray
    normal: np.ndarray

    def __len__(self):
        return len(self.left)

    @property
    def interior(self):
        return self.right != BOUNDARY

    def subset(self, mask) -> "FaceSet":
        return FaceSet(self.left[mask], self.right[mask], self.area[mask],
                       self.distance[mask], self.normal[mask])


@dataclass(frozen=True)
class BoundarySet:
    side: str
    faces: FaceSet
    nodes: np.ndarray


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    nx: int
    ny: int
    nz: int
    dx: float
    dy: float
    dz: float
    region_of_cell: np.ndarray
    origin: tuple = (0.0, 0.0, 0.0)

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def spacing(self):
        return (self.dx, self.dy, self.dz)

    @property
    def n_cells(self):
        return self.nx * self.ny * self.nz

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1) * (self.nz + 1)

    @property
    def cell_volume(self):
        return self.dx * self.dy * self.dz

    @cached_property
    def cell_volumes(self):
        return np.full(self.n_cells, self.cell_volume)

    @cached_property
    def cell_ijk(self):
        """(n_cells, 3) integer indices."""
        k, j, i = np.meshgrid(np.arange(self.nz), np.arange(self.ny),
                              np.arange(self.nx), indexing="ij")
        return np.column_stack([i.ravel(), j.ravel(), k.ravel()])

    @cached_property
    def node_ijk(self):
        k, j, i = np.meshgrid(np.arange(self.nz + 1), np.arange(self.ny + 1),
                              np.arange(self.nx + 1), indexing="ij")
        return np.column_stack([i.ravel(), j.ravel(), k.ravel()])

    def cell_index(self, i, j, k):
        return i + self.nx * (j + self.ny * k)

    def node_index(self, i, j, k):
        return i + (self.nx + 1) * (j + (self.ny + 1) * k)

    @cached_property
    def node_coords(self):
        return np.asarray(self.origin) + self.node_ijk * np.asarray(self.spacing)

    @cached_property
    def cell_centers(self):
        return np.asarray(self.origin) + (self.cell_ijk + 0.5) * np.asarray(self.spacing)

    @cached_property
    def cell_nodes(self):
        """(n_cells, 8) global node ids in local order a + 2b + 4c."""
        ijk = self.cell_ijk
        out = np.empty((self.n_cells, 8), dtype=np.int64)
        for c in range(2):
            for b in range(2):
                for a in range(2):
                    out[:, a + 2 * b + 4 * c] = self.node_index(
                        ijk[:, 0] + a, ijk[:, 1] + b, ijk[:, 2] + c)
        return out

    @cached_property
    def faces(self) -> FaceSet:
        """All faces: interior faces first (x, y, z), then boundary faces by side."""
        h = np.asarray(self.spacing, dtype=float)
        areas = (h[1] * h[2], h[0] * h[2], h[0] * h[1])
        ijk = self.cell_ijk
        cells = np.arange(self.n_cells)
        parts = []
        for axis in range(3):
            has_next = ijk[:, axis] < self.shape[axis] - 1
            left = cells[has_next]
            step = (1, self.nx, self.nx * self.ny)[axis]
            parts.append((left, left + step, areas[axis], h[axis], axis, 1.0))
        for side in SIDES:
            axis, high = _SIDE_AXIS[side]
            on = ijk[:, axis] == (self.shape[axis] - 1 if high else 0)
            left = cells[on]
            parts.append((left, np.full(len(left), BOUNDARY), areas[axis],
                          0.5 * h[axis], axis, 1.0 if high else -1.0))
        left = np.concatenate([p[0] for p in parts])
        right = np.concatenate([p[1] for p in parts])
        area = np.concatenate([np.full(len(p[0]), p[2]) for p in parts])
        dist = np.concatenate([np.full(len(p[0]), p[3]) for p in parts])
        normal = np.zeros((len(left), 3))
        start = 0
        for p in parts:
            normal[start:start + len(p[0]), p[4]] = p[5]
            start += len(p[0])
        return FaceSet(left, right, area, dist, normal)

    @cached_property
    def interior_faces(self) -> FaceSet:
        return self.faces.subset(self.faces.interior)

    def regions(self):
        return sorted(int(r) for r in np.unique(self.region_of_cell))

    def cells_in_regions(self, regions) -> np.ndarray:
        """Boolean cell mask; ``None`` selects every cell."""
        if regions is None:
            return np.ones(self.n_cells, dtype=bool)
        return np.isin(self.region_of_cell, list(regions))


def build_mesh(nx, ny, nz, dx, dy, dz,
               region_fn: Callable[[int, int, int], int] | None = None,
               origin=(0.0, 0.0, 0.0)) -> StructuredMesh:
    counts = (nx, ny, nz)
    if any(int(n) != n or n < 1 for n in counts):
        raise ConfigError(f"cell counts must be positive integers, got {counts}")
    if any(not h > 0 for h in (dx, dy, dz)):
        raise ConfigError(f"cell lengths must be positive, got {(dx, dy, dz)}")
    nx, ny, nz = (int(n) for n in counts)
    if region_fn is None:
        regions = np.zeros(nx * ny * nz, dtype=np.int64)
    else:
        regions = np.array([region_fn(i, j, k)
                            for k in range(nz) for j in range(ny) for i in range(nx)],
                           dtype=np.int64)
    return StructuredMesh(nx, ny, nz, float(dx), float(dy), float(dz), regions,
                          tuple(float(o) for o in origin))


def select_boundary(mesh: StructuredMesh, side: str) -> BoundarySet:
    if side not in _SIDE_AXIS:
        raise ConfigError(f"invalid boundary side {side!r}; expected one of {SIDES}")
    axis, high = _SIDE_AXIS[side]
    faces = mesh.faces
    on_side = (~faces.interior) & (faces.normal[:, axis] == (1.0 if high else -1.0))
    nodes = np.flatnonzero(mesh.node_ijk[:, axis] == (mesh.shape[axis] if high else 0))
    return BoundarySet(side, faces.subset(on_side), nodes)


def checkerboard_vector(mesh: StructuredMesh) -> np.ndarray:
    return np.where(mesh.cell_ijk.sum(axis=1) % 2 == 0, 1.0, -1.0)


def interior_nodes(mesh: StructuredMesh) -> np.ndarray:
    """Nodes off every boundary plane, ignoring axes that are one cell thick.

    A one-cell-thick slab has no node strictly inside along that axis, so the
    thin axis is skipped; this matches the plane-strain reading of a slab.
    """
    ijk = mesh.node_ijk
    keep = np.ones(mesh.n_nodes, dtype=bool)
    for axis, n in enumerate(mesh.shape):
        if n > 1:
            keep &= (ijk[:, axis] > 0) & (ijk[:, axis] < n)
    return np.flatnonzero(keep)
