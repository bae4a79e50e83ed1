"""Rectangular cell grids shared by the density, screening and bathtub code.

Cells are squares of side h; ``origin`` is the lower-left corner of cell
(0, 0); cell centers sit at origin + (i + 0.5) h.  Value arrays are indexed
``[iy, ix]``.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Grid:
    origin: tuple
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.h > 0):
            raise ValueError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid must have at least one cell per axis")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def square(cls, half_extent, h, center=(0.0, 0.0)):
        """Grid of cells covering [center - half_extent, center + half_extent]^2."""
        n = max(1, int(math.ceil(2.0 * half_extent / h)))
        ox = center[0] - 0.5 * n * h
        oy = center[1] - 0.5 * n * h
        return cls((ox, oy), h, n, n)

    @property
    def cell_area(self):
        return self.h * self.h

    @property
    def extent(self):
        ox, oy = self.origin
        return ox, ox + self.nx * self.h, oy, oy + self.ny * self.h

    def x_centers(self):
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.h

    def y_centers(self):
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.h

    def center_mesh(self):
        """(ny, nx) arrays of cell-center coordinates."""
        return np.meshgrid(self.x_centers(), self.y_centers(), indexing="xy")

    def centers_flat(self):
        xs, ys = self.center_mesh()
        return np.column_stack([xs.ravel(), ys.ravel()])

    def cell_of(self, points):
        """(ix, iy) integer cell indices of points; may fall outside the grid."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ix = np.floor((pts[:, 0] - self.origin[0]) / self.h).astype(np.int64)
        iy = np.floor((pts[:, 1] - self.origin[1]) / self.h).astype(np.int64)
        return ix, iy

    def contains(self, points, margin_cells=0):
        ix, iy = self.cell_of(points)
        m = margin_cells
        return (ix >= m) & (ix < self.nx - m) & (iy >= m) & (iy < self.ny - m)

    def bin_counts(self, points):
        """Histogram of points into cells, shape (ny, nx)."""
        ix, iy = self.cell_of(points)
        ok = (ix >= 0) & (ix < self.nx) & (iy >= 0) & (iy < self.ny)
        lin = iy[ok] * self.nx + ix[ok]
        counts = np.bincount(lin, minlength=self.nx * self.ny)
        return counts.reshape(self.ny, self.nx)

    def disk_mask(self, center, radius):
        """Boolean (ny, nx) mask of cells whose centers lie in D(center, radius)."""
        xs, ys = self.center_mesh()
        return (xs - center[0]) ** 2 + (ys - center[1]) ** 2 <= radius * radius

    def bilinear(self, values, points):
        """Bilinear interpolation of a (ny, nx) cell-center field at points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        fx = (pts[:, 0] - self.origin[0]) / self.h - 0.5
        fy = (pts[:, 1] - self.origin[1]) / self.h - 0.5
        ix = np.clip(np.floor(fx).astype(np.int64), 0, self.nx - 2)
        iy = np.clip(np.floor(fy).astype(np.int64), 0, self.ny - 2)
        tx = np.clip(fx - ix, 0.0, 1.0)
        ty = np.clip(fy - iy, 0.0, 1.0)
        v00 = values[iy, ix]
        v01 = values[iy, ix + 1]
        v10 = values[iy + 1, ix]
        v11 = values[iy + 1, ix + 1]
        return (v00 * (1 - tx) * (1 - ty) + v01 * tx * (1 - ty)
                + v10 * (1 - tx) * ty + v11 * tx * ty)

    def splat_unit_masses(self, points):
        """Bilinear (cloud-in-cell) deposit of one unit of mass per point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((self.ny, self.nx))
        fx = (pts[:, 0] - self.origin[0]) / self.h - 0.5
        fy = (pts[:, 1] - self.origin[1]) / self.h - 0.5
        ix = np.floor(fx).astype(np.int64)
        iy = np.floor(fy).astype(np.int64)
        if np.any(ix < 0) or np.any(ix >= self.nx - 1) or np.any(iy < 0) or np.any(iy >= self.ny - 1):
            raise ValueError("points too close to the grid edge for mass deposit")
        tx = fx - ix
        ty = fy - iy
        np.add.at(out, (iy, ix), (1 - tx) * (1 - ty))
        np.add.at(out, (iy, ix + 1), tx * (1 - ty))
        np.add.at(out, (iy + 1, ix), (1 - tx) * ty)
        np.add.at(out, (iy + 1, ix + 1), tx * ty)
        return out
