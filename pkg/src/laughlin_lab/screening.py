"""Screening regions of point-charge sets, via the divisible-sandpile iteration.

K unit charges are deposited on a grid and toppled (projected SOR on the
toppling odometer) until every cell is at or below occupancy 1.  The stable
occupancy profile is the indicator of the screening region: a unit-density
patch whose potential exactly cancels the charges outside itself, with
Lebesgue measure K.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .grid import Grid
from .model import as_points

SWEEP_CHUNK = 64
DEFAULT_SUPPORT_C = 3.0  # calibrated on random point clouds, see tests


class EnlargeGridError(RuntimeError):
    """The screening region reached the grid frame; rebuild with more margin."""


class ToppleConvergenceError(RuntimeError):
    pass


def log_kernel_cell_average():
    """Average of -log|x| over the unit square centered at the origin."""
    # Gauss-Legendre on the quarter square; cached after first call.
    global _CELL_AVG
    try:
        return _CELL_AVG
    except NameError:
        pass
    x, w = np.polynomial.legendre.leggauss(80)
    x = 0.25 * (x + 1.0)  # [0, 1/2]
    w = 0.25 * w
    xx, yy = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w)
    _CELL_AVG = float(np.sum(ww * (-0.5) * np.log(xx ** 2 + yy ** 2)) * 4.0)
    return _CELL_AVG


def phi_tolerance(h, k=1):
    """Discretization tolerance for checks on the potential field."""
    return 10.0 * h * (1.0 + math.log(1.0 / h)) * max(1.0, float(k))


def make_grid(points, h, margin=None):
    """Grid covering the points with margin >= expected region radius + 5 cells."""
    pts = as_points(points)
    k = pts.shape[0]
    if margin is None:
        margin = math.sqrt(k / math.pi) + 5.0 * h
    x0, y0 = pts.min(axis=0) - margin
    x1, y1 = pts.max(axis=0) + margin
    nx = int(math.ceil((x1 - x0) / h))
    ny = int(math.ceil((y1 - y0) / h))
    return Grid((float(x0), float(y0)), h, nx, ny)


@dataclass
class ScreeningRegion:
    grid: Grid
    occupancy: np.ndarray  # (ny, nx) in [0, 1], interior cells 1
    sources: np.ndarray  # (K, 2)
    odometer: np.ndarray  # mass emitted per cell (density units)
    sweeps: int

    @property
    def area(self):
        return float(self.occupancy.sum()) * self.grid.cell_area

    @property
    def k(self):
        return self.sources.shape[0]

    def interior_mask(self, threshold=1.0 - 1e-6):
        return self.occupancy >= threshold

    def contains(self, points, threshold=0.5):
        """Bilinear occupancy >= threshold at the given points."""
        return self.grid.bilinear(self.occupancy, points) >= threshold


def _validate_margin(pts, grid, h):
    k = pts.shape[0]
    need = math.sqrt(k / math.pi) + 5.0 * h
    x0, x1, y0, y1 = grid.extent
    close = (pts[:, 0] - x0 < need) | (x1 - pts[:, 0] < need) \
        | (pts[:, 1] - y0 < need) | (y1 - pts[:, 1] < need)
    if np.any(close):
        raise EnlargeGridError(
            f"grid margin below expected region radius + 5 cells ({need:g})")


def screening_region(points, grid=None, h=0.02, tol=1e-10, omega=None,
                     max_sweeps=400_000, _retries=2):
    """Topple K unit charges into the stable unit-density patch of area K.

    Iterates until the maximum occupancy excess (and the complementarity
    defect on toppled cells) is below tol.  Raises EnlargeGridError when the
    region touches the grid frame (auto-built grids retry with more margin).
    """
    pts = as_points(points)
    k = pts.shape[0]
    if k == 0:
        raise ValueError("need at least one source point")
    auto = grid is None
    if auto:
        grid = make_grid(pts, h)
    else:
        h = grid.h
        _validate_margin(pts, grid, h)

    src = grid.splat_unit_masses(pts) / grid.cell_area  # occupancy (density) units
    u = np.zeros_like(src)
    if omega is None:
        omega = 2.0 / (1.0 + math.sin(math.pi / max(grid.nx, grid.ny)))

    sweeps = 0
    res = math.inf
    while sweeps < max_sweeps:
        res = kernels.psor_sweeps(u, src, 1.0, omega, SWEEP_CHUNK)
        sweeps += SWEEP_CHUNK
        if res < tol:
            break
    occ = _final_mass(u, src)
    frame = np.concatenate([occ[0, :], occ[-1, :], occ[:, 0], occ[:, -1]])
    if frame.max(initial=0.0) > 1e-6:
        if auto and _retries > 0:
            bigger = make_grid(pts, h, margin=2.0 * (math.sqrt(k / math.pi) + 5.0 * h))
            return screening_region(pts, grid=bigger, tol=tol, omega=None,
                                    max_sweeps=max_sweeps, _retries=_retries - 1)
        raise EnlargeGridError("screening region reached the grid boundary")
    if res >= tol:
        raise ToppleConvergenceError(
            f"toppling residual {res:.3e} after {sweeps} sweeps (tol {tol:g})")
    return ScreeningRegion(grid, np.clip(occ, 0.0, 1.0), pts, u, sweeps)


def _final_mass(u, src):
    pad = np.zeros((u.shape[0] + 2, u.shape[1] + 2))
    pad[1:-1, 1:-1] = u
    nbr = pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:]
    return src - u + 0.25 * nbr


@dataclass
class PotentialField:
    grid: Grid
    values: np.ndarray  # (ny, nx) cell-center values of Phi


def potential_field(region, include_points=True):
    """Phi = -log|.| convolved against (sum_k delta_{x_k} - 1_Sigma).

    The log kernel takes its cell-averaged value on the singular cell, so the
    discrete convolution is consistent with the continuum to O(h^2).
    """
    from scipy.signal import fftconvolve

    g = region.grid
    h = g.h
    cell_avg = log_kernel_cell_average() - math.log(h)

    # region part: full-offset kernel against the cell masses
    dx = np.arange(-(g.nx - 1), g.nx) * h
    dy = np.arange(-(g.ny - 1), g.ny) * h
    kx, ky = np.meshgrid(dx, dy, indexing="xy")
    d2 = kx ** 2 + ky ** 2
    kernel = np.empty_like(d2)
    nonzero = d2 > 0
    kernel[nonzero] = -0.5 * np.log(d2[nonzero])
    kernel[~nonzero] = cell_avg
    mass = region.occupancy * g.cell_area
    phi = -fftconvolve(kernel, mass, mode="valid")

    if include_points:
        centers = g.centers_flat()
        for xk in region.sources:
            r2 = np.sum((centers - xk) ** 2, axis=1)
            near = r2 < (1e-9 * h) ** 2
            r2[near] = 1.0
            contrib = -0.5 * np.log(r2)
            contrib[near] = cell_avg
            phi += contrib.reshape(g.ny, g.nx)
    return PotentialField(g, phi)


def sign_dichotomy_fractions(region, field, tol=None):
    """Fraction of cells violating Phi > -tol inside and |Phi| < tol outside."""
    if tol is None:
        tol = phi_tolerance(region.grid.h, region.k)
    inside = region.interior_mask()
    outside = region.occupancy <= 1e-6
    viol_in = np.sum(field.values[inside] <= -tol) / max(inside.sum(), 1)
    viol_out = np.sum(np.abs(field.values[outside]) >= tol) / max(outside.sum(), 1)
    boundary_frac = 1.0 - (inside.sum() + outside.sum()) / inside.size
    return float(viol_in), float(viol_out), float(boundary_frac)


@dataclass
class SupportBoundReport:
    center: np.ndarray
    radius: float
    max_abs_phi: float  # M = max |Phi| on the circle
    predicted_radius: float  # r + C sqrt(M)
    contained: bool
    c_est: float  # smallest C making containment true
    c_used: float


def support_bound_check(field, region, center, radius, c=DEFAULT_SUPPORT_C,
                        n_circle=720):
    """Check Sigma subset of D(a, r + C sqrt(max |Phi| on |x-a|=r))."""
    a = np.asarray(center, dtype=float)
    g = region.grid
    th = np.linspace(0.0, 2.0 * math.pi, n_circle, endpoint=False)
    circle = a + radius * np.column_stack([np.cos(th), np.sin(th)])
    if not np.all(g.contains(circle, margin_cells=1)):
        raise ValueError("test circle leaves the grid")
    if region.sources.size:
        d = np.abs(np.sqrt(np.sum((region.sources - a) ** 2, axis=1)) - radius)
        if np.any(d < g.h):
            raise ValueError("test circle intersects the source points")
    m = float(np.max(np.abs(g.bilinear(field.values, circle))))
    r_pred = radius + c * math.sqrt(m)

    occ_cells = region.occupancy >= 0.5
    xs, ys = g.center_mesh()
    dist = np.sqrt((xs - a[0]) ** 2 + (ys - a[1]) ** 2)[occ_cells]
    max_dist = float(dist.max()) if dist.size else 0.0
    contained = max_dist <= r_pred + g.h
    if max_dist <= radius:
        c_est = 0.0
    elif m > 0.0:
        c_est = (max_dist - radius) / math.sqrt(m)
    else:
        c_est = math.inf
    return SupportBoundReport(a, radius, m, r_pred, contained, c_est, c)
