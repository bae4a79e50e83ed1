"""Metropolis Monte Carlo over the plasma measure exp(-H_F) at temperature 1.

Single-particle Gaussian proposals, one sweep = N proposals.  Chains consume
pre-generated random arrays so a run is reproducible from (seed, chain index)
on either kernel backend.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import Grid
from .model import as_points, log_plasma_weight

BATCH_SWEEPS = 256


class ProposalDiagnosticsError(RuntimeError):
    """Chain stopped moving; the proposal scale needs retuning."""


@dataclass(frozen=True)
class ChainConfig:
    steps: int
    burn_in: int = 0
    proposal_scale: float = None  # default: magnetic length sqrt(2/B)
    seed: int = 0
    chains: int = 1
    thin: int = 1  # keep every thin-th post-burn-in sweep as a sample

    def __post_init__(self):
        if not (self.steps > self.burn_in >= 0):
            raise ValueError("need steps > burn_in >= 0")
        if self.proposal_scale is not None and not (self.proposal_scale > 0):
            raise ValueError("proposal_scale must be positive")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    def scale_for(self, params):
        return self.proposal_scale if self.proposal_scale is not None else params.magnetic_length


@dataclass
class DensityGrid:
    """Binned one-body density estimate (particles per unit area)."""

    grid: Grid
    values: np.ndarray  # (ny, nx)
    total_weight: float  # configurations accumulated

    @classmethod
    def empty(cls, grid):
        return cls(grid, np.zeros((grid.ny, grid.nx)), 0.0)

    def add_counts(self, counts, n_configs):
        # values stay in density units: counts / (configs * cell area)
        total = self.values * (self.total_weight * self.grid.cell_area) + counts
        self.total_weight += n_configs
        self.values = total / (self.total_weight * self.grid.cell_area)

    def integral(self):
        return float(np.sum(self.values)) * self.grid.cell_area

    def disk_mean(self, center, radius):
        mask = self.grid.disk_mask(center, radius)
        if not np.any(mask):
            raise ValueError("probe disk contains no grid cells")
        return float(np.mean(self.values[mask]))


@dataclass
class ChainResult:
    samples: np.ndarray  # (S, N, 2) thinned post-burn-in configurations
    acceptance_rate: float
    n_sweeps: int
    final_points: np.ndarray
    seed: int
    chain_index: int = 0
    per_chain_acceptance: list = field(default_factory=list)


def default_grid(params, cover_factor=1.45, h=None):
    """Square grid covering the droplet disk out to cover_factor * R."""
    R = params.droplet_radius
    if h is None:
        h = max(R / 64.0, 0.35 * params.magnetic_length)
    return Grid.square(cover_factor * R, h)


def initial_configuration(params, rng):
    """Uniform draw in the droplet disk; never places two points together."""
    r = params.droplet_radius * np.sqrt(rng.random(params.N))
    th = rng.random(params.N) * 2.0 * np.pi
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def _chain_rng(seed, chain_index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain_index,)))


def _run_separable(params, corr, chain, chain_index, density, collect_samples=True,
                   initial=None):
    """Fast path: log|F| separable over particles (F = 1 or quasi-hole product)."""
    rng = _chain_rng(chain.seed, chain_index)
    pts = initial.copy() if initial is not None else initial_configuration(params, rng)
    pts = np.ascontiguousarray(as_points(pts, params.N))
    qh_pos, qh_mult = corr.hole_arrays()
    qh_pos = np.ascontiguousarray(qh_pos, dtype=float)
    qh_mult = np.ascontiguousarray(qh_mult, dtype=float)
    scale = chain.scale_for(params)

    samples = []
    accepted = 0
    window_accepted = 0
    window_sweeps = 0
    counts = None if density is None else np.zeros(density.grid.ny * density.grid.nx,
                                                   dtype=np.int64)
    counts_kept = 0
    sweep = 0
    while sweep < chain.steps:
        bs = min(BATCH_SWEEPS, chain.steps - sweep)
        gauss = rng.standard_normal((bs, params.N, 2))
        unif = rng.random((bs, params.N))
        traj = np.empty((bs, params.N, 2))
        acc = kernels.metropolis_sweeps(pts, params.B, float(params.ell),
                                        qh_pos, qh_mult, scale, gauss, unif, traj)
        accepted += acc
        window_accepted += acc
        window_sweeps += bs
        if window_sweeps >= min(500, chain.steps):
            if window_accepted == 0:
                raise ProposalDiagnosticsError(
                    f"no accepted move in {window_sweeps} sweeps; "
                    f"reduce proposal_scale (currently {scale:g})")
            window_accepted = 0
            window_sweeps = 0

        first_kept = max(chain.burn_in - sweep, 0)
        if first_kept < bs:
            kept = traj[first_kept:]
            if density is not None:
                g = density.grid
                ix, iy = g.cell_of(kept.reshape(-1, 2))
                ok = (ix >= 0) & (ix < g.nx) & (iy >= 0) & (iy < g.ny)
                counts += np.bincount(iy[ok] * g.nx + ix[ok], minlength=counts.size)
                counts_kept += kept.shape[0]
            if collect_samples:
                offs = sweep + first_kept - chain.burn_in
                sel = np.arange(kept.shape[0])[(offs + np.arange(kept.shape[0])) % chain.thin == 0]
                if sel.size:
                    samples.append(kept[sel].copy())
        sweep += bs

    if density is not None and counts_kept:
        density.add_counts(counts.reshape(density.grid.ny, density.grid.nx).astype(float),
                           counts_kept)
    sample_arr = (np.concatenate(samples, axis=0) if samples
                  else np.zeros((0, params.N, 2)))
    return ChainResult(sample_arr, accepted / (chain.steps * params.N),
                       chain.steps, pts, chain.seed, chain_index)


def _run_generic(params, corr, chain, chain_index, density, collect_samples=True,
                 initial=None):
    """Slow path for non-separable F: full log-weight recomputed per proposal."""
    rng = _chain_rng(chain.seed, chain_index)
    pts = initial.copy() if initial is not None else initial_configuration(params, rng)
    pts = as_points(pts, params.N)
    scale = chain.scale_for(params)
    cur = log_plasma_weight(pts, params, corr)
    samples = []
    accepted = 0
    counts = None if density is None else np.zeros((density.grid.ny, density.grid.nx))
    counts_kept = 0
    for sweep in range(chain.steps):
        gauss = rng.standard_normal((params.N, 2))
        unif = rng.random(params.N)
        for j in range(params.N):
            old = pts[j].copy()
            pts[j] = old + scale * gauss[j]
            prop = log_plasma_weight(pts, params, corr)
            if prop - cur >= 0.0 or unif[j] < math.exp(min(prop - cur, 0.0)):
                cur = prop
                accepted += 1
            else:
                pts[j] = old
        if sweep >= chain.burn_in:
            if density is not None:
                counts += density.grid.bin_counts(pts)
                counts_kept += 1
            if collect_samples and (sweep - chain.burn_in) % chain.thin == 0:
                samples.append(pts.copy())
    if density is not None and counts_kept:
        density.add_counts(counts, counts_kept)
    sample_arr = (np.stack(samples, axis=0) if samples
                  else np.zeros((0, params.N, 2)))
    return ChainResult(sample_arr, accepted / (chain.steps * params.N),
                       chain.steps, pts, chain.seed, chain_index)


def run_chain(params, corr, chain, chain_index=0, density=None, collect_samples=True,
              initial=None):
    """One Metropolis chain targeting exp(-H_F); deterministic given (seed, index).

    When ``density`` (a DensityGrid) is passed, every post-burn-in sweep is
    binned into it; thinned samples are returned for the estimators.
    """
    if corr is None:
        from .model import CorrelationFactor
        corr = CorrelationFactor.none()
    runner = _run_separable if corr.is_separable else _run_generic
    return runner(params, corr, chain, chain_index, density,
                  collect_samples=collect_samples, initial=initial)


def run_chains(params, corr, chain, density_grid=None, threads=None,
               collect_samples=True, keep_per_chain=False):
    """Run ``chain.chains`` independent chains and merge their output.

    Histogram merging is a commutative sum, so the result does not depend on
    scheduling.  Returns (ChainResult with concatenated samples, DensityGrid
    or None); with keep_per_chain the per-chain densities ride along as
    ``density.per_chain``.
    """
    density = DensityGrid.empty(density_grid) if isinstance(density_grid, Grid) else density_grid
    per_chain_density = (
        [DensityGrid.empty(density.grid) for _ in range(chain.chains)]
        if density is not None else [None] * chain.chains)

    def work(idx):
        return run_chain(params, corr, chain, chain_index=idx,
                         density=per_chain_density[idx],
                         collect_samples=collect_samples)

    if chain.chains == 1:
        results = [work(0)]
    else:
        n_workers = threads or chain.chains
        if kernels.BACKEND == "cython" and n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as ex:
                results = list(ex.map(work, range(chain.chains)))
        else:
            results = [work(i) for i in range(chain.chains)]

    if density is not None:
        for d in per_chain_density:
            if d.total_weight:
                density.add_counts(d.values * d.total_weight * d.grid.cell_area,
                                   d.total_weight)
        if keep_per_chain:
            density.per_chain = per_chain_density
    samples = np.concatenate([r.samples for r in results], axis=0) \
        if collect_samples else np.zeros((0, params.N, 2))
    rates = [r.acceptance_rate for r in results]
    merged = ChainResult(samples, float(np.mean(rates)),
                         chain.steps * chain.chains,
                         results[-1].final_points, chain.seed,
                         per_chain_acceptance=rates)
    return merged, density


def estimate_density(samples, grid):
    """Histogram density estimate from an (S, N, 2) sample stack."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[0] == 0:
        raise ValueError("need a nonempty (S, N, 2) sample array")
    density = DensityGrid.empty(grid)
    density.add_counts(grid.bin_counts(samples.reshape(-1, 2)).astype(float),
                       samples.shape[0])
    return density


@dataclass
class IncompressibilityReport:
    coarse_radius: float
    max_coarse_density: float
    cap: float
    excess_ratio: float
    max_locations: np.ndarray  # (k, 2) cell centers attaining the max

    def __post_init__(self):
        if not math.isfinite(self.max_coarse_density):
            raise ValueError("non-finite coarse density")


def default_coarse_radius(params):
    """3x the mean inter-particle spacing sqrt(2*pi*ell/B)/sqrt(pi)."""
    return 3.0 * math.sqrt(2.0 * params.ell / params.B)


def coarse_grain(density, radius):
    """Convolution with the normalized indicator of a disk of the given radius."""
    from scipy.signal import fftconvolve

    g = density.grid
    half = int(math.floor(radius / g.h))
    offs = (np.arange(-half, half + 1)) * g.h
    ky, kx = np.meshgrid(offs, offs, indexing="ij")
    kernel = (kx ** 2 + ky ** 2 <= radius * radius).astype(float)
    kernel /= kernel.sum()
    return fftconvolve(density.values, kernel, mode="same")


def incompressibility_check(density, params, coarse_radius=None):
    """Coarse-grained max density vs the cap B/(2*pi*ell)."""
    spacing = math.sqrt(2.0 * params.ell / params.B)
    radius = default_coarse_radius(params) if coarse_radius is None else float(coarse_radius)
    if radius < 2.0 * spacing:
        raise ValueError(
            f"coarse radius {radius:g} below 2x mean inter-particle distance {spacing:g}")
    if radius < 2.0 * density.grid.h:
        raise ValueError("coarse radius below grid resolution")
    coarse = coarse_grain(density, radius)
    cap = params.cap_density
    mx = float(coarse.max())
    iy, ix = np.nonzero(coarse >= mx * (1.0 - 1e-12))
    locs = np.column_stack([density.grid.x_centers()[ix], density.grid.y_centers()[iy]])
    return IncompressibilityReport(radius, mx, cap, mx / cap, locs[:8])


def quasihole_deficit(density, baseline, hole_position, probe_radius):
    """Missing charge int_{D(a, r)} (baseline - density); -> m/ell past the core."""
    if density.grid != baseline.grid:
        raise ValueError("density and baseline must share a grid")
    g = density.grid
    a = np.asarray(hole_position, dtype=float)
    x0, x1, y0, y1 = g.extent
    if (a[0] - probe_radius < x0 or a[0] + probe_radius > x1
            or a[1] - probe_radius < y0 or a[1] + probe_radius > y1):
        raise ValueError("probe disk leaves the grid")
    mask = g.disk_mask(a, probe_radius)
    return float(np.sum(baseline.values[mask] - density.values[mask])) * g.cell_area


@dataclass
class EnergyEstimate:
    mean: float
    stderr: float
    n_samples: int
    n_batches: int
    batch_means: np.ndarray


def trial_energy(samples, V, W=None, lam=0.0, n_batches=20):
    """MC average of sum_j V(x_j) + lambda * sum_{i<j} W(x_i - x_j).

    Error bar from batch means; at least 10 batches are required.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3:
        raise ValueError("need an (S, N, 2) sample array")
    S, N, _ = samples.shape
    n_batches = int(n_batches)
    if n_batches < 10 or S < n_batches:
        raise ValueError(f"need at least 10 batches ({S} samples for {n_batches} batches)")
    vals = V(samples.reshape(-1, 2)).reshape(S, N).sum(axis=1)
    if lam != 0.0 and W is not None and N > 1:
        iu = np.triu_indices(N, k=1)
        pair_sum = np.empty(S)
        step = max(1, int(2e6 // max(len(iu[0]), 1)))
        for s0 in range(0, S, step):
            blk = samples[s0:s0 + step]
            disp = blk[:, iu[0], :] - blk[:, iu[1], :]
            pair_sum[s0:s0 + blk.shape[0]] = W(disp.reshape(-1, 2)).reshape(
                blk.shape[0], -1).sum(axis=1)
        vals = vals + lam * pair_sum
    usable = (S // n_batches) * n_batches
    bm = vals[:usable].reshape(n_batches, -1).mean(axis=1)
    stderr = float(bm.std(ddof=1) / math.sqrt(n_batches))
    return EnergyEstimate(float(vals.mean()), stderr, S, n_batches, bm)
