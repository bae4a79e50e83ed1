"""Pure-numpy twins of the compiled kernels in ``_fast.pyx``.

Same update rules, same consumption order of the pre-generated random
arrays; only floating-point summation order differs.
"""

import numpy as np


def metropolis_sweeps(pts, B, ell, qh_pos, qh_mult, scale, gauss, unif, traj):
    """Single-particle Metropolis sweeps in place; returns accepted count."""
    n_sweeps = gauss.shape[0]
    n = pts.shape[0]
    have_qh = qh_pos.shape[0] > 0
    accepted = 0
    for s in range(n_sweeps):
        for j in range(n):
            old = pts[j].copy()
            new = old + scale * gauss[s, j]
            delta = -0.5 * B * (new @ new - old @ old)
            if n > 1:
                others = np.delete(pts, j, axis=0)
                d2n = np.sum((new - others) ** 2, axis=1)
                if np.any(d2n == 0.0):
                    continue
                d2o = np.sum((old - others) ** 2, axis=1)
                delta += ell * np.sum(np.log(d2n / d2o))
            if have_qh:
                d2n = np.sum((new - qh_pos) ** 2, axis=1)
                if np.any(d2n == 0.0):
                    continue
                d2o = np.sum((old - qh_pos) ** 2, axis=1)
                delta += qh_mult @ np.log(d2n / d2o)
            if delta >= 0.0 or unif[s, j] < np.exp(delta):
                pts[j] = new
                accepted += 1
        traj[s] = pts
    return accepted


def psor_sweeps(u, src, cap, omega, sweeps):
    """Red-black projected SOR on the toppling odometer; returns the residual.

    Same fixed point as the sequential compiled version (the stable state of
    the divisible-sandpile LCP is unique); iteration path differs.
    """
    ny, nx = u.shape
    ii, jj = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    interior = (ii > 0) & (ii < ny - 1) & (jj > 0) & (jj < nx - 1)
    red = interior & ((ii + jj) % 2 == 0)
    black = interior & ((ii + jj) % 2 == 1)
    pad = np.zeros((ny + 2, nx + 2))
    for _ in range(sweeps):
        for mask in (red, black):
            pad[1:-1, 1:-1] = u
            nbr = pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:]
            m = src - u + 0.25 * nbr
            u[mask] = np.maximum(0.0, u + omega * (m - cap))[mask]
    pad[1:-1, 1:-1] = u
    nbr = pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:]
    m = src - u + 0.25 * nbr
    r = m - cap
    res_toppled = np.max(np.abs(r)[u > 0.0], initial=0.0)
    res_excess = np.max(r[u <= 0.0], initial=0.0)
    return max(res_toppled, res_excess)
