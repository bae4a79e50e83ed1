# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: Metropolis sweeps for the plasma measure and the
toppling (projected SOR) iteration for screening regions.

Pure-python twins live in ``_ref.py``; both backends implement the same
update rules and consume pre-generated random number arrays, so streams
agree up to floating-point summation order.
"""

from libc.math cimport M_LN2, exp, frexp, log


def metropolis_sweeps(double[:, ::1] pts, double B, double ell,
                      double[:, ::1] qh_pos, double[::1] qh_mult,
                      double scale,
                      double[:, :, ::1] gauss, double[:, ::1] unif,
                      double[:, :, ::1] traj):
    """Run ``gauss.shape[0]`` single-particle-update sweeps in place.

    Log-weight: -B/2 sum |z|^2 + 2*ell*sum_{i<j} log|zi-zj|
    + 2*sum_j sum_k m_k log|z_j - a_k|.  Proposals are Gaussian steps
    ``scale * gauss[s, j]``; ``unif[s, j]`` drives accept/reject.  After each
    sweep the configuration is copied into ``traj[s]``.  Returns the number
    of accepted moves.
    """
    cdef Py_ssize_t n_sweeps = gauss.shape[0]
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t nqh = qh_pos.shape[0]
    cdef Py_ssize_t s, j, i, k
    cdef double xo, yo, xn, yn, dx, dy, d2o, d2n
    cdef double delta, prod
    cdef int ex, exp_acc, reject
    cdef long accepted = 0

    with nogil:
        for s in range(n_sweeps):
            for j in range(n):
                xo = pts[j, 0]
                yo = pts[j, 1]
                xn = xo + scale * gauss[s, j, 0]
                yn = yo + scale * gauss[s, j, 1]
                delta = -0.5 * B * (xn * xn + yn * yn - xo * xo - yo * yo)
                # Jastrow part: ell * sum_i log(d2_new/d2_old), accumulated as a
                # product with exponent extraction to keep log() calls at one.
                prod = 1.0
                exp_acc = 0
                reject = 0
                for i in range(n):
                    if i == j:
                        continue
                    dx = xn - pts[i, 0]
                    dy = yn - pts[i, 1]
                    d2n = dx * dx + dy * dy
                    if d2n == 0.0:
                        reject = 1
                        break
                    dx = xo - pts[i, 0]
                    dy = yo - pts[i, 1]
                    d2o = dx * dx + dy * dy
                    prod *= d2n / d2o
                    prod = frexp(prod, &ex)
                    exp_acc += ex
                if not reject:
                    delta += ell * (log(prod) + exp_acc * M_LN2)
                    for k in range(nqh):
                        dx = xn - qh_pos[k, 0]
                        dy = yn - qh_pos[k, 1]
                        d2n = dx * dx + dy * dy
                        if d2n == 0.0:
                            reject = 1
                            break
                        dx = xo - qh_pos[k, 0]
                        dy = yo - qh_pos[k, 1]
                        d2o = dx * dx + dy * dy
                        delta += qh_mult[k] * log(d2n / d2o)
                if not reject and (delta >= 0.0 or unif[s, j] < exp(delta)):
                    pts[j, 0] = xn
                    pts[j, 1] = yn
                    accepted += 1
            for j in range(n):
                traj[s, j, 0] = pts[j, 0]
                traj[s, j, 1] = pts[j, 1]
    return accepted


def psor_sweeps(double[:, ::1] u, double[:, ::1] src, double cap,
                double omega, int sweeps):
    """Projected SOR sweeps on the toppling odometer ``u``.

    Final mass per cell is m = src + (1/4) * (4-neighbor sum of u) - u;
    stable means m <= cap with u >= 0 and u > 0 only where m = cap.
    omega = 1 is plain toppling of the excess; 1 < omega < 2 over-relaxes.
    The outermost ring never topples (u stays 0 there).  Sweeps alternate
    direction.  Returns the residual after the last sweep: max over cells of
    the excess m - cap, and of |m - cap| where u > 0.
    """
    cdef Py_ssize_t ny = u.shape[0]
    cdef Py_ssize_t nx = u.shape[1]
    cdef Py_ssize_t i, j, sweep
    cdef double m, unew, r, res

    with nogil:
        for sweep in range(sweeps):
            if sweep % 2 == 0:
                for i in range(1, ny - 1):
                    for j in range(1, nx - 1):
                        m = src[i, j] - u[i, j] + 0.25 * (
                            u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1])
                        unew = u[i, j] + omega * (m - cap)
                        if unew < 0.0:
                            unew = 0.0
                        u[i, j] = unew
            else:
                for i in range(ny - 2, 0, -1):
                    for j in range(nx - 2, 0, -1):
                        m = src[i, j] - u[i, j] + 0.25 * (
                            u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1])
                        unew = u[i, j] + omega * (m - cap)
                        if unew < 0.0:
                            unew = 0.0
                        u[i, j] = unew
        res = 0.0
        for i in range(ny):
            for j in range(nx):
                m = src[i, j] - u[i, j]
                if i > 0:
                    m += 0.25 * u[i - 1, j]
                if i < ny - 1:
                    m += 0.25 * u[i + 1, j]
                if j > 0:
                    m += 0.25 * u[i, j - 1]
                if j < nx - 1:
                    m += 0.25 * u[i, j + 1]
                r = m - cap
                if u[i, j] > 0.0:
                    if r < 0.0:
                        r = -r
                elif r < 0.0:
                    r = 0.0
                if r > res:
                    res = r
    return res
