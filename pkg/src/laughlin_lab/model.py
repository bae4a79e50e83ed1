"""Core state family and effective Hamiltonians.

Conventions: planar points are (n, 2) float arrays, identified with complex
numbers z = x + iy.  All weights are unnormalized log-weights; normalization
constants are never computed.  Two unit systems appear:

* physical units: magnetic field B, exponent ell, cap density B/(2*pi*ell);
* cleaned units: background density 1, trap pi/2 |x|^2, unit "charges".

``cleaned_scale`` converts between the two.
"""

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


class SingularConfigurationError(ValueError):
    """Raised where an operation cannot tolerate coincident points."""


@dataclass(frozen=True)
class PlasmaParams:
    """Physical dial set: field strength B, exponent ell, particle count N."""

    B: float
    ell: int
    N: int

    def __post_init__(self):
        if not (self.B > 0):
            raise ValueError(f"B must be positive, got {self.B}")
        if self.ell < 1 or int(self.ell) != self.ell:
            raise ValueError(f"ell must be a positive integer, got {self.ell}")
        if self.N < 1 or int(self.N) != self.N:
            raise ValueError(f"N must be a positive integer, got {self.N}")

    @property
    def statistics(self):
        return "fermionic" if self.ell % 2 == 1 else "bosonic"

    @property
    def cap_density(self):
        """Neutrality density of the effective plasma, B/(2*pi*ell)."""
        return self.B / (TWO_PI * self.ell)

    @property
    def droplet_radius(self):
        """Radius sqrt(2*ell*N/B) of the flat-density droplet."""
        return math.sqrt(2.0 * self.ell * self.N / self.B)

    @property
    def magnetic_length(self):
        return math.sqrt(2.0 / self.B)


def cleaned_scale(params):
    """Length factor alpha with x = alpha * z mapping physical points to cleaned units.

    alpha = sqrt(cap density), so density 1 in cleaned units is the cap.
    """
    return math.sqrt(params.cap_density)


def as_points(points, n=None):
    """Validate and return an (n, 2) float array of finite planar points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of points, got shape {pts.shape}")
    if n is not None and pts.shape[0] != n:
        raise ValueError(f"expected {n} points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


@dataclass(frozen=True)
class QuasiHoleSet:
    """Zeros (z - a_k)^{m_k} multiplied into the state; each carries charge deficit m_k/ell."""

    positions: np.ndarray  # (K, 2)
    multiplicities: np.ndarray  # (K,) positive ints

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.size == 0:
            pos = pos.reshape(0, 2)
        mult = np.atleast_1d(np.asarray(self.multiplicities, dtype=float))
        if pos.shape[0] != mult.shape[0] or (pos.size and pos.shape[1] != 2):
            raise ValueError("positions must be (K, 2) with K multiplicities")
        if not np.all(np.isfinite(pos)):
            raise ValueError("hole positions must be finite")
        if np.any(mult < 1) or np.any(mult != np.round(mult)):
            raise ValueError("multiplicities must be integers >= 1")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "multiplicities", mult)

    @classmethod
    def from_pairs(cls, holes):
        """Build from an iterable of (x, y, m) triples; empty iterable is allowed."""
        holes = list(holes)
        if not holes:
            return cls(np.zeros((0, 2)), np.zeros(0))
        arr = np.asarray(holes, dtype=float)
        return cls(arr[:, :2], arr[:, 2])

    @property
    def total_degree(self):
        return float(self.multiplicities.sum())

    def log_modulus(self, points):
        """sum_j sum_k m_k log|z_j - a_k|; -inf exactly at the zeros."""
        pts = as_points(points)
        if self.positions.shape[0] == 0:
            return 0.0
        d2 = np.sum((pts[:, None, :] - self.positions[None, :, :]) ** 2, axis=2)
        if np.any(d2 == 0.0):
            return -math.inf
        return 0.5 * float(np.sum(np.log(d2) * self.multiplicities[None, :]))

    def log_modulus_grad(self, points):
        """Gradient of log|F| per particle: sum_k m_k (x_j - a_k)/|x_j - a_k|^2."""
        pts = as_points(points)
        if self.positions.shape[0] == 0:
            return np.zeros_like(pts)
        diff = pts[:, None, :] - self.positions[None, :, :]
        d2 = np.sum(diff ** 2, axis=2)
        if np.any(d2 == 0.0):
            raise SingularConfigurationError("point sits exactly on a quasi-hole")
        return np.einsum("jk,jkd->jd", self.multiplicities[None, :] / d2, diff)


class CorrelationFactor:
    """Analytic symmetric prefactor F exposed through its log-modulus.

    Variants: trivial F = 1, the safe product of quasi-hole zeros, or a
    caller-supplied log-modulus evaluator whose per-variable superharmonicity
    of -2 log|F| the caller asserts.
    """

    def __init__(self, kind, holes=None, log_modulus_fn=None):
        if kind not in ("none", "quasi_holes", "custom"):
            raise ValueError(f"unknown correlation factor kind {kind!r}")
        self.kind = kind
        self.holes = holes
        self._fn = log_modulus_fn

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def quasi_holes(cls, holes):
        if not isinstance(holes, QuasiHoleSet):
            holes = QuasiHoleSet.from_pairs(holes)
        return cls("quasi_holes", holes=holes)

    @classmethod
    def custom(cls, log_modulus_fn):
        """Caller asserts -2 log|F| is superharmonic in each variable."""
        return cls("custom", log_modulus_fn=log_modulus_fn)

    @property
    def is_separable(self):
        """True when log|F| is a sum of single-particle terms (fast sampler path)."""
        return self.kind in ("none", "quasi_holes")

    def log_modulus(self, points):
        if self.kind == "none":
            as_points(points)
            return 0.0
        if self.kind == "quasi_holes":
            return self.holes.log_modulus(points)
        return float(self._fn(as_points(points)))

    def hole_arrays(self):
        """(positions, multiplicities) arrays for the kernels; empty for F = 1."""
        if self.kind == "quasi_holes":
            return self.holes.positions, self.holes.multiplicities
        if self.kind == "none":
            return np.zeros((0, 2)), np.zeros(0)
        raise ValueError("custom correlation factors have no hole arrays")


@dataclass(frozen=True)
class PotentialSpec:
    """Unscaled external potential v, radial pair interaction w, coupling lambda."""

    v: object  # callable on (n, 2) arrays
    w: object  # callable on (n, 2) arrays, radial
    lam: float = 0.0

    def scaled(self, n):
        return scaled_potentials(self, n)


def scaled_potentials(spec, n):
    """Thermodynamic scaling: V(x) = v(x/sqrt(n)), W(x) = w(x/sqrt(n))/n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    root = math.sqrt(n)

    def V(x):
        return spec.v(np.asarray(x, dtype=float) / root)

    def W(x):
        return spec.w(np.asarray(x, dtype=float) / root) / n

    return V, W


def log_plasma_weight(points, params, corr=None):
    """Unnormalized log |Psi_F|^2, i.e. minus the effective Hamilton function.

    -B/2 sum |z_j|^2 + 2*ell*sum_{i<j} log|z_i - z_j| + 2 log|F|.
    Returns -inf iff two points coincide or F vanishes there.
    """
    pts = as_points(points, params.N)
    out = -0.5 * params.B * float(np.sum(pts ** 2))
    if params.N > 1:
        iu = np.triu_indices(params.N, k=1)
        d2 = np.sum((pts[iu[0]] - pts[iu[1]]) ** 2, axis=1)
        if np.any(d2 == 0.0):
            return -math.inf
        out += params.ell * float(np.sum(np.log(d2)))
    if corr is not None and corr.kind != "none":
        lf = corr.log_modulus(pts)
        if lf == -math.inf:
            return -math.inf
        out += 2.0 * lf
    return out


class SuperharmonicPotential:
    """Cleaned-unit phantom-charge potential W(x_1..x_n) = -2 log|F|, with gradient.

    The product-of-zeros form gives W = -2 sum_j sum_k m_k log|x_j - a_k|,
    superharmonic in each variable away from the a_k.
    """

    def __init__(self, value_fn=None, grad_fn=None, holes=None):
        self._value_fn = value_fn
        self._grad_fn = grad_fn
        self.holes = holes

    @classmethod
    def zero(cls):
        return cls(value_fn=lambda pts: 0.0,
                   grad_fn=lambda pts: np.zeros_like(pts))

    @classmethod
    def from_quasi_holes(cls, holes):
        if not isinstance(holes, QuasiHoleSet):
            holes = QuasiHoleSet.from_pairs(holes)

        def value(pts):
            return -2.0 * holes.log_modulus(pts)

        def grad(pts):
            return -2.0 * holes.log_modulus_grad(pts)

        return cls(value_fn=value, grad_fn=grad, holes=holes)

    def value(self, points):
        return float(self._value_fn(points))

    def grad(self, points):
        return np.asarray(self._grad_fn(points), dtype=float)


def cleaned_hamiltonian(points, w_potential=None):
    """Cleaned-unit energy pi/2 sum |x|^2 - sum_{i<j} log|x_i - x_j| + W; +inf at coincidences."""
    pts = as_points(points)
    n = pts.shape[0]
    out = 0.5 * math.pi * float(np.sum(pts ** 2))
    if n > 1:
        iu = np.triu_indices(n, k=1)
        d2 = np.sum((pts[iu[0]] - pts[iu[1]]) ** 2, axis=1)
        if np.any(d2 == 0.0):
            return math.inf
        out -= 0.5 * float(np.sum(np.log(d2)))
    if w_potential is not None:
        out += w_potential.value(pts)
    return out


def cleaned_gradient(points, w_potential=None):
    """Per-particle gradient of the cleaned energy; raises at coincident points."""
    pts = as_points(points)
    n = pts.shape[0]
    grad = math.pi * pts.copy()
    if n > 1:
        diff = pts[:, None, :] - pts[None, :, :]
        d2 = np.sum(diff ** 2, axis=2)
        np.fill_diagonal(d2, 1.0)
        if np.any(d2 == 0.0):
            raise SingularConfigurationError("coincident points")
        inv = 1.0 / d2
        np.fill_diagonal(inv, 0.0)
        grad -= np.einsum("ij,ijd->id", inv, diff)
    if w_potential is not None:
        grad += w_potential.grad(pts)
    return grad
