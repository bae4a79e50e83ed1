import math

import numpy as np
import pytest

from laughlin_lab.model import (
    CorrelationFactor,
    PlasmaParams,
    PotentialSpec,
    QuasiHoleSet,
    SingularConfigurationError,
    SuperharmonicPotential,
    cleaned_gradient,
    cleaned_hamiltonian,
    cleaned_scale,
    log_plasma_weight,
    scaled_potentials,
)

from conftest import finite_difference_gradient


class TestPlasmaParams:
    def test_statistics_from_exponent(self):
        assert PlasmaParams(1.0, 3, 4).statistics == "fermionic"
        assert PlasmaParams(1.0, 2, 4).statistics == "bosonic"

    def test_cap_density(self):
        p = PlasmaParams(B=2.0, ell=4, N=10)
        assert p.cap_density == pytest.approx(2.0 / (2 * math.pi * 4))

    @pytest.mark.parametrize("bad", [dict(B=0.0, ell=1, N=1), dict(B=1.0, ell=0, N=1),
                                     dict(B=1.0, ell=1, N=0)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            PlasmaParams(**bad)

    def test_cleaned_scale_squares_to_cap(self):
        p = PlasmaParams(B=3.0, ell=3, N=5)
        assert cleaned_scale(p) ** 2 == pytest.approx(p.cap_density)


class TestLogPlasmaWeight:
    def test_single_particle_at_origin(self):
        p = PlasmaParams(B=1.0, ell=2, N=1)
        assert log_plasma_weight([[0.0, 0.0]], p, CorrelationFactor.none()) == 0.0

    def test_coincident_points_give_minus_inf(self):
        p = PlasmaParams(B=1.0, ell=3, N=2)
        w = log_plasma_weight([[0.3, 0.1], [0.3, 0.1]], p)
        assert w == -math.inf

    def test_two_particle_value(self):
        # N=2, ell=3, B=1, z = +-1 on the real axis: 6 ln 2 - 1
        p = PlasmaParams(B=1.0, ell=3, N=2)
        w = log_plasma_weight([[1.0, 0.0], [-1.0, 0.0]], p)
        assert w == pytest.approx(6 * math.log(2.0) - 1.0, rel=1e-12)

    def test_permutation_symmetry(self, rng):
        p = PlasmaParams(B=1.3, ell=3, N=6)
        corr = CorrelationFactor.quasi_holes([(0.4, -0.2, 2)])
        pts = rng.standard_normal((6, 2)) * 2.0
        w0 = log_plasma_weight(pts, p, corr)
        for _ in range(4):
            perm = rng.permutation(6)
            assert log_plasma_weight(pts[perm], p, corr) == pytest.approx(w0, rel=1e-12)

    def test_quasi_hole_additivity(self, rng):
        p = PlasmaParams(B=1.0, ell=2, N=5)
        holes = QuasiHoleSet.from_pairs([(0.0, 0.0, 2), (1.0, -0.5, 1)])
        pts = rng.standard_normal((5, 2)) * 3.0
        plain = log_plasma_weight(pts, p)
        shift = 0.0
        for pos, m in zip(holes.positions, holes.multiplicities):
            shift += m * np.sum(np.log(np.linalg.norm(pts - pos, axis=1)))
        with_holes = log_plasma_weight(pts, p, CorrelationFactor.quasi_holes(holes))
        assert with_holes == pytest.approx(plain + 2.0 * shift, rel=1e-12)

    def test_zero_of_correlation_factor(self):
        p = PlasmaParams(B=1.0, ell=2, N=2)
        corr = CorrelationFactor.quasi_holes([(0.5, 0.5, 1)])
        w = log_plasma_weight([[0.5, 0.5], [1.0, 1.0]], p, corr)
        assert w == -math.inf

    def test_nonfinite_input_rejected(self):
        p = PlasmaParams(B=1.0, ell=1, N=2)
        with pytest.raises(ValueError):
            log_plasma_weight([[math.nan, 0.0], [1.0, 0.0]], p)

    def test_custom_evaluator(self, rng):
        p = PlasmaParams(B=1.0, ell=2, N=3)
        corr = CorrelationFactor.custom(lambda pts: float(np.sum(pts[:, 0])))
        pts = rng.standard_normal((3, 2))
        expect = log_plasma_weight(pts, p) + 2.0 * float(np.sum(pts[:, 0]))
        assert log_plasma_weight(pts, p, corr) == pytest.approx(expect)


class TestCleanedHamiltonian:
    def test_single_particle(self):
        assert cleaned_hamiltonian([[0.0, 0.0]]) == 0.0

    def test_two_point_value(self):
        r = (2.0 * math.pi) ** -0.5
        h = cleaned_hamiltonian([[r, 0.0], [-r, 0.0]])
        assert h == pytest.approx(0.5 - math.log(math.sqrt(2.0 / math.pi)), rel=1e-12)

    def test_coincident_is_plus_inf(self):
        assert cleaned_hamiltonian([[1.0, 1.0], [1.0, 1.0]]) == math.inf

    def test_rotation_invariance(self, rng):
        pts = rng.standard_normal((7, 2))
        th = 1.234
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        assert cleaned_hamiltonian(pts @ rot.T) == pytest.approx(
            cleaned_hamiltonian(pts), rel=1e-12)


class TestCleanedGradient:
    def test_trap_only(self):
        g = cleaned_gradient([[1.0, 0.0]])
        np.testing.assert_allclose(g, [[math.pi, 0.0]], atol=1e-14)

    def test_stationary_pair(self):
        r = (2.0 * math.pi) ** -0.5
        g = cleaned_gradient([[r, 0.0], [-r, 0.0]])
        assert np.abs(g).max() < 1e-12

    def test_matches_finite_differences(self, rng):
        w = SuperharmonicPotential.from_quasi_holes([(0.2, 0.1, 2)])
        for _ in range(20):
            pts = rng.standard_normal((5, 2)) * 2.0 + np.array([3.0, 0.0])
            g = cleaned_gradient(pts, w)
            fd = finite_difference_gradient(lambda x: cleaned_hamiltonian(x, w), pts)
            assert np.abs(g - fd).max() / np.abs(g).max() < 1e-6

    def test_coincident_raises(self):
        with pytest.raises(SingularConfigurationError):
            cleaned_gradient([[0.0, 0.0], [0.0, 0.0]])


class TestScaledPotentials:
    def test_quadratic_scaling(self):
        spec = PotentialSpec(v=lambda x: np.sum(np.asarray(x) ** 2, axis=-1),
                             w=lambda x: np.ones(np.asarray(x).shape[:-1]))
        V, W = scaled_potentials(spec, 4)
        assert V(np.array([[2.0, 0.0]]))[0] == pytest.approx(1.0)

    def test_constant_interaction(self):
        spec = PotentialSpec(v=lambda x: np.zeros(np.asarray(x).shape[:-1]),
                             w=lambda x: np.ones(np.asarray(x).shape[:-1]))
        _, W = scaled_potentials(spec, 10)
        assert W(np.array([[5.0, -3.0]]))[0] == pytest.approx(0.1)

    def test_scale_invariance_of_quadratic(self):
        spec = PotentialSpec(v=lambda x: np.sum(np.asarray(x) ** 2, axis=-1),
                             w=lambda x: np.ones(np.asarray(x).shape[:-1]))
        V, _ = scaled_potentials(spec, 100)
        assert V(np.array([[10.0, 0.0]]))[0] == pytest.approx(1.0)


class TestSuperharmonicity:
    def test_quasi_hole_potential_five_point_laplacian(self):
        """-2 m log|x - a| has nonpositive discrete Laplacian away from a."""
        holes = QuasiHoleSet.from_pairs([(0.0, 0.0, 3), (1.5, 0.5, 1)])

        def w_single(x):
            d2 = np.sum((x - holes.positions) ** 2, axis=1)
            return -np.sum(holes.multiplicities * np.log(d2))

        h = 1e-3
        rng = np.random.default_rng(3)
        for _ in range(50):
            x = rng.uniform(-3, 3, size=2)
            rmin = min(np.linalg.norm(x - p) for p in holes.positions)
            if rmin < 0.25:
                continue
            lap = (w_single(x + [h, 0]) + w_single(x - [h, 0])
                   + w_single(x + [0, h]) + w_single(x - [0, h])
                   - 4 * w_single(x)) / h ** 2
            # away from the holes the continuum Laplacian vanishes; the
            # 5-point stencil sees it up to O(h^2 * 4th derivative) truncation
            truncation = 100.0 * h ** 2 * float(holes.multiplicities.sum()) / rmin ** 4
            assert lap <= truncation
