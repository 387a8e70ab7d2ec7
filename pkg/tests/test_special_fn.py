import math

import mpmath
import numpy as np
import pytest
from scipy import special

from spdkernels.special_fn import (
    JacobiParams,
    addition_coefficient,
    circle_basis,
    exact_level_dimension,
    jacobi_at_one,
    jacobi_eval,
    jacobi_series,
    jacobi_table,
    sphere2_harmonic,
    sphere2_harmonics,
)

PARAMS = [(-0.5, -0.5), (0.0, 0.0), (0.5, 0.5), (1.0, -0.5), (3.5, 0.0), (2.0, 1.0), (6.5, 3.0)]


@pytest.mark.parametrize("a,b", PARAMS)
def test_table_matches_scipy(a, b):
    t = np.linspace(-1, 1, 41)
    P = jacobi_table(JacobiParams(a, b), 30, t)
    for k in range(30):
        ref = special.eval_jacobi(k, a, b, t)
        assert np.allclose(P[k], ref, rtol=1e-11, atol=1e-11 * max(1.0, np.abs(ref).max()))


def test_high_degree_against_mpmath():
    p = JacobiParams(0.5, -0.5)
    for k in (40, 100):
        for t in (-0.73, 0.2, 0.999):
            ref = float(mpmath.jacobi(k, 0.5, -0.5, t))
            assert jacobi_eval(p, k, t) == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_value_at_one_closed_form():
    for a, b in PARAMS:
        p = JacobiParams(a, b)
        for k in range(12):
            assert jacobi_eval(p, k, 1.0) == pytest.approx(jacobi_at_one(p, k), rel=1e-13)


def test_series_equals_table_sum():
    p = JacobiParams(0.5, 0.5)
    rng = np.random.default_rng(0)
    c = rng.standard_normal(25)
    t = np.linspace(-1, 1, 17)
    assert np.allclose(jacobi_series(p, c, t), c @ jacobi_table(p, 25, t), atol=1e-12)


def test_legendre_is_the_zero_parameter_case():
    t = np.linspace(-1, 1, 11)
    for k in range(8):
        assert np.allclose(jacobi_eval(JacobiParams(0, 0), k, t), special.eval_legendre(k, t))


def test_argument_and_parameter_validation():
    with pytest.raises(ValueError):
        JacobiParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        jacobi_eval(JacobiParams(0, 0), 3, 1.5)
    with pytest.raises(ValueError):
        jacobi_eval(JacobiParams(0, 0), -1, 0.3)


def test_addition_coefficient_matches_gamma_formula():
    for a, b in [(0.0, 0.0), (0.5, 0.5), (1.5, -0.5), (3.0, 3.0)]:
        for k in range(1, 15):
            ref = (
                mpmath.gamma(b + 1) * (2 * k + a + b + 1) * mpmath.gamma(k + a + b + 1)
                / (mpmath.gamma(a + b + 2) * mpmath.gamma(k + b + 1))
            )
            assert addition_coefficient(JacobiParams(a, b), k) == pytest.approx(float(ref), rel=1e-12)


def test_addition_coefficient_circle_limit():
    p = JacobiParams(-0.5, -0.5)
    assert addition_coefficient(p, 0) == 1.0
    # c_k P_k(1) = 2 for every k >= 1 on the circle
    for k in range(1, 20):
        assert addition_coefficient(p, k) * jacobi_at_one(p, k) == pytest.approx(2.0)


def test_exact_dimension_is_rational_and_correct():
    # S^2: 2k+1 ; S^3: (k+1)^2
    for k in range(10):
        assert exact_level_dimension(JacobiParams(0, 0), k) == 2 * k + 1
        assert exact_level_dimension(JacobiParams(0.5, 0.5), k) == (k + 1) ** 2


def test_circle_basis_orthonormal():
    theta = 2 * np.pi * np.arange(64) / 64
    for j in range(-3, 4):
        for k in range(-3, 4):
            ip = np.mean(circle_basis(j, theta) * np.conj(circle_basis(k, theta)))
            assert abs(ip - (j == k)) < 1e-13


def _sph_to_angles(P):
    polar = np.arccos(np.clip(P[:, 2], -1, 1))
    az = np.arctan2(P[:, 1], P[:, 0])
    return polar, az


def test_sphere2_harmonics_match_scipy(rng):
    P = rng.standard_normal((20, 3))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    H = sphere2_harmonics(8, P)
    polar, az = _sph_to_angles(P)
    col = 0
    for k in range(9):
        for m in range(-k, k + 1):
            ref = math.sqrt(4 * math.pi) * special.sph_harm_y(k, m, polar, az)
            assert np.allclose(H[:, col], ref, atol=1e-12)
            col += 1


def test_sphere2_harmonic_single_and_validation():
    p = np.array([0.0, 0.0, 1.0])
    assert sphere2_harmonic(3, 0, p) == pytest.approx(math.sqrt(7))
    assert sphere2_harmonic(3, 2, p) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        sphere2_harmonic(2, 3, p)
    with pytest.raises(ValueError):
        sphere2_harmonics(2, np.array([[1.0, 1.0, 0.0]]))


def test_sphere2_orthonormal_on_quadrature():
    # Gauss-Legendre in cos(theta) x trapezoid in phi integrates degree <= 2*8 exactly
    x, w = np.polynomial.legendre.leggauss(12)
    phi = 2 * np.pi * np.arange(24) / 24
    X, PHI = np.meshgrid(x, phi, indexing="ij")
    W = np.outer(w, np.full(24, 1 / 24)).ravel() / 2
    s = np.sqrt(1 - X**2)
    pts = np.column_stack([(s * np.cos(PHI)).ravel(), (s * np.sin(PHI)).ravel(), X.ravel()])
    H = sphere2_harmonics(6, pts)
    G = (H.conj().T * W) @ H
    assert np.allclose(G, np.eye(G.shape[0]), atol=1e-12)
