import math

import mpmath
import numpy as np
import pytest

from conftest import random_rotation
from spdkernels.kernels import (
    ConvolutionalScheme,
    GeneralScheme,
    Geometric,
    PowerDecay,
    ProductGeometric,
    ProductZonalScheme,
    SpecError,
    ZonalScheme,
    b_to_d,
    basis_matrix,
    coupled_frequency_scheme,
    d_to_b,
    frequency_index,
    index_frequency,
    kernel_eval,
    kernel_matrix,
    level_dimensions,
    level_functions,
    parse_spec,
    product_kernel_eval,
    recover_coefficient,
    spec_to_dict,
    tail_sum,
    zonal_component,
    zonal_eval,
)
from spdkernels.manifold import ProductManifold, make_manifold, multiplicity, sample_points
from spdkernels.spectral_sets import ProductSpectralSet, SpectralSet, parse_set


def poisson_s2(r, t):
    return (1 - r * r) / (1 - 2 * r * t + r * r) ** 1.5


def test_generating_function_oracle_high_precision():
    # sum (2k+1) r^k P_k(t) against the closed form, both in 40-digit arithmetic
    mpmath.mp.dps = 40
    r, t = mpmath.mpf("0.5"), mpmath.mpf("-0.3")
    series = mpmath.nsum(lambda k: (2 * k + 1) * r**k * mpmath.legendre(k, t), [0, mpmath.inf])
    closed = (1 - r**2) / (1 - 2 * r * t + r**2) ** mpmath.mpf(1.5)
    assert abs(series - closed) < mpmath.mpf(10) ** -30
    mpmath.mp.dps = 15


def test_s2_generating_function():
    s2 = make_manifold("sphere", 3)
    s = ZonalScheme.from_coefficients(s2, 0.5 ** np.arange(60))
    t = np.linspace(-1, 1, 21)
    ev = zonal_eval(s, t, 60)
    assert np.max(np.abs(ev.value - poisson_s2(0.5, t))) <= 1e-8


def test_circle_poisson_kernel():
    c = make_manifold("circle", 2)
    s = ZonalScheme.from_coefficients(c, [], Geometric(0.6))
    theta = np.linspace(0, np.pi, 9)
    ev = zonal_eval(s, np.cos(theta))
    ref = (1 - 0.36) / (1 - 1.2 * np.cos(theta) + 0.36)
    assert np.allclose(ev.value, ref, atol=1e-9)
    assert ev.tail_bound <= 1e-9 * ref.max()


def test_level_functions_and_dimensions():
    s2 = make_manifold("sphere", 3)
    Z = level_functions(s2, 6, 1.0)
    assert np.allclose(Z, level_dimensions(s2, 6))
    rp = make_manifold("real_projective", 4)
    assert np.array_equal(level_dimensions(rp, 8), [multiplicity(rp, k) for k in range(8)])


def test_rp_kernel_matches_even_sphere_kernel():
    # K_RP(t) with b_k equals the S^{d-1} kernel supported on even levels at |t|
    rp, sp = make_manifold("real_projective", 4), make_manifold("sphere", 4)
    b = 0.7 ** np.arange(12)
    s_rp = ZonalScheme.from_coefficients(rp, b)
    be = np.zeros(23)
    be[::2] = b
    s_sp = ZonalScheme.from_coefficients(sp, be)
    t = np.linspace(-1, 1, 13)
    assert np.allclose(zonal_eval(s_rp, t).value, zonal_eval(s_sp, np.abs(t)).value, atol=1e-12)


def test_power_decay_tail_bound_against_brute_sum():
    c = make_manifold("circle", 2)
    tail = PowerDecay(1.0, 1.6)
    n = 50
    brute = sum(2 * (1 + k * k) ** -1.6 for k in range(n, 200000))
    bound = tail_sum(c, tail, SpectralSet.naturals(), n)
    assert brute <= bound <= 1.01 * brute + 1e-12


def test_geometric_tail_bound_exact():
    s2 = make_manifold("sphere", 3)
    bound = tail_sum(s2, Geometric(0.5), SpectralSet.naturals(), 10)
    brute = sum((2 * k + 1) * 0.5**k for k in range(10, 400))
    assert brute * (1 - 1e-14) <= bound <= brute * (1 + 1e-6)


def test_power_decay_convergence_guard():
    s2 = make_manifold("sphere", 3)
    with pytest.raises(ValueError):
        ZonalScheme.from_coefficients(s2, [], PowerDecay(1.0, 1.0))


def test_truncation_meets_relative_target():
    s2 = make_manifold("sphere", 3)
    s = ZonalScheme.from_coefficients(s2, [], Geometric(0.9))
    n = s.default_truncation
    assert s.tail_bound(n) <= 1e-10 * s.value_at_one()


def test_zonal_rotation_invariance(rng):
    s2 = make_manifold("sphere", 3)
    s = ZonalScheme.from_coefficients(s2, [1, 0.5, 0.2], Geometric(0.6))
    X = sample_points(s2, 12, "uniform", 4)
    Q = random_rotation(rng)
    K1 = kernel_matrix(s, X).value
    K2 = kernel_matrix(s, X @ Q.T).value
    assert np.max(np.abs(K1 - K2)) <= 1e-10


def test_convolutional_equals_zonal_when_levels_constant():
    s2 = make_manifold("sphere", 3)
    b = [1.0, 0.5, 0.25]
    zs = ZonalScheme.from_coefficients(s2, b, Geometric(0.5))
    cs = ConvolutionalScheme(s2, ([1.0], [0.5] * 3, [0.25] * 5), Geometric(0.5))
    X = sample_points(s2, 8, "uniform", 1)
    assert np.allclose(kernel_matrix(zs, X).value, kernel_matrix(cs, X).value, atol=1e-12)


def test_convolutional_validates_level_sizes():
    s2 = make_manifold("sphere", 3)
    with pytest.raises(ValueError):
        ConvolutionalScheme(s2, ([1.0], [0.5, 0.5]))


def test_general_scheme_single_entry():
    c = make_manifold("circle", 2)
    A = np.zeros((5, 5), dtype=complex)
    A[frequency_index(2), frequency_index(2)] = 1.0
    g = GeneralScheme(c, A)
    val = kernel_eval(g, [0.7], [0.2])
    assert val == pytest.approx(np.exp(2j * 0.5))


def test_general_scheme_requires_hermitian():
    c = make_manifold("circle", 2)
    A = np.zeros((3, 3), dtype=complex)
    A[0, 1] = 1.0
    with pytest.raises(ValueError):
        GeneralScheme(c, A)


def test_general_tail_requires_level_boundary():
    c = make_manifold("circle", 2)
    with pytest.raises(ValueError):
        GeneralScheme(c, np.eye(4), Geometric(0.5))


def test_general_scheme_kernel_is_hermitian():
    g = coupled_frequency_scheme(6)
    X = sample_points(g.manifold, 10, "uniform", 2)
    K = kernel_matrix(g, X).value
    assert np.allclose(K, K.conj().T, atol=1e-12)


def test_index_flattening():
    assert [index_frequency(i) for i in range(5)] == [0, 1, -1, 2, -2]
    assert all(frequency_index(index_frequency(i)) == i for i in range(50))


def test_basis_matrix_reproduces_zonal_kernel():
    # K = F diag(b_k over each level) F^H on S^2
    s2 = make_manifold("sphere", 3)
    b = np.array([1.0, 0.4, 0.3, 0.1])
    X = sample_points(s2, 7, "uniform", 9)
    F = basis_matrix(s2, X, 16)
    D = np.repeat(b, [1, 3, 5, 7])
    K = (F * D) @ F.conj().T
    zs = ZonalScheme.from_coefficients(s2, b)
    assert np.allclose(K, kernel_matrix(zs, X).value, atol=1e-12)


def test_zonal_component_and_d_b_conversion():
    s2 = make_manifold("sphere", 3)
    p = np.array([0.0, 0.0, 1.0])
    assert zonal_component(s2, 2, p, p) == pytest.approx(math.sqrt(5))
    b = np.array([1.0, 0.5, 0.25])
    assert np.allclose(d_to_b(s2, b_to_d(s2, b)), b)


def test_recover_coefficient_circle(rng):
    c = make_manifold("circle", 2)
    B = rng.standard_normal((21, 21)) + 1j * rng.standard_normal((21, 21))
    A = B @ B.conj().T / 21
    A = (A + A.conj().T) / 2
    g = GeneralScheme(c, A)
    err = max(abs(recover_coefficient(g, i, j) - A[i, j]) for i in range(21) for j in range(21))
    assert err <= 1e-10
    with pytest.raises(ValueError):
        recover_coefficient(g, 0, 0, nodes=5)


def test_product_scheme_separable():
    # a separable geometric tail factorizes into the two factor kernels
    c, s2 = make_manifold("circle", 2), make_manifold("sphere", 3)
    ps = ProductZonalScheme((s2, c), np.zeros((0, 0)), ProductGeometric((0.5, 0.6)), ProductSpectralSet.naturals())
    z1 = ZonalScheme.from_coefficients(s2, [], Geometric(0.5))
    z2 = ZonalScheme.from_coefficients(c, [], Geometric(0.6))
    pm = ProductManifold((s2, c))
    P = sample_points(pm, 2, "uniform", 0)
    v = product_kernel_eval(ps, P[0], P[1]).value
    ref = kernel_eval(z1, P[0, :3], P[1, :3]) * kernel_eval(z2, P[0, 3:], P[1, 3:])
    assert v == pytest.approx(ref, rel=1e-8)


def test_product_tail_support_outside_window():
    c = make_manifold("circle", 2)
    ps = ProductZonalScheme((c, c), np.array([[1.0, 0.0], [0.0, -1.0]]), ProductGeometric((0.5, 0.5)),
                            ProductSpectralSet.naturals())
    sup = ps.support()
    assert (0, 0) in sup and (1, 1) not in sup and (2, 0) in sup and (0, 5) in sup
    assert (1, 1) in ps.nonzero_support()


SPECS = [
    {"manifold": {"family": "sphere", "d": 3}, "kernel": {"type": "zonal", "coefficients": [1, 0.5],
                                                         "tail": {"rule": "geometric", "base": 0.5, "mask": "ap:0+2n"}}},
    {"manifold": {"family": "circle", "d": 2}, "kernel": {"type": "zonal", "tail": {"rule": "power", "exponent": 1.6}},
     "truncation": 100, "tolerances": {"psd": 1e-9}, "check": "pd"},
    {"manifold": {"family": "sphere", "d": 3}, "kernel": {"type": "convolutional", "coefficients": [[1.0], [0.2, 0.3, 0.4]]}},
    {"manifold": {"family": "circle", "d": 2}, "kernel": {"type": "general", "coefficients": {"re": [[1, 0.5, 0], [0.5, 1, 0], [0, 0, 1]],
                                                                                             "im": [[0, 0.1, 0], [-0.1, 0, 0], [0, 0, 0]]}}},
    {"product": {"factors": [{"family": "circle", "d": 2}, {"family": "circle", "d": 2}]},
     "kernel": {"type": "product_zonal", "coefficients": [[1.0]], "tail": {"rule": "geometric", "bases": [0.5, 0.5],
                                                                           "mask": "box:(0+2n)x(0+1n)"}}},
]


@pytest.mark.parametrize("doc", SPECS)
def test_spec_roundtrip(doc):
    spec = parse_spec(doc)
    again = parse_spec(spec_to_dict(spec))
    assert spec_to_dict(again) == spec_to_dict(spec)
    assert again.check == spec.check and again.truncation == spec.truncation


@pytest.mark.parametrize(
    "doc,key",
    [
        ({"kernel": {"type": "zonal"}}, "manifold"),
        ({"manifold": {"family": "sphere", "d": 3}}, "kernel"),
        ({"manifold": {"family": "sphere"}, "kernel": {"type": "zonal"}}, "manifold.d"),
        ({"manifold": {"family": "sphere", "d": 3}, "kernel": {"type": "bogus"}}, "kernel.type"),
        ({"manifold": {"family": "sphere", "d": 3}, "kernel": {"type": "zonal", "tail": {"rule": "odd"}}}, "kernel.tail.rule"),
        ({"manifold": {"family": "sphere", "d": 3}, "kernel": {"type": "zonal"}, "truncation": 0}, "truncation"),
        ({"manifold": {"family": "sphere", "d": 3}, "kernel": {"type": "zonal"}, "tolerances": {"psd": -1}}, "tolerances.psd"),
    ],
)
def test_spec_errors_name_the_key(doc, key):
    with pytest.raises(SpecError) as exc:
        parse_spec(doc)
    assert exc.value.key == key


def test_masked_tail_values():
    s2 = make_manifold("sphere", 3)
    s = ZonalScheme.from_coefficients(s2, [1.0], Geometric(0.5), parse_set("ap:0+2n"))
    b = s.b(6)
    assert b[0] == 1.0 and b[1] == 0 and b[2] == 0.25 and b[3] == 0
