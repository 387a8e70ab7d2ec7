import math

import numpy as np
import pytest

from spdkernels.gram_interp import random_psd_trial, scheme_witness, witness_from_plan
from spdkernels.kernels import (
    ConvolutionalScheme,
    GeneralScheme,
    Geometric,
    PowerDecay,
    ProductGeometric,
    ProductZonalScheme,
    ZonalScheme,
    coupled_frequency_scheme,
    kernel_matrix,
)
from spdkernels.manifold import make_manifold, sample_points
from spdkernels.pd_checker import (
    diagonal_dominance_with_s,
    pd_convolutional,
    product_case,
    psd_submatrix,
    quadratic_form,
    sobolev_norm,
    sobolev_pointwise_sum,
    spd_product_corollary,
    spd_product_recursion,
    spd_scheme,
    spd_via_UL,
    spd_zonal,
    summability,
    uniform_diagonal_dominance,
)
from spdkernels.spectral_sets import ProductSpectralSet, SpectralSet, Status, parse_product_set, parse_set

S2 = make_manifold("sphere", 3)
S1 = make_manifold("circle", 2)
RP = make_manifold("real_projective", 4)
CP = make_manifold("complex_projective", 5)


def zonal(m, mask, explicit=(), base=0.5):
    return ZonalScheme.from_coefficients(m, explicit, Geometric(base), parse_set(mask))


def test_pd_requires_nonnegative_coefficients():
    assert pd_convolutional(ZonalScheme.from_coefficients(S2, [1, 0, 0.5])).proven
    v = pd_convolutional(ZonalScheme.from_coefficients(S2, [1, -0.5]))
    assert v.disproven and v.witness["level"] == 1
    v = pd_convolutional(ConvolutionalScheme(S2, ([1.0], [0.2, -0.1, 0.3])))
    assert v.disproven and v.witness["index"] == 1


def test_negative_coefficient_fails_pd_before_spd():
    v = spd_scheme(ZonalScheme.from_coefficients(S2, [1, 0.5, -0.1], Geometric(0.5)))
    assert v.disproven and v.sub_verdicts[0].criterion == "pd_convolutional"


@pytest.mark.parametrize(
    "m,mask,explicit,status",
    [
        (S2, "all", (), Status.PROVEN),
        (S2, "ap:0+2n", (), Status.DISPROVEN),
        (S2, "ap:1+2n", (), Status.DISPROVEN),
        (S2, "ap:0+2n", (0, 1, 0, 1), Status.DISPROVEN),
        (S2, "ap:0+4n,3+4n", (), Status.PROVEN),
        (S1, "all", (), Status.PROVEN),
        (S1, "ap:0+3n", (), Status.DISPROVEN),
        (S1, "ap:1+3n", (), Status.DISPROVEN),
        (S1, "ap:0+3n,1+3n", (), Status.PROVEN),
        (S1, "ap:0+2n", (), Status.DISPROVEN),
        (RP, "ap:5+7n", (), Status.PROVEN),
    ],
)
def test_zonal_verdicts_agree_with_numerical_oracle(m, mask, explicit, status):
    s = zonal(m, mask, explicit)
    v = spd_scheme(s)
    assert v.status is status
    if v.proven:
        for seed in range(3):
            assert random_psd_trial(s, 12, seed).strictly_pd
    else:
        w = scheme_witness(s, seed=1)
        q, scale = w.residual(s)
        assert abs(q) <= 1e-9 * scale


def test_finite_support_on_projective_and_sphere():
    v = spd_zonal(RP, SpectralSet((0, 1, 2)))
    assert v.disproven and v.witness["kind"] == "finite_support"
    s = ZonalScheme.from_coefficients(RP, [1, 0.5, 0.25])
    w = scheme_witness(s, seed=0)
    q, scale = w.residual(s)
    assert abs(q) <= 1e-9 * scale
    # S^2 with finite support: both parities are finite
    assert spd_zonal(S2, SpectralSet((0, 1, 2, 3))).disproven
    # non-geometric families are decided from the support alone
    assert spd_zonal(CP, parse_set("ap:3+5n")).proven


def test_ul_criterion():
    cs = ConvolutionalScheme(S2, ([1.0], [0.5, 0.0, 0.5]), Geometric(0.5))
    v = spd_via_UL(cs)
    assert v.proven
    cs2 = ConvolutionalScheme(S2, ([1.0], [0.5, 0.0, 0.5]), Geometric(0.5), parse_set("ap:2+2n"))
    v2 = spd_via_UL(cs2)
    assert v2.disproven
    w = scheme_witness(cs2, seed=3)
    q, scale = w.residual(cs2)
    assert abs(q) <= 1e-9 * scale


def test_psd_submatrix():
    A = np.array([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    g = GeneralScheme(S1, A)
    assert psd_submatrix(g, 1)
    assert not psd_submatrix(g)
    assert pd_convolutional(g).disproven
    with pytest.raises(ValueError):
        psd_submatrix(g, 4)


def test_coupled_scheme_dominance():
    g = coupled_frequency_scheme(10)
    rep = uniform_diagonal_dominance(g)
    assert abs(rep.sigma_achieved - 0.8) <= 1e-12
    assert rep.verdict.proven
    assert rep.to_dict()["verdict"]["status"] == "proven"


def test_dominance_failures():
    # positive semidefinite but not diagonally dominant
    A = np.full((3, 3), 0.7) + 0.3 * np.eye(3)
    g = GeneralScheme(S1, A, PowerDecay(1.0, 1.6))
    rep = uniform_diagonal_dominance(g)
    assert rep.verdict.disproven and rep.verdict.witness["kind"] == "row_ratio"
    # hypothesis failure is reported as unknown by the full check
    assert spd_scheme(g).status is Status.UNKNOWN
    # a window without a tail leaves later rows with zero diagonal
    rep = uniform_diagonal_dominance(GeneralScheme(S1, np.eye(3)))
    assert rep.verdict.witness["kind"] == "zero_diagonal" and rep.verdict.witness["level"] == 2
    # a tail that skips levels fails the same way
    rep = uniform_diagonal_dominance(GeneralScheme(S1, np.eye(3), Geometric(0.5), parse_set("ap:0+2n")))
    assert rep.verdict.witness["kind"] == "zero_diagonal"


def test_dominance_summability_guard():
    # with s = 1 the weighted power tail k^(4 - 2q) is not summable for q = 2.4
    g = GeneralScheme(S1, np.eye(3), PowerDecay(1.0, 2.4))
    assert uniform_diagonal_dominance(g).verdict.proven
    rep = diagonal_dominance_with_s(g, 1.0)
    assert rep.verdict.disproven and rep.verdict.witness["kind"] == "summability"


def test_dominance_with_s():
    g = coupled_frequency_scheme(6)
    rep = diagonal_dominance_with_s(g, 0.25)
    assert rep.verdict.proven
    assert rep.verdict.parameters["pointwise_check"] == "diagnostic only"
    with pytest.raises(ValueError):
        diagonal_dominance_with_s(g, 0.1)


def test_pointwise_sum_convergence():
    # sum (1 + k(k+1))^(-e) (2k+1) converges iff 2e > 2
    assert sobolev_pointwise_sum(S2, 1.5, 500).converges
    d = sobolev_pointwise_sum(S2, 1.0, 500)
    assert not d.converges
    assert d.partial_sums[-1] > d.partial_sums[100] + 1


def test_sobolev_norm_zonal_formula():
    s = ZonalScheme.from_coefficients(S2, [1.0, 0.5])
    ref = math.sqrt(1.0 + 3 * (1 + 4) ** 1.0 * 0.25)
    assert sobolev_norm(s, 1.0) == pytest.approx(ref)
    g = GeneralScheme(S1, np.diag([1.0, 0.5, 0.5]))
    assert sobolev_norm(g, 0.0) == pytest.approx(math.sqrt(1.5))


def test_summability_diagnostic():
    g = coupled_frequency_scheme(5)
    diag = summability(g, 0.25, truncation=200)
    assert diag.converges and diag.partial_sums[-1] > 0


def test_product_case_table():
    assert product_case(S2, CP) == (1, False)
    assert product_case(CP, S2) == (1, True)
    assert product_case(CP, RP)[0] == 2
    assert product_case(S2, S2)[0] == 3
    assert product_case(S1, S2) == (4, True)
    assert product_case(RP, S1)[0] == 5
    assert product_case(S1, S1)[0] == 6


def product(f1, f2, mask, window=np.zeros((0, 0)), bases=(0.5, 0.5)):
    return ProductZonalScheme((f1, f2), window, ProductGeometric(bases), parse_product_set(mask))


@pytest.mark.parametrize(
    "f1,f2,mask,status",
    [
        (S2, S2, "all", Status.PROVEN),
        (S2, S2, "box:(0+2n)x(0+1n);box:(1+2n)x(0+2n)", Status.DISPROVEN),
        (S2, S1, "all", Status.PROVEN),
        (S1, S2, "box:(0+2n)x(0+1n)", Status.DISPROVEN),
        (S2, S1, "box:(0+1n)x(0+3n)", Status.DISPROVEN),
        (RP, S1, "all", Status.PROVEN),
        (RP, S1, "box:(0+1n)x(0+2n)", Status.DISPROVEN),
        (S1, S1, "all", Status.PROVEN),
        (S1, S1, "box:(0+2n)x(0+2n);box:(1+2n)x(1+2n)", Status.DISPROVEN),
        (S2, RP, "box:(0+2n)x(0+1n)", Status.DISPROVEN),
        (S2, RP, "all", Status.PROVEN),
    ],
)
def test_product_verdicts_agree_with_oracle(f1, f2, mask, status):
    s = product(f1, f2, mask)
    v = spd_scheme(s)
    assert v.status is status
    if v.proven:
        for seed in range(2):
            assert random_psd_trial(s, 10, seed).strictly_pd
    else:
        w = witness_from_plan(s.manifold, v.witness["plan"], seed=2)
        q, scale = w.residual(s)
        assert abs(q) <= 1e-9 * scale


def test_product_case_two_needs_unbounded_pairs():
    J = ProductSpectralSet(((0, 0), (1, 2)))
    v = spd_product_corollary(CP, RP, J)
    assert v.disproven and v.witness["kind"] == "no_unbounded_pairs"
    assert spd_product_corollary(CP, RP, parse_product_set("box:(3+5n)x(2+7n)")).proven


def test_product_sufficiency_gap_is_unknown():
    # nonzero support passes, positive support does not
    J = ProductSpectralSet.naturals()
    F = parse_product_set("box:(0+2n)x(0+1n)")
    v = spd_product_corollary(S2, S2, J, F)
    assert v.status is Status.UNKNOWN


def test_torus_bound_reports_unknown():
    J = parse_product_set("box:(1+1n)x(1+1n)")
    v = spd_product_corollary(S1, S1, J, torus_bound=2)
    assert v.status in (Status.UNKNOWN, Status.PROVEN)
    if v.unknown:
        assert v.witness["bound"] == 2


def test_product_recursion():
    v = spd_product_recursion(S2, S1, ProductSpectralSet.naturals())
    assert v.proven
    v = spd_product_recursion(S2, S1, parse_product_set("box:(0+1n)x(0+3n)"))
    assert v.status is Status.UNKNOWN
    v = spd_product_recursion(S2, S1, {0: SpectralSet.naturals(), 1: SpectralSet.naturals()})
    assert v.status is Status.UNKNOWN


def test_quadratic_form_matches_matrix():
    s = ZonalScheme.from_coefficients(S2, [1, 0.5, 0.25])
    X = sample_points(S2, 4, "uniform", 0)
    c = np.array([1, -1j, 0.5, 2])
    K = kernel_matrix(s, X).value
    assert quadratic_form(s, X, c) == pytest.approx(float(np.real(c @ K @ c.conj())))
    with pytest.raises(ValueError):
        quadratic_form(s, X, c[:3])
