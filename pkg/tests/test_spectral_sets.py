import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdkernels.spectral_sets import (
    Progression,
    ProductSpectralSet,
    SpectralSet,
    Status,
    SymmetricSet,
    Verdict,
    ap_misses_set,
    ap_misses_zset,
    contains,
    coset_meets,
    coset_representatives,
    format_product_set,
    format_set,
    intersects_every_full_ap,
    parity_census,
    parity_filter,
    parse_product_set,
    parse_set,
    restrict_min,
    slice_at,
    torus_condition,
    z_set_intersects_every_full_ap,
)

progs = st.builds(Progression, st.integers(0, 12), st.integers(1, 6))
sets = st.builds(
    SpectralSet,
    st.lists(st.integers(0, 30), max_size=5).map(tuple),
    st.lists(progs, max_size=4).map(tuple),
)
LIMIT = 200


def raw_members(finite, progressions, limit=LIMIT):
    out = set(finite)
    for p in progressions:
        out.update(range(p.start, limit, p.step))
    return {k for k in out if k < limit}


@given(st.lists(st.integers(0, 30), max_size=5), st.lists(progs, max_size=4))
def test_canonicalization_preserves_membership(fin, ps):
    S = SpectralSet(tuple(fin), tuple(ps))
    assert set(S.elements_below(LIMIT)) == raw_members(fin, ps)
    # canonical form is idempotent
    assert SpectralSet(S.finite, S.progressions) == S
    # no progression is redundant and no finite element is already covered
    for i, p in enumerate(S.progressions):
        assert not any(q.includes(p) for j, q in enumerate(S.progressions) if j != i)
    assert not any(k in p for k in S.finite for p in S.progressions)


@given(sets)
def test_notation_roundtrip(S):
    assert parse_set(format_set(S)) == S


@given(sets, sets)
def test_union_membership(A, B):
    U = A.union(B)
    assert set(U.elements_below(LIMIT)) == set(A.elements_below(LIMIT)) | set(B.elements_below(LIMIT))


@given(sets, st.integers(0, 20))
def test_restrict_min(S, g):
    assert set(restrict_min(S, g).elements_below(LIMIT)) == {k for k in S.elements_below(LIMIT) if k >= g}


@given(sets, st.sampled_from([0, 1]))
def test_parity_filter(S, par):
    assert set(parity_filter(S, par).elements_below(LIMIT)) == {k for k in S.elements_below(LIMIT) if k % 2 == par}


@given(sets)
def test_parity_census_against_enumeration(S):
    c = parity_census(S)
    # infinitely many members of a parity <=> members of it far beyond every finite element
    far = [k for k in S.elements_below(LIMIT) if k >= 100]
    assert c["even_infinite"] == any(k % 2 == 0 for k in far)
    assert c["odd_infinite"] == any(k % 2 == 1 for k in far)


def brute_covers(S: SpectralSet) -> bool:
    """Residues mod lcm of the progression steps, enumerated from members."""
    if not S.progressions:
        return False
    L = math.lcm(*(p.step for p in S.progressions))
    hit = set()
    for p in S.progressions:
        hit.update(range(p.start, p.start + L * p.step + L, p.step))
    return {k % L for k in hit} == set(range(L))


@settings(max_examples=200)
@given(sets)
def test_covering_decision_matches_enumeration(S):
    v = intersects_every_full_ap(S)
    assert v.proven == brute_covers(S)
    if v.disproven:
        c, d = v.witness["residue"], v.witness["modulus"]
        assert ap_misses_set(S, c, d)
        # the refined class also avoids the finite part
        assert not any(k % d == c % d for k in S.elements_below(LIMIT + 4 * d))


CLASSIC = [(0, 2), (0, 3), (1, 4), (5, 6), (7, 12)]


def test_classical_covering_system():
    S = SpectralSet((), tuple(Progression(a, b) for a, b in CLASSIC))
    assert intersects_every_full_ap(S).proven
    assert all(any(r % b == a for a, b in CLASSIC) for r in range(12))
    T = SpectralSet((), tuple(Progression(a, b) for a, b in CLASSIC[:-1]))
    v = intersects_every_full_ap(T)
    assert v.disproven and v.witness["modulus"] == 12
    uncovered = [r for r in range(12) if not any(r % b == a for a, b in CLASSIC[:-1])]
    assert uncovered == [7] and v.witness["residue"] == 7


def test_finite_part_is_ignored_by_covering():
    S = SpectralSet(tuple(range(50)), (Progression(0, 2),))
    v = intersects_every_full_ap(S)
    assert v.disproven
    assert v.witness["residue"] % 2 == 1


def test_circle_3n_witness():
    v = intersects_every_full_ap(parse_set("ap:0+3n"))
    assert (v.witness["residue"], v.witness["modulus"]) == (1, 3)


def test_zset_uses_both_signs():
    # 1 + 3N together with its negatives covers residues 1 and 2 mod 3
    T = SymmetricSet(parse_set("ap:1+3n"))
    v = z_set_intersects_every_full_ap(T)
    assert v.disproven and v.witness["residue"] % 3 == 0
    assert not ap_misses_zset(T, 2, 3)
    T2 = SymmetricSet(parse_set("ap:0+3n,1+3n"))
    assert z_set_intersects_every_full_ap(T2).proven


def test_parse_errors():
    with pytest.raises(ValueError):
        parse_set("ap:1-4n")
    with pytest.raises(ValueError):
        parse_set("bogus:1")
    with pytest.raises(ValueError):
        Progression(0, 0)


def test_verdict_roundtrip():
    v = Verdict(Status.DISPROVEN, "x", {"residue": 1}, {"modulus": 3})
    assert Verdict.from_dict(v.to_dict()) == v


# -- product sets ------------------------------------------------------------------

boxes = st.tuples(progs, progs)
psets = st.builds(
    ProductSpectralSet,
    st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)), max_size=4).map(tuple),
    st.lists(boxes, max_size=3).map(tuple),
)


def pmembers(J, limit=40):
    return {(k, l) for k in range(limit) for l in range(limit) if (k, l) in J}


@given(psets)
def test_product_roundtrip_and_transpose(J):
    assert parse_product_set(format_product_set(J)) == J
    assert pmembers(J.transpose()) == {(l, k) for k, l in pmembers(J)}


@given(psets, st.integers(0, 10))
def test_slices(J, k):
    assert set(slice_at(J, k).elements_below(40)) == {l for (kk, l) in pmembers(J) if kk == k}


def in_subgroup(a, b, d, u, v):
    return u % a == 0 and (v - b * (u // a)) % d == 0


def brute_coset_meets(J, a, b, d, x, y, R=48):
    for k in range(-R, R + 1):
        for l in range(-R, R + 1):
            if (abs(k), abs(l)) in J and in_subgroup(a, b, d, k - x, l - y):
                return True
    return False


small_progs = st.builds(Progression, st.integers(0, 5), st.integers(1, 4))
small_psets = st.builds(
    ProductSpectralSet,
    st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=3).map(tuple),
    st.lists(st.tuples(small_progs, small_progs), max_size=2).map(tuple),
)


@settings(max_examples=60, deadline=None)
@given(small_psets, st.integers(1, 3), st.integers(0, 2), st.integers(1, 3))
def test_coset_meets_matches_lattice_enumeration(J, a, b, d):
    b = b % d
    for x, y in coset_representatives(a, b, d):
        assert coset_meets(J, a, b, d, x, y) == brute_coset_meets(J, a, b, d, x, y)


def test_coset_representatives_partition():
    a, b, d = 2, 1, 3
    reps = list(coset_representatives(a, b, d))
    assert len(reps) == a * d
    for (x1, y1), (x2, y2) in itertools.combinations(reps, 2):
        assert not in_subgroup(a, b, d, x1 - x2, y1 - y2)


def test_torus_full_and_even_sum():
    assert torus_condition(ProductSpectralSet.naturals()).proven
    even = parse_product_set("box:(0+2n)x(0+2n);box:(1+2n)x(1+2n)")
    v = torus_condition(even)
    assert v.disproven
    assert v.witness["subgroup"] == [1, 1, 2] and v.witness["translation"] == [1, 0]
    assert torus_condition(ProductSpectralSet()).witness["subgroup"] == [1, 0, 1]


def test_torus_unknown_when_bound_reached():
    # finite-free set meeting every small coset without a full line
    J = parse_product_set("box:(0+1n)x(0+2n);box:(0+1n)x(1+2n)")
    # this one is N x N in disguise and the structural rule sees the union of lines
    assert not torus_condition(J).disproven
    J2 = parse_product_set("box:(1+1n)x(1+1n)")
    v = torus_condition(J2, bound=3)
    assert v.status in (Status.UNKNOWN, Status.PROVEN)
    assert v.parameters["bound"] == 3


def test_contains_helper():
    S = parse_set("finite:3;ap:1+4n")
    assert contains(S, 3) and contains(S, 9) and not contains(S, 4)
