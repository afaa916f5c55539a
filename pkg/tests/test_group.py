import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abeliso.errors import InvalidGroup, ShapeError
from abeliso.group import (
    RootOfUnity,
    build_group,
    character_eval,
    element_combine,
    element_to_index,
    index_to_element,
    parse_group,
    pseudo_inner,
    sample_uniform,
    trivial_group,
)
from planted import SMALL_GROUPS, Z2Z2Z3, Z4, Z4Z3

group_st = st.sampled_from(SMALL_GROUPS)


@st.composite
def group_and_elements(draw, k=3):
    g = draw(group_st)
    elems = [tuple(draw(st.integers(0, q - 1)) for q in g.moduli) for _ in range(k)]
    return g, elems


@pytest.mark.parametrize(
    "factors, order, L",
    [([(2, 1)], 2, 2), ([(2, 2), (3, 1)], 12, 12), ([(2, 1), (2, 1)], 4, 2), ([(3, 2), (3, 1)], 27, 9)],
)
def test_build_group_order_and_lcm(factors, order, L):
    g = build_group(factors)
    assert (g.order, g.lcm_L) == (order, L)
    assert g.order % g.lcm_L == 0
    assert all(g.lcm_L % q == 0 for q in g.moduli)


@pytest.mark.parametrize("bad", [[], [(4, 1)], [(1, 1)], [(2, 0)], [(6, 2)]])
def test_build_group_rejects(bad):
    with pytest.raises(InvalidGroup):
        build_group(bad)


def test_parse_group_accepts_both_spellings():
    assert parse_group("4,3") == parse_group("2^2,3") == build_group([(2, 2), (3, 1)])
    with pytest.raises(InvalidGroup):
        parse_group("6")


def test_pseudo_inner_examples():
    assert pseudo_inner(Z4Z3, (1, 0), (1, 0)) == 3
    assert pseudo_inner(Z4Z3, (1, 1), (1, 1)) == 7
    assert all(pseudo_inner(Z4Z3, (0, 0), x) == 0 for x in Z4Z3.elements())
    assert character_eval(Z4Z3, (1, 1), (1, 1)).exponent == 7


def test_pseudo_inner_shape_mismatch():
    with pytest.raises(ShapeError):
        pseudo_inner(Z4Z3, (1,), (1, 0))


@given(group_and_elements())
def test_pairing_bilinear_and_symmetric(case):
    g, (r, x, y) = case
    L = g.lcm_L
    xy = element_combine(g, x, y, 1, 1)
    assert pseudo_inner(g, r, xy) == (pseudo_inner(g, r, x) + pseudo_inner(g, r, y)) % L
    assert pseudo_inner(g, r, x) == pseudo_inner(g, x, r)
    neg = element_combine(g, x, x, -1, 0)
    assert character_eval(g, r, neg) == character_eval(g, r, x).conjugate()


@pytest.mark.parametrize("g", SMALL_GROUPS)
def test_nondegenerate_and_character_sums(g):
    table = g.pairing_table
    nonzero_rows = (table != 0).any(axis=1)
    assert not nonzero_rows[0] and nonzero_rows[1:].all()
    sums = g.root_values(table).sum(axis=1)
    assert abs(sums[0] - g.order) < 1e-9
    assert np.abs(sums[1:]).max(initial=0) < 1e-9


def test_root_of_unity_laws():
    a, b = RootOfUnity(3, 8), RootOfUnity(7, 8)
    assert (a * b).exponent == 2
    assert (a**3).exponent == 1
    assert a.conjugate().exponent == 5
    assert abs(abs(a.value) - 1) < 1e-12
    assert abs(complex(a * b) - a.value * b.value) < 1e-12
    with pytest.raises(ShapeError):
        a * RootOfUnity(1, 4)


def test_element_combine_examples():
    a = (3,)
    assert element_combine(Z4, a, (0,), 1, 0) == a
    assert element_combine(Z4, a, a, 1, -1) == (0,)
    assert element_combine(Z4, (3,), (3,), 1, 1) == (2,)
    with pytest.raises(ShapeError):
        element_combine(Z4, (1, 1), (0,))


def test_index_bijection():
    g = build_group([(2, 1), (3, 1)])
    assert index_to_element(g, 0) == (0, 0)
    assert index_to_element(g, 5) == (1, 2)
    assert index_to_element(g, 1) == (0, 1)  # last factor varies fastest
    for i in range(Z2Z2Z3.order):
        assert element_to_index(Z2Z2Z3, index_to_element(Z2Z2Z3, i)) == i
    with pytest.raises(IndexError):
        index_to_element(g, 6)


def test_sample_uniform_reproducible_and_uniform():
    a = [sample_uniform(Z4Z3, np.random.default_rng(7)) for _ in range(3)]
    b = [sample_uniform(Z4Z3, np.random.default_rng(7)) for _ in range(3)]
    assert a == b
    rng = np.random.default_rng(0)
    draws = np.array([sample_uniform(Z4Z3, rng) for _ in range(10_000)])
    for i, q in enumerate(Z4Z3.moduli):
        counts = np.bincount(draws[:, i], minlength=q)
        p = 1 / q
        sigma = math.sqrt(10_000 * p * (1 - p))
        assert np.abs(counts - 10_000 * p).max() < 5 * sigma


def test_trivial_group_degenerates():
    g = trivial_group()
    assert (g.order, g.lcm_L, g.rank) == (1, 1, 0)
    assert sample_uniform(g, np.random.default_rng(0)) == ()
    assert index_to_element(g, 0) == ()
    assert g.pairing_table.shape == (1, 1)
