import math
import warnings

import numpy as np
import pytest

from abeliso.automorphisms import apply, enumerate_automorphisms, exact_automorphism_distance, invert
from abeliso.cosets import random_coset_structure
from abeliso.errors import ConfigError, ShapeError
from abeliso.estimators import QueryOracle
from abeliso.fourier import BooleanFunction, dft, hamming_distance, indicator_function
from abeliso.group import element_to_index, index_to_element
from abeliso.sieve import SieveOutput
from abeliso.tester import (
    Decision,
    SparseSurrogate,
    TesterConfig,
    _decide,
    correlation_sweep,
    reconstruct_surrogate,
    test_isomorphism,
    test_isomorphism_sparse,
)
from planted import Z2Z2, Z2Z4, Z3Z3, Z4, index3_indicator, random_function, z4_two_sparse


def fake_output(g, xs, alphas, f_column):
    """A sieve result whose columns are exactly the characters ``alphas`` on ``xs``."""
    xs = np.asarray(xs, dtype=np.int64)
    idx = np.array([element_to_index(g, a) for a in alphas], dtype=np.int64).reshape(-1)
    q = g.pairing_table[np.ix_(xs, idx)]
    m, n = q.shape
    return SieveOutput(
        group=g,
        xs=xs,
        q_exponents=q,
        raw_matrix=np.exp(2j * np.pi * q / g.lcm_L),
        displacement=np.zeros((m, n)),
        indeterminate=np.zeros((m, n), dtype=bool),
        f_column=np.asarray(f_column),
        survived_buckets=[(j,) for j in range(n)],
        cosets=[],
        structure=random_coset_structure(g, 1, np.random.default_rng(0)),
        t=1,
        tolerance=0.1,
    )


def exact_surrogate(f):
    t = dft(f)
    return SparseSurrogate(f.group, tuple((index_to_element(f.group, int(r)), t.coeffs[r]) for r in t.support()))


# -- reconstruction -----------------------------------------------------------


def test_reconstruct_constant():
    xs = np.arange(Z2Z4.order)
    sur, rel = reconstruct_surrogate(fake_output(Z2Z4, xs, [(0, 0)], np.ones(len(xs))))
    assert sur.support == (((0, 0), 1 + 0j),)
    assert rel.labels == [0] and rel.agreement == 1.0


def test_reconstruct_two_independent_columns_on_z2z2():
    f = indicator_function(Z2Z2, [(1, 1)])
    rng = np.random.default_rng(0)
    xs = rng.integers(4, size=400)
    out = fake_output(Z2Z2, xs, [(1, 0), (0, 1)], f.values[xs])
    sur, rel = reconstruct_surrogate(out)
    assert rel.span.basis == [0, 1] and not rel.span.expressions
    assert rel.labels == [element_to_index(Z2Z2, (1, 0)), element_to_index(Z2Z2, (0, 1))]
    assert rel.witness.is_identity()
    exact = dft(f)
    for e, c in sur.support:
        assert abs(c - exact[e]) < 0.2
    assert abs(exact[(1, 0)] - 0.5) < 1e-12


def test_reconstruct_dependent_triple():
    rng = np.random.default_rng(1)
    xs = rng.integers(Z2Z4.order, size=60)
    a, b = (1, 0), (0, 1)
    ab = (1, 1)
    out = fake_output(Z2Z4, xs, [a, b, ab], np.ones(60))
    # third column is the entrywise product of the first two
    assert np.array_equal(out.q_exponents[:, 2], (out.q_exponents[:, 0] + out.q_exponents[:, 1]) % 4)
    sur, rel = reconstruct_surrogate(out)
    assert len(rel.span.basis) == 2
    (j, expr), = rel.span.expressions.items()
    assert j == 2 and expr.lam == 1
    assert rel.labels[2] == int(Z2Z4.add(rel.labels[0], rel.labels[1]))
    assert rel.agreement == 1.0


def test_reconstruct_relabeling_witness_explains_columns():
    # columns for a non-canonical pair still get a naming consistent with Q
    rng = np.random.default_rng(2)
    xs = rng.integers(Z3Z3.order, size=40)
    out = fake_output(Z3Z3, xs, [(1, 2), (2, 0)], np.ones(40))
    _, rel = reconstruct_surrogate(out)
    w = rel.witness
    for j, lab in enumerate(rel.labels):
        assert np.array_equal(Z3Z3.pairing_table[lab, w.perm[xs]], out.q_exponents[:, j])


def test_reconstruct_empty():
    out = fake_output(Z4, [0, 1], [], [1, 1])
    sur, rel = reconstruct_surrogate(out)
    assert sur.support == () and rel.labels == []


def test_surrogate_validation():
    with pytest.raises(ValueError):
        SparseSurrogate(Z4, (((1,), 0.5), ((1,), 0.5)))
    with pytest.raises(ValueError):
        SparseSurrogate(Z4, (((1,), complex("nan")),))


# -- sweep ----------------------------------------------------------------------


def test_sweep_exact_table_peaks_at_identity():
    g = random_function(Z2Z4, np.random.default_rng(4))
    autos = enumerate_automorphisms(Z2Z4)
    res = correlation_sweep(exact_surrogate(g), dft(g), autos)
    ident = next(i for i, a in enumerate(autos) if a.is_identity())
    assert abs(res.correlations[ident] - 1) < 1e-9 and abs(res.best - 1) < 1e-9


def test_sweep_recovers_planted_automorphism():
    g = random_function(Z2Z4, np.random.default_rng(5))
    autos = enumerate_automorphisms(Z2Z4)
    for a0 in autos:
        res = correlation_sweep(exact_surrogate(apply(a0, g)), dft(g), autos)
        k = next(i for i, a in enumerate(autos) if a == invert(a0))
        assert abs(res.correlations[k] - 1) < 1e-9 and abs(res.best - 1) < 1e-9


def test_sweep_matches_direct_correlations():
    rng = np.random.default_rng(6)
    autos = enumerate_automorphisms(Z2Z4)
    for _ in range(5):
        f, g = random_function(Z2Z4, rng), random_function(Z2Z4, rng)
        res = correlation_sweep(exact_surrogate(f), dft(g), autos)
        direct = [1 - 2 * hamming_distance(apply(a, f), g) for a in autos]
        assert np.allclose(res.correlations, direct, atol=1e-9)
        d, _ = exact_automorphism_distance(f, g)
        assert abs(res.best - (1 - 2 * d)) < 1e-9


def test_sweep_negation():
    g = index3_indicator()
    d, _ = exact_automorphism_distance(-g, g)
    res = correlation_sweep(exact_surrogate(-g), dft(g), enumerate_automorphisms(Z3Z3))
    assert abs(res.best - (1 - 2 * d)) < 1e-9 and d == pytest.approx(5 / 9)


def test_sweep_validation():
    with pytest.raises(ShapeError):
        correlation_sweep(SparseSurrogate(Z4, ()), dft(BooleanFunction.constant(Z2Z2)), enumerate_automorphisms(Z2Z2))
    with pytest.raises(ValueError):
        correlation_sweep(SparseSurrogate(Z4, ()), dft(BooleanFunction.constant(Z4)), [])


# -- configuration and decisions ---------------------------------------------------


@pytest.mark.parametrize(
    "kw", [{"epsilon": 0}, {"tau": 0.6}, {"epsilon": 0.5, "tau": 0.55}, {"s": 0}, {"theta": 2}, {"m_tilde": 0}]
)
def test_tester_config_rejects(kw):
    args = {"epsilon": 0.05, "tau": 0.4} | kw
    with pytest.raises(ConfigError):
        TesterConfig(**args)


def test_derived_parameters():
    c = TesterConfig(0.05, 0.4)
    assert c.derive_theta(2, 4) == pytest.approx(0.4 / 24)
    assert TesterConfig(0.05, 0.4, l_factor=True).derive_theta(2, 4) == pytest.approx(0.4 / 24 * 10 * math.pi / 4)
    assert c.derive_m_tilde(2) == math.ceil(8 * 4 / 0.16 * math.log(5))
    assert c.derive_m_tilde(0.1) == 1
    assert TesterConfig(0.05, 0.4, theta=0.3, m_tilde=7).derive_theta(2, 4) == 0.3


def test_decision_trichotomy():
    assert _decide(0.9, 0.7, 0.3) is Decision.ACCEPT
    assert _decide(0.2, 0.7, 0.3) is Decision.REJECT
    assert _decide(0.5, 0.7, 0.3) is Decision.FAIL
    assert _decide(0.3, 0.7, 0.3) is Decision.REJECT


# -- end to end -----------------------------------------------------------------------


def _cfg(**kw):
    return TesterConfig(0.05, 0.4, **({"theta": 0.6, "m_tilde": 40} | kw))


def test_constant_pair_accepts_with_exact_ledger():
    g = BooleanFunction.constant(Z2Z2)
    o = QueryOracle(g)
    v = test_isomorphism(o, g, _cfg(), np.random.default_rng(0))
    assert v.decision is Decision.ACCEPT and v.witness is not None
    assert v.total_queries == o.count == v.sieve.total_queries + 40
    assert v.ledger["coefficients"] == 40
    assert v.metadata["sweep_queries"] == 0
    assert v.thresholds == pytest.approx((1 - 0.1 - 0.2, 1 - 0.1 - 0.6))


def test_replay_mode_charges_fewer_queries():
    g = BooleanFunction.constant(Z2Z2)
    o = QueryOracle(g, replay=True)
    v = test_isomorphism(o, g, _cfg(), np.random.default_rng(0))
    assert v.total_queries <= 4


def test_sparse_constant_pair_accepts():
    g = BooleanFunction.constant(Z4)
    v = test_isomorphism_sparse(QueryOracle(g), g, 1, _cfg(), np.random.default_rng(1))
    assert v.decision is Decision.ACCEPT
    assert "wt4" not in v.ledger or v.ledger["wt4"] == 0
    assert v.thresholds == pytest.approx((1 - 0.1 - 0.1, 1 - 0.1 - 0.7))


def test_spectral_norm_warning():
    g = BooleanFunction.constant(Z2Z2)
    with pytest.warns(UserWarning):
        test_isomorphism(QueryOracle(g), g, _cfg(s=0.5), np.random.default_rng(0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        test_isomorphism(QueryOracle(g), g, _cfg(), np.random.default_rng(0))


def test_group_mismatch():
    with pytest.raises(ShapeError):
        test_isomorphism(QueryOracle(BooleanFunction.constant(Z4)), BooleanFunction.constant(Z2Z2), _cfg(), np.random.default_rng(0))


def test_exhausted_relabel_budget_is_a_fail():
    g = index3_indicator()
    v = test_isomorphism(QueryOracle(g), g, _cfg(relabel_cap=0), np.random.default_rng(0))
    assert v.decision is Decision.FAIL and v.witness is None and "reason" in v.metadata


def test_close_and_far_on_z3z3():
    g = index3_indicator()
    autos = enumerate_automorphisms(Z3Z3)
    cfg = TesterConfig(0.05, 0.4, theta=0.4)
    for seed in range(2):
        a = autos[(7 * seed + 3) % len(autos)]
        f = apply(a, g)
        v = test_isomorphism(QueryOracle(f), g, cfg, np.random.default_rng(seed))
        assert v.decision is Decision.ACCEPT
        assert hamming_distance(apply(v.witness, f), g) <= 0.05
        v = test_isomorphism(QueryOracle(-g), g, cfg, np.random.default_rng(seed))
        assert v.decision is Decision.REJECT


def test_sparse_close_and_far_on_z4():
    g = z4_two_sparse()
    autos = enumerate_automorphisms(Z4)
    cfg = TesterConfig(0.05, 0.4, theta=0.5)
    for seed in range(2):
        f = apply(autos[seed % 2], g)
        o = QueryOracle(f)
        v = test_isomorphism_sparse(o, g, 2, cfg, np.random.default_rng(seed))
        assert v.decision is Decision.ACCEPT
        assert v.ledger.get("wt4", 0) == 0
        assert v.total_queries == v.sieve.total_queries + v.metadata["m_tilde"]
        v = test_isomorphism_sparse(QueryOracle(-g), g, 2, cfg, np.random.default_rng(seed))
        assert v.decision is Decision.REJECT
