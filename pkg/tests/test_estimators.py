import math
import threading

import numpy as np
import pytest

from abeliso.cosets import Coset, random_coset_structure
from abeliso.errors import ConfigError
from abeliso.estimators import (
    EstimatorConfig,
    QueryOracle,
    coefficient_integrand,
    estimate_coefficient,
    estimate_projection,
    estimate_wt2,
    estimate_wt4,
    projection_integrand,
    sample_count,
    wt2_integrand,
    wt4_integrand,
)
from abeliso.fourier import BooleanFunction, dft, exact_bucket_weights, exact_projection
from abeliso.group import build_group, element_to_index
from planted import Z2Z2Z3, Z2Z4, Z4, Z9, random_function, z4z2_index4_indicator

Z8 = build_group([(2, 3)])


def test_sample_count_examples():
    assert sample_count(1, 4 / math.e**4) == 16
    assert sample_count(0.1, 0.01) == 2397
    for eps, delta in [(0.3, 0.05), (0.07, 0.2), (0.5, 0.001)]:
        n1, n2 = sample_count(eps, delta), sample_count(eps / 2, delta)
        assert 4 * n1 - 4 <= n2 <= 4 * n1


@pytest.mark.parametrize("eps, delta", [(0, 0.1), (2.5, 0.1), (0.1, 0), (0.1, 1)])
def test_config_rejects(eps, delta):
    with pytest.raises(ConfigError):
        EstimatorConfig(eps, delta)


def test_config_override():
    assert EstimatorConfig(0.1, 0.01, n_samples=7).samples == 7
    with pytest.raises(ConfigError):
        EstimatorConfig(0.1, 0.01, n_samples=0)


def test_oracle_counts_and_ledger():
    f = random_function(Z2Z4, np.random.default_rng(0))
    o = QueryOracle(f)
    assert o((1, 2)) == f((1, 2)) and o.count == 1
    with o.stage("a"):
        o.query([0, 1, 1, 2])
        with o.stage("b"):
            o.query([3])
        o.query([4])
    assert o.count == 7 and o.ledger == {"unstaged": 1, "a": 5, "b": 1}


def test_oracle_replay_mode_charges_distinct_points_once():
    f = random_function(Z2Z4, np.random.default_rng(0))
    o = QueryOracle(f, replay=True)
    o.query([0, 0, 1])
    o.query([1, 2])
    assert o.count == 3


def test_oracle_callable_target_and_atomic_counter():
    o = QueryOracle(lambda idx: np.ones_like(idx), group=Z9)
    threads = [threading.Thread(target=lambda: [o.query(np.arange(9)) for _ in range(200)]) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert o.count == 8 * 200 * 9
    with pytest.raises(ValueError):
        QueryOracle(lambda idx: idx)


def test_same_seed_same_answers_and_counter():
    f = random_function(Z2Z2Z3, np.random.default_rng(1))
    cs = random_coset_structure(Z2Z2Z3, 1, np.random.default_rng(2))
    c = next(iter(cs.buckets().values()))
    runs = []
    for _ in range(2):
        o = QueryOracle(f)
        rng = np.random.default_rng(77)
        vals = (
            estimate_wt2(o, c, EstimatorConfig(0.2, 0.1), rng).value,
            estimate_projection(o, c, 3, EstimatorConfig(0.2, 0.1), rng).value,
        )
        runs.append((vals, o.count))
    assert runs[0] == runs[1]


def _const_oracle(g):
    return QueryOracle(BooleanFunction.constant(g))


def test_constant_function_trivial_cases():
    g = Z2Z4
    cfg = EstimatorConfig(0.2, 0.1)
    rng = np.random.default_rng(0)
    cs = random_coset_structure(g, 1, np.random.default_rng(3))
    zero_bucket = cs.bucket_coset_representation(cs.bucket_of((0, 0)))
    assert estimate_wt2(_const_oracle(g), zero_bucket, cfg, rng).value == 1
    assert estimate_wt4(_const_oracle(g), zero_bucket, cfg, rng).value == 1
    assert estimate_projection(_const_oracle(g), zero_bucket, 5, cfg, rng).value == 1
    assert estimate_coefficient(_const_oracle(g), 0, cfg, rng).value == 1
    whole = Coset.whole_group(g)
    f = random_function(g, np.random.default_rng(8))
    o = QueryOracle(f)
    e = estimate_projection(o, whole, 5, cfg, rng)
    assert e.value == f.values[5] and e.queries == 1 and o.count == 1


def _all_cosets(g, t, seed):
    return list(random_coset_structure(g, t, np.random.default_rng(seed)).buckets().values())


def _weights(f, g, t, seed):
    """Exact (wt2, wt4) for every bucket of one structure, keyed like ``buckets()``."""
    cs = random_coset_structure(g, t, np.random.default_rng(seed))
    w = exact_bucket_weights(dft(f), cs.labels)
    return [(c, w[k]) for k, c in cs.buckets().items()]


@pytest.mark.parametrize("g", [Z4, Z2Z4, Z8])
def test_integrands_unbiased_by_full_enumeration(g):
    rng = np.random.default_rng(4)
    f = random_function(g, rng)
    t = dft(f)
    fv = lambda idx: f.values[idx].astype(np.int64)  # noqa: E731
    G = np.arange(g.order)
    checked = 0
    for seed in range(12):
        for c, (wt2, wt4) in _weights(f, g, 1, seed):
            if len(c.perp) > 4:
                continue
            checked += 1
            x, z = (a.ravel() for a in np.meshgrid(G, c.perp, indexing="ij"))
            assert abs(wt2_integrand(g, fv, c.rep, x, z).mean() - wt2) < 1e-9
            grids = np.meshgrid(G, G, G, c.perp, c.perp, indexing="ij")
            x, z1, y1, z, y = (a.ravel() for a in grids)
            assert abs(wt4_integrand(g, fv, c.rep, x, z1, y1, z, y).mean() - wt4) < 1e-9
            for xi in range(g.order):
                avg = projection_integrand(g, fv, c.rep, np.full(len(c.perp), xi), c.perp).mean()
                assert abs(avg - exact_projection(f, c, xi)) < 1e-9
    assert checked
    for r in range(g.order):
        assert abs(coefficient_integrand(g, fv, r, G).mean() - t.coeffs[r]) < 1e-9


def _violation_rate(trials, estimate, exact, eps):
    misses = sum(abs(estimate(seed) - exact) > eps for seed in range(trials))
    return misses / trials


def test_wt2_concentration_and_queries():
    g = Z2Z4
    f = random_function(g, np.random.default_rng(21))
    c, (exact, _) = _weights(f, g, 1, 5)[0]
    cfg = EstimatorConfig(0.05, 0.05)

    def run(seed):
        o = QueryOracle(f)
        e = estimate_wt2(o, c, cfg, np.random.default_rng(seed))
        assert o.count == e.queries == 2 * cfg.samples
        return e.value

    assert _violation_rate(200, run, exact, 0.05) <= 0.05


def test_wt4_concentration_and_queries():
    f = random_function(Z8, np.random.default_rng(22))
    c, (_, exact) = _weights(f, Z8, 1, 1)[0]
    cfg = EstimatorConfig(0.1, 0.05)

    def run(seed):
        o = QueryOracle(f)
        e = estimate_wt4(o, c, cfg, np.random.default_rng(seed))
        assert o.count == e.queries == 4 * cfg.samples
        return e.value

    assert _violation_rate(200, run, exact, 0.1) <= 0.10


def test_projection_concentration_and_queries():
    g = Z2Z2Z3
    f = random_function(g, np.random.default_rng(23))
    c = next(c for c in _all_cosets(g, 1, 2) if len(c.perp) > 1)
    x = element_to_index(g, (1, 0, 2))
    exact = exact_projection(f, c, x)
    cfg = EstimatorConfig(0.1, 0.05)

    def run(seed):
        o = QueryOracle(f)
        e = estimate_projection(o, c, x, cfg, np.random.default_rng(seed))
        assert o.count == e.queries == cfg.samples
        return e.value

    assert _violation_rate(200, run, exact, 0.1) <= 0.10


def test_coefficient_concentration_on_planted_function():
    f = z4z2_index4_indicator()
    t = dft(f)
    cfg = EstimatorConfig(0.1, 0.05)
    for r in t.support():
        assert abs(abs(t.coeffs[r]) - 0.5) < 1e-12

        def run(seed, r=r):
            o = QueryOracle(f)
            e = estimate_coefficient(o, int(r), cfg, np.random.default_rng(seed))
            assert o.count == e.queries == cfg.samples
            return e.value

        assert _violation_rate(200, run, t.coeffs[r], 0.1) <= 0.10


def test_wt2_residue_is_small():
    f = random_function(Z9, np.random.default_rng(3))
    c = _all_cosets(Z9, 1, 0)[1]
    e = estimate_wt2(QueryOracle(f), c, EstimatorConfig(0.05, 0.01), np.random.default_rng(0))
    assert abs(e.residue) < 0.05


def test_query_counts_follow_sample_override():
    f = random_function(Z4, np.random.default_rng(0))
    c = _all_cosets(Z4, 1, 0)[0]
    for n in (1, 5, 13):
        cfg = EstimatorConfig(0.5, 0.5, n_samples=n)
        for fn, k in [(estimate_wt2, 2), (estimate_wt4, 4)]:
            o = QueryOracle(f)
            fn(o, c, cfg, np.random.default_rng(0))
            assert o.count == k * n
