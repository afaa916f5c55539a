"""Query access to f and sampling estimators for bucket weights, projections
and single Fourier coefficients.

Every estimator averages ``N = ceil(4 ln(4/delta) / eps^2)`` complex summands
of modulus at most one; the real and imaginary parts are bounded separately
by Hoeffding, so the average is within ``eps`` with probability
``1 - delta``.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cosets import Coset
from .errors import ConfigError
from .fourier import BooleanFunction
from .group import GroupSpec, element_to_index

CHUNK = 1 << 18


class QueryOracle:
    """Counting query interface to a +-1 function.

    ``target`` is a :class:`BooleanFunction` or any callable mapping an array of
    element indices to +-1 values.  With ``replay=True`` each distinct point is
    charged once, however often it is asked for.
    """

    def __init__(self, target, group: GroupSpec | None = None, replay: bool = False):
        if isinstance(target, BooleanFunction):
            self.group = target.group
            values = target.values
            self._eval: Callable[[np.ndarray], np.ndarray] = lambda idx: values[idx]
        else:
            if group is None:
                raise ValueError("a callable target needs its group")
            self.group = group
            self._eval = target
        self.target = target
        self.replay = replay
        self.count = 0
        self.ledger: dict[str, int] = {}
        self._stage = "unstaged"
        self._seen = np.zeros(self.group.order, dtype=bool) if replay else None
        self._lock = threading.Lock()

    def query(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        with self._lock:
            if self.replay:
                flat = np.unique(idx.ravel())
                charged = int((~self._seen[flat]).sum())
                self._seen[flat] = True
            else:
                charged = int(idx.size)
            self.count += charged
            self.ledger[self._stage] = self.ledger.get(self._stage, 0) + charged
        return np.asarray(self._eval(idx), dtype=np.int64)

    def __call__(self, x) -> int:
        i = x if isinstance(x, (int, np.integer)) else element_to_index(self.group, x)
        return int(self.query(np.array([i]))[0])

    @contextmanager
    def stage(self, name: str):
        """Attribute queries made inside the block to ``name`` in the ledger."""
        prev = self._stage
        self._stage = name
        self.ledger.setdefault(name, 0)
        try:
            yield self
        finally:
            self._stage = prev


def sample_count(epsilon: float, delta: float) -> int:
    """``ceil(4 ln(4/delta) / epsilon^2)``."""
    _check_eps_delta(epsilon, delta)
    # round away float fuzz before ceil so exact integers stay exact
    return math.ceil(round(4.0 * math.log(4.0 / delta) / epsilon**2, 9))


def _check_eps_delta(epsilon: float, delta: float):
    if not 0 < epsilon <= 2:
        raise ConfigError(f"epsilon must be in (0, 2], got {epsilon}")
    if not 0 < delta < 1:
        raise ConfigError(f"delta must be in (0, 1), got {delta}")


@dataclass(frozen=True)
class EstimatorConfig:
    epsilon: float
    delta: float
    n_samples: int | None = None

    def __post_init__(self):
        _check_eps_delta(self.epsilon, self.delta)
        if self.n_samples is not None and self.n_samples < 1:
            raise ConfigError("n_samples must be positive")

    @property
    def samples(self) -> int:
        return self.n_samples if self.n_samples is not None else sample_count(self.epsilon, self.delta)


@dataclass(frozen=True)
class Estimate:
    """Sample mean plus bookkeeping.

    For the weight estimators ``value`` is the real part of the complex mean and
    ``residue`` its imaginary part (which should vanish).
    """

    value: complex | float
    residue: float
    samples: int
    queries: int


# -- integrands (shared with the exhaustive checks in the test-suite) ---------


def wt2_integrand(g: GroupSpec, f_vals, rep: int, x, z) -> np.ndarray:
    """``f(x) f(x+z) chi_r(z)``; ``f_vals`` maps index arrays to values."""
    return f_vals(x) * f_vals(g.add(x, z)) * g.root_values(g.pair(rep, z))


def wt4_integrand(g: GroupSpec, f_vals, rep: int, x, z1, y1, z, y) -> np.ndarray:
    """``f(z1) f(x-z1-z) f(y1) f(x-y1-y) chi_r(z-y)``."""
    a = g.sub(g.sub(x, z1), z)
    b = g.sub(g.sub(x, y1), y)
    return f_vals(z1) * f_vals(a) * f_vals(y1) * f_vals(b) * g.root_values(g.pair(rep, g.sub(z, y)))


def projection_integrand(g: GroupSpec, f_vals, rep: int, x, z) -> np.ndarray:
    """``f(x - z) chi_r(z)``."""
    return f_vals(g.sub(x, z)) * g.root_values(g.pair(rep, z))


def coefficient_integrand(g: GroupSpec, f_vals, r: int, x) -> np.ndarray:
    """``f(x) conj(chi_r(x))``."""
    return f_vals(x) * g.root_values(-g.pair(r, x))


# -- estimators ---------------------------------------------------------------


def _chunks(n: int):
    done = 0
    while done < n:
        step = min(CHUNK, n - done)
        yield step
        done += step


def _rep(coset: Coset) -> int:
    return coset.rep


def estimate_wt2(oracle: QueryOracle, coset: Coset, config: EstimatorConfig, rng: np.random.Generator) -> Estimate:
    """``E_{x in G, z in H^perp}[f(x) f(x+z) chi_r(z)]``; ``2N`` queries."""
    g = oracle.group
    n = config.samples
    total = 0j
    for m in _chunks(n):
        x = rng.integers(g.order, size=m)
        z = coset.perp[rng.integers(len(coset.perp), size=m)]
        total += wt2_integrand(g, oracle.query, _rep(coset), x, z).sum()
    mean = total / n
    return Estimate(float(mean.real), float(mean.imag), n, 2 * n)


def estimate_wt4(oracle: QueryOracle, coset: Coset, config: EstimatorConfig, rng: np.random.Generator) -> Estimate:
    """Mean of the five-point product over ``x, z1, y1 in G`` and ``z, y in H^perp``; ``4N`` queries."""
    g = oracle.group
    n = config.samples
    total = 0j
    k = len(coset.perp)
    for m in _chunks(n):
        x, z1, y1 = rng.integers(g.order, size=(3, m))
        z, y = coset.perp[rng.integers(k, size=(2, m))]
        total += wt4_integrand(g, oracle.query, _rep(coset), x, z1, y1, z, y).sum()
    mean = total / n
    return Estimate(float(mean.real), float(mean.imag), n, 4 * n)


def projection_queries(coset: Coset, config: EstimatorConfig) -> int:
    return 1 if len(coset.perp) == 1 else config.samples


def estimate_projections(
    oracle: QueryOracle, coset: Coset, xs, config: EstimatorConfig, rng: np.random.Generator
) -> np.ndarray:
    """``P_C f(x)`` for each index in ``xs``, each from its own ``N`` samples.

    When ``H^perp = {0}`` the projection is ``f`` itself and one query per point
    is exact.
    """
    g = oracle.group
    xs = np.asarray(xs, dtype=np.int64)
    if len(coset.perp) == 1:
        return oracle.query(xs).astype(np.complex128)
    n = config.samples
    out = np.zeros(len(xs), dtype=np.complex128)
    rows = max(1, CHUNK // n)
    for start in range(0, len(xs), rows):
        xb = xs[start : start + rows]
        z = coset.perp[rng.integers(len(coset.perp), size=(len(xb), n))]
        out[start : start + rows] = projection_integrand(g, oracle.query, _rep(coset), xb[:, None], z).mean(axis=1)
    return out


def estimate_projection(
    oracle: QueryOracle, coset: Coset, x, config: EstimatorConfig, rng: np.random.Generator
) -> Estimate:
    """``E_{z in H^perp}[f(x - z) chi_r(z)]``."""
    xi = x if isinstance(x, (int, np.integer)) else element_to_index(oracle.group, x)
    value = complex(estimate_projections(oracle, coset, [xi], config, rng)[0])
    q = projection_queries(coset, config)
    return Estimate(value, 0.0, q, q)


def estimate_coefficient(oracle: QueryOracle, r, config: EstimatorConfig, rng: np.random.Generator) -> Estimate:
    """``E_x[f(x) conj(chi_r(x))]``; ``N`` queries."""
    g = oracle.group
    ri = r if isinstance(r, (int, np.integer)) else element_to_index(g, r)
    n = config.samples
    total = 0j
    for m in _chunks(n):
        x = rng.integers(g.order, size=m)
        total += coefficient_integrand(g, oracle.query, ri, x).sum()
    value = total / n
    return Estimate(complex(value), 0.0, n, n)
