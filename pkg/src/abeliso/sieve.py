"""The implicit sieve (general and sparse), Goldreich-Levin prefix search over
G, and rounding of noisy estimates onto exact L-th roots of unity."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cosets import Coset, CosetStructure, prefix_coset, random_coset_structure
from .errors import ConfigError, Indeterminate
from .estimators import (
    EstimatorConfig,
    QueryOracle,
    estimate_projections,
    estimate_wt2,
    estimate_wt4,
    projection_queries,
    sample_count,
)
from .fourier import BooleanFunction, bucket_truth, dft
from .group import GroupSpec, RootOfUnity, element_to_index

INDEX_LIMIT = 2**63
TINY = 1e-12


# -- rounding -----------------------------------------------------------------


def round_to_root(z: complex, L: int) -> tuple[RootOfUnity, float]:
    """Nearest ``L``-th root of unity by angle; ties go to the smaller exponent."""
    exps, disp, bad = round_to_roots(np.array([z], dtype=np.complex128), L)
    if bad[0]:
        raise Indeterminate("cannot round 0 to a root of unity")
    return RootOfUnity(int(exps[0]), L), float(disp[0])


def round_to_roots(z: np.ndarray, L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized rounding: ``(exponents, displacement, indeterminate mask)``.

    Indeterminate entries (modulus below ``TINY``) get exponent 0 and
    displacement ``nan``.
    """
    z = np.asarray(z, dtype=np.complex128)
    bad = np.abs(z) < TINY
    turns = (np.angle(z) / (2 * np.pi)) % 1.0 * L
    lo = np.floor(turns)
    frac = turns - lo
    k = np.where(frac > 0.5, lo + 1, lo).astype(np.int64) % L
    # a tie between L-1 and L == 0 goes to 0
    k = np.where((frac == 0.5) & (lo == L - 1), 0, k)
    k = np.where(bad, 0, k)
    disp = np.abs(z - np.exp(2j * np.pi * k / L))
    disp = np.where(bad, np.nan, disp)
    return k, disp, bad


# -- configuration ------------------------------------------------------------


def _log_ceil(x: float, L: int) -> int:
    if L <= 1:
        return 1
    return max(1, math.ceil(math.log(x) / math.log(L) - 1e-12))


@dataclass(frozen=True)
class SieveConfig:
    """Thresholds, tolerances and confidences for the sieve.

    Unset tolerances fall back to desk defaults derived from ``theta``; with
    ``paper_defaults`` every tolerance, confidence and ``t`` follows the
    original algorithm instead (useful mostly for bookkeeping, since ``L**t``
    is then enormous).
    """

    theta: float
    m_tilde: int
    t: int | None = None
    delta_wt2: float = 0.01
    delta_wt4: float = 0.01
    delta_proj: float = 0.01
    delta_coef: float = 0.01
    wt2_error: float | None = None
    wt4_error: float | None = None
    proj_error: float | None = None
    coef_error: float | None = None
    rounding_tol: float | None = None
    paper_defaults: bool = False
    theta_exponent: int = 64

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ConfigError(f"theta must be in (0, 1], got {self.theta}")
        if self.m_tilde < 1:
            raise ConfigError("m_tilde must be >= 1")
        if self.t is not None and self.t < 1:
            raise ConfigError("t must be >= 1")
        for name in ("delta_wt2", "delta_wt4", "delta_proj", "delta_coef"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must be in (0, 1)")
        for name in ("wt2_error", "wt4_error", "proj_error", "coef_error"):
            v = getattr(self, name)
            if v is not None and not 0 < v <= 2:
                raise ConfigError(f"{name} must be in (0, 2]")

    @classmethod
    def desk(cls, theta: float, m_tilde: int, t: int | None = None, delta: float = 0.01, **kw) -> "SieveConfig":
        return cls(theta, m_tilde, t, delta, delta, delta, delta, **kw)

    @classmethod
    def paper(cls, theta: float, m_tilde: int, theta_exponent: int = 64) -> "SieveConfig":
        return cls(theta, m_tilde, paper_defaults=True, theta_exponent=theta_exponent)

    def with_(self, **kw) -> "SieveConfig":
        return replace(self, **kw)

    # thresholds are fixed by the algorithm
    @property
    def wt2_keep(self) -> float:
        return 3 * self.theta**2 / 4

    @property
    def wt4_keep(self) -> float:
        return 3 * self.theta**4 / 4

    @property
    def tolerance(self) -> float:
        return self.rounding_tol if self.rounding_tol is not None else 23 * self.theta**4 / 32

    def t_for(self, L: int) -> int:
        if self.t is not None and not self.paper_defaults:
            return self.t
        if self.paper_defaults:
            x = 100.0**4 * self.m_tilde**4 / self.theta**self.theta_exponent
        else:
            x = 100.0 * (4 / self.theta**2) ** 2
        t = _log_ceil(x, L)
        return max(t, self.t or 1)

    def sparse_t_for(self, L: int, s: int) -> int:
        if self.t is not None and not self.paper_defaults:
            return self.t
        return _log_ceil(100.0 * s * s, L)

    def _buckets(self, L: int, t: int) -> int:
        n = L**t
        if n > INDEX_LIMIT:
            raise ConfigError(f"L**t = {L}**{t} overflows the bucket index range")
        return n

    def wt2_estimator(self, L: int, t: int) -> EstimatorConfig:
        n = self._buckets(L, t)
        delta = 1 / (100 * n) if self.paper_defaults else self.delta_wt2
        err = self.theta**2 / 4 if self.paper_defaults or self.wt2_error is None else self.wt2_error
        return EstimatorConfig(err, delta)

    def wt4_estimator(self, L: int, t: int, wt2_estimate: float) -> EstimatorConfig:
        n = self._buckets(L, t)
        if self.paper_defaults:
            return EstimatorConfig(self.theta**4 / 8 * wt2_estimate, 1 / (100 * n))
        err = self.theta**4 / 4 if self.wt4_error is None else self.wt4_error
        return EstimatorConfig(err, self.delta_wt4)

    def proj_estimator(self, n_survivors: int) -> EstimatorConfig:
        if self.paper_defaults:
            return EstimatorConfig(self.theta / 2, 1 / (100 * self.m_tilde * max(1, n_survivors)))
        err = self.theta / 2 if self.proj_error is None else self.proj_error
        return EstimatorConfig(err, self.delta_proj)

    def coef_estimator(self, n_survivors: int) -> EstimatorConfig:
        if self.paper_defaults:
            return EstimatorConfig(self.theta**4 / 32, 1 / (100 * max(1, n_survivors)))
        err = self.theta**2 / 4 if self.coef_error is None else self.coef_error
        return EstimatorConfig(err, self.delta_coef)


# -- output -------------------------------------------------------------------


@dataclass
class SieveOutput:
    """Everything the sieve produced.

    ``q_exponents[i, j]`` is the exponent ``k`` of ``Q_ij = omega_L ** k``.
    ``debug_truth`` lists the true dominating element of each survivor and is
    only filled when the oracle wraps a known truth table.
    """

    group: GroupSpec
    xs: np.ndarray
    q_exponents: np.ndarray
    raw_matrix: np.ndarray
    displacement: np.ndarray
    indeterminate: np.ndarray
    f_column: np.ndarray
    survived_buckets: list[tuple[int, ...]]
    cosets: list[Coset]
    structure: CosetStructure
    t: int
    tolerance: float
    wt2_estimates: dict = field(default_factory=dict)
    wt4_estimates: dict = field(default_factory=dict)
    magnitudes: np.ndarray | None = None
    samples: dict = field(default_factory=dict)
    queries: dict = field(default_factory=dict)
    debug_truth: list[int] | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.group.lcm_L

    @property
    def n_survivors(self) -> int:
        return len(self.survived_buckets)

    @property
    def m_tilde(self) -> int:
        return len(self.xs)

    @property
    def q_matrix(self) -> list[list[RootOfUnity]]:
        return [[RootOfUnity(int(k), self.L) for k in row] for row in self.q_exponents]

    @property
    def suspect_rows(self) -> np.ndarray:
        far = np.nan_to_num(self.displacement, nan=np.inf) > self.tolerance
        return (far | self.indeterminate).any(axis=1)

    @property
    def total_queries(self) -> int:
        return sum(self.queries.values())

    def truth_columns(self) -> np.ndarray | None:
        """Exponents of ``chi_alpha(x_i)`` for the true dominating elements."""
        if self.debug_truth is None:
            return None
        g = self.group
        if not self.debug_truth:
            return np.zeros((len(self.xs), 0), dtype=np.int64)
        return g.pairing_table[np.ix_(self.xs, np.array(self.debug_truth))]


def _as_points(g: GroupSpec, M) -> np.ndarray:
    if isinstance(M, np.ndarray) and M.ndim == 1:
        return M.astype(np.int64)
    return np.array([m if isinstance(m, (int, np.integer)) else element_to_index(g, m) for m in M], dtype=np.int64)


def draw_points(g: GroupSpec, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` independent uniform element indices."""
    return rng.integers(g.order, size=m, dtype=np.int64)


def _debug_truth(oracle: QueryOracle, cosets: list[Coset]) -> list[int] | None:
    if not isinstance(oracle.target, BooleanFunction):
        return None
    table = dft(oracle.target)
    return [bucket_truth(table, c.member_indices)[0] for c in cosets]


def _wt2_stage(oracle, structure, est_cfg, rng, keep):
    buckets = structure.buckets()
    streams = rng.spawn(len(buckets))
    estimates = {}
    with oracle.stage("wt2"):
        for (label, coset), r in zip(buckets.items(), streams):
            estimates[label] = estimate_wt2(oracle, coset, est_cfg, r).value
    kept = [lab for lab, v in estimates.items() if keep(v)]
    return buckets, estimates, kept


def _projection_stage(oracle, cosets, xs, ys, est_cfg, rng):
    g = oracle.group
    m = len(xs)
    num = np.zeros((m, len(cosets)), dtype=np.complex128)
    streams = rng.spawn(len(cosets))
    queries = 0
    with oracle.stage("projection"):
        for j, (c, r) in enumerate(zip(cosets, streams)):
            pts = np.concatenate([ys, g.sub(ys, xs)])
            p = estimate_projections(oracle, c, pts, est_cfg, r)
            num[:, j] = p[:m] * np.conj(p[m:])
            queries += 2 * m * projection_queries(c, est_cfg)
    return num, queries


def _cap_survivors(kept: list, estimates: dict, theta: float, meta: dict) -> list:
    bound = math.floor(16 / theta**4)
    if len(kept) > bound:
        kept = sorted(kept, key=lambda lab: -estimates[lab])[:bound]
        kept.sort()
        meta["truncated_to_bound"] = bound
    return kept


def implicit_sieve(oracle: QueryOracle, M, config: SieveConfig, rng: np.random.Generator) -> SieveOutput:
    """Sieve out the heavy characters of ``f`` and evaluate them implicitly on ``M``."""
    g = oracle.group
    xs = _as_points(g, M)
    if len(xs) != config.m_tilde:
        raise ConfigError(f"|M| = {len(xs)} but m_tilde = {config.m_tilde}")
    L = g.lcm_L
    t = config.t_for(L)
    wt2_cfg = config.wt2_estimator(L, t)
    r_struct, r_wt2, r_wt4, r_y, r_proj, r_coef = rng.spawn(6)
    meta: dict = {"variant": "general", "paper_defaults": config.paper_defaults}
    start = dict(oracle.ledger)

    structure = random_coset_structure(g, t, r_struct)
    buckets, wt2_est, kept = _wt2_stage(oracle, structure, wt2_cfg, r_wt2, lambda v: v >= config.wt2_keep)

    wt4_est = {}
    wt4_samples = []
    with oracle.stage("wt4"):
        for label, r in zip(kept, r_wt4.spawn(len(kept))):
            cfg4 = config.wt4_estimator(L, t, wt2_est[label])
            wt4_samples.append(cfg4.samples)
            wt4_est[label] = estimate_wt4(oracle, buckets[label], cfg4, r).value
    kept = [lab for lab in kept if wt4_est[lab] >= config.wt4_keep]
    kept = _cap_survivors(kept, wt2_est, config.theta, meta)
    cosets = [buckets[lab] for lab in kept]

    ys = draw_points(g, len(xs), r_y)
    proj_cfg = config.proj_estimator(len(cosets))
    num, _ = _projection_stage(oracle, cosets, xs, ys, proj_cfg, r_proj)

    coef_cfg = config.coef_estimator(len(cosets))
    mags = np.zeros(len(cosets))
    with oracle.stage("coefficient"):
        for j, (c, r) in enumerate(zip(cosets, r_coef.spawn(len(cosets)))):
            mags[j] = estimate_wt2(oracle, c, coef_cfg, r).value
    # a nonpositive magnitude estimate would flip phases; fall back to |num|
    denom = np.where(mags > TINY, mags, 1.0)[None, :]
    raw = np.where(mags[None, :] > TINY, num / denom, num / np.maximum(np.abs(num), TINY))
    if (mags <= TINY).any():
        meta["nonpositive_magnitude_columns"] = [int(j) for j in np.flatnonzero(mags <= TINY)]

    with oracle.stage("labels"):
        f_col = oracle.query(xs).astype(np.int8)

    exps, disp, bad = round_to_roots(raw, L)
    return SieveOutput(
        group=g,
        xs=xs,
        q_exponents=exps.reshape(len(xs), len(cosets)),
        raw_matrix=raw,
        displacement=disp.reshape(len(xs), len(cosets)),
        indeterminate=bad.reshape(len(xs), len(cosets)),
        f_column=f_col,
        survived_buckets=kept,
        cosets=cosets,
        structure=structure,
        t=t,
        tolerance=config.tolerance,
        wt2_estimates=wt2_est,
        wt4_estimates=wt4_est,
        magnitudes=mags,
        samples={
            "wt2": wt2_cfg.samples,
            "wt4": wt4_samples,
            "projection": [projection_queries(c, proj_cfg) for c in cosets],
            "coefficient": coef_cfg.samples,
            # per-estimate sizes as configured, whether or not any bucket survived
            "wt4_n": config.wt4_estimator(L, t, config.wt2_keep).samples,
            "projection_n": proj_cfg.samples,
            "n_buckets": len(buckets),
        },
        queries=_ledger_delta(start, oracle.ledger, ("wt2", "wt4", "projection", "coefficient", "labels")),
        debug_truth=_debug_truth(oracle, cosets),
        metadata=meta,
    )


def sparse_implicit_sieve(
    oracle: QueryOracle, M, s: int, config: SieveConfig, rng: np.random.Generator
) -> SieveOutput:
    """Sieve for an ``s``-sparse ``f``: no fourth-moment stage, phase-normalized ``Q``.

    Sparsity of ``f`` is promised, not checked.
    """
    if s < 1:
        raise ConfigError("sparsity s must be >= 1")
    g = oracle.group
    xs = _as_points(g, M)
    if len(xs) != config.m_tilde:
        raise ConfigError(f"|M| = {len(xs)} but m_tilde = {config.m_tilde}")
    L = g.lcm_L
    t = config.sparse_t_for(L, s)
    config._buckets(L, t)
    err = config.theta**2 / 4 if config.paper_defaults or config.wt2_error is None else config.wt2_error
    delta = 1 / (100 * s * s) if config.paper_defaults else config.delta_wt2
    wt2_cfg = EstimatorConfig(err, delta)
    r_struct, r_wt2, r_y, r_proj = rng.spawn(4)
    meta: dict = {"variant": "sparse", "sparsity_promised": s, "paper_defaults": config.paper_defaults}
    start = dict(oracle.ledger)

    structure = random_coset_structure(g, t, r_struct)
    keep = config.theta**2 / 2
    buckets, wt2_est, kept = _wt2_stage(oracle, structure, wt2_cfg, r_wt2, lambda v: v > keep)
    kept = _cap_survivors(kept, wt2_est, config.theta, meta)
    cosets = [buckets[lab] for lab in kept]

    ys = draw_points(g, len(xs), r_y)
    if config.paper_defaults:
        proj_cfg = EstimatorConfig(config.theta / 2, 1 / (100 * len(xs) * max(1, len(cosets))))
    else:
        proj_cfg = config.proj_estimator(len(cosets))
    num, _ = _projection_stage(oracle, cosets, xs, ys, proj_cfg, r_proj)
    raw = num / np.maximum(np.abs(num), TINY)
    raw = np.where(np.abs(num) < TINY, 0, raw)

    with oracle.stage("labels"):
        f_col = oracle.query(xs).astype(np.int8)

    exps, disp, bad = round_to_roots(raw, L)
    return SieveOutput(
        group=g,
        xs=xs,
        q_exponents=exps.reshape(len(xs), len(cosets)),
        raw_matrix=raw,
        displacement=disp.reshape(len(xs), len(cosets)),
        indeterminate=bad.reshape(len(xs), len(cosets)),
        f_column=f_col,
        survived_buckets=kept,
        cosets=cosets,
        structure=structure,
        t=t,
        tolerance=config.tolerance,
        wt2_estimates=wt2_est,
        samples={
            "wt2": wt2_cfg.samples,
            "wt4": [],
            "projection": [projection_queries(c, proj_cfg) for c in cosets],
            "wt4_n": 0,
            "projection_n": proj_cfg.samples,
            "n_buckets": len(buckets),
        },
        queries=_ledger_delta(start, oracle.ledger, ("wt2", "wt4", "projection", "labels")),
        debug_truth=_debug_truth(oracle, cosets),
        metadata=meta,
    )


def _ledger_delta(before: dict, after: dict, stages) -> dict:
    return {s: after.get(s, 0) - before.get(s, 0) for s in stages}


def expected_sieve_queries(out: SieveOutput) -> dict:
    """Closed-form per-stage query counts implied by the recorded sample sizes."""
    s = out.samples
    m = out.m_tilde
    res = {
        "wt2": 2 * s["wt2"] * s["n_buckets"],
        "wt4": 4 * sum(s["wt4"]),
        "projection": 2 * m * sum(s["projection"]),
        "labels": m,
    }
    if "coefficient" in s:
        res["coefficient"] = 2 * s["coefficient"] * out.n_survivors
    return res


def paper_query_bound(theta: float, m_tilde: int, L: int, n_survivors: int | None = None, theta_exponent: int = 64) -> dict:
    """Per-stage query counts under the original constants, charging all ``L**t`` buckets.

    ``n_survivors`` defaults to the Parseval bound ``16 / theta**4``.  Only
    ``theta``, ``m_tilde`` and ``L`` enter, never ``|G|``.  Counts are exact
    Python integers even when ``L**t`` exceeds 64 bits.
    """
    cfg = SieveConfig.paper(theta, m_tilde, theta_exponent)
    t = cfg.t_for(L)
    n_b = L**t
    n_s = n_survivors if n_survivors is not None else math.floor(16 / theta**4)
    n2 = sample_count(theta**2 / 4, 1 / (100 * n_b))
    # wt4 error scales with the wt2 estimate; charge its smallest surviving value
    n4 = sample_count(theta**4 / 8 * (3 * theta**2 / 4), 1 / (100 * n_b))
    n_p = sample_count(theta / 2, 1 / (100 * m_tilde * max(1, n_s)))
    n_c = sample_count(theta**4 / 32, 1 / (100 * max(1, n_s)))
    return {
        "t": t,
        "wt2": 2 * n2 * n_b,
        "wt4": 4 * n4 * n_b,
        "projection": 2 * m_tilde * n_p * n_s,
        "coefficient": 2 * n_c * n_s,
        "labels": m_tilde,
        "samples": {"wt2": n2, "wt4": n4, "projection": n_p, "coefficient": n_c},
    }


# -- Goldreich-Levin over G ---------------------------------------------------


@dataclass(frozen=True)
class GLConfig:
    delta: float = 0.01

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError("delta must be in (0, 1)")


@dataclass
class GLResult:
    survivors: list[tuple[tuple[int, ...], float]]
    level_sizes: list[int]
    samples: int
    queries: int
    trimmed: int = 0

    @property
    def max_worklist(self) -> int:
        return max(self.level_sizes, default=0)

    def support(self, g: GroupSpec) -> set[tuple[int, ...]]:
        return {p for p, _ in self.survivors if len(p) == g.rank}


def gl_prefix_search(oracle: QueryOracle, eta: float, config: GLConfig, rng: np.random.Generator) -> GLResult:
    """Refine coordinate-prefix buckets one coordinate at a time.

    Each child bucket's weight is estimated to ``eta**2 / 4``; estimates at or
    below ``eta**2 / 2`` are discarded.  The worklist is held to ``4 / eta**2``
    buckets, dropping the lightest estimates if noise ever pushes it past.
    """
    if not 0 < eta <= 2:
        raise ConfigError(f"eta must be in (0, 2], got {eta}")
    g = oracle.group
    est = EstimatorConfig(min(2.0, eta**2 / 4), config.delta)
    bound = math.floor(4 / eta**2)
    work: list[tuple[tuple[int, ...], float]] = [((), 1.0)]
    sizes = []
    trimmed = 0
    start = oracle.count
    with oracle.stage("gl"):
        for level, q in enumerate(g.moduli):
            children = [(p + (i,),) for p, _ in work for i in range(q)]
            streams = rng.spawn(len(children))
            nxt = []
            for (prefix,), r in zip(children, streams):
                v = estimate_wt2(oracle, prefix_coset(g, prefix), est, r).value
                if v > eta**2 / 2:
                    nxt.append((prefix, v))
            if len(nxt) > bound:
                trimmed += len(nxt) - bound
                nxt = sorted(sorted(nxt, key=lambda pv: -pv[1])[:bound])
            work = nxt
            sizes.append(len(work))
            if not work:
                break
    return GLResult(work, sizes, est.samples, oracle.count - start, trimmed)
