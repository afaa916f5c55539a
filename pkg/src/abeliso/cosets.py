"""Constraint subgroups, annihilators, random coset structures, and
pseudo-independence search.

Everything here is exhaustive over the group, which is the intended regime
(groups of at most a few thousand elements).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import NotASubgroup, SearchCapExceeded, ShapeError
from .group import GroupElement, GroupSpec, element_to_index, index_to_element

DEFAULT_SEARCH_CAP = 2_000_000


def _as_indices(g: GroupSpec, elems) -> np.ndarray:
    if isinstance(elems, np.ndarray):
        return np.unique(elems.astype(np.int64))
    return np.unique(np.array([element_to_index(g, e) for e in elems], dtype=np.int64))


def _as_set(g: GroupSpec, idx: np.ndarray) -> frozenset[GroupElement]:
    return frozenset(index_to_element(g, int(i)) for i in idx)


# -- constraint subgroups -----------------------------------------------------


def _constraint_members(g: GroupSpec, rs: np.ndarray, bs: np.ndarray) -> np.ndarray:
    if len(rs) == 0:
        return np.arange(g.order, dtype=np.int64)
    vals = g.pairing_table[rs]  # (k, order)
    ok = (vals == (np.asarray(bs)[:, None] % g.lcm_L)).all(axis=0)
    return np.flatnonzero(ok)


@dataclass(frozen=True, eq=False)
class ConstraintSubgroup:
    """``V_{b, r_1..r_k} = {x : r_j * x = b_j for all j}``.

    With every ``b_j == 0`` this is a subgroup; otherwise it is empty or a coset
    of that subgroup.
    """

    group: GroupSpec
    constraints: tuple[tuple[GroupElement, int], ...]

    @cached_property
    def member_indices(self) -> np.ndarray:
        rs = np.array([element_to_index(self.group, r) for r, _ in self.constraints], dtype=np.int64)
        bs = np.array([b for _, b in self.constraints], dtype=np.int64)
        return _constraint_members(self.group, rs, bs)

    @property
    def members(self) -> frozenset[GroupElement]:
        return _as_set(self.group, self.member_indices)

    @property
    def is_homogeneous(self) -> bool:
        return all(b % self.group.lcm_L == 0 for _, b in self.constraints)


def subgroup_members(
    g: GroupSpec, constraints: Sequence[tuple[Sequence[int], int]]
) -> frozenset[GroupElement]:
    cons = tuple((g.element(r), int(b)) for r, b in constraints)
    return ConstraintSubgroup(g, cons).members


def is_subgroup_indices(g: GroupSpec, idx: np.ndarray) -> bool:
    if len(idx) == 0 or 0 not in set(idx.tolist()):
        return False
    members = np.zeros(g.order, dtype=bool)
    members[idx] = True
    diffs = g.sub(idx[:, None], idx[None, :])
    return bool(members[diffs].all())


def annihilator_indices(g: GroupSpec, h_idx: np.ndarray) -> np.ndarray:
    """Indices of ``{x : x * y = 0 for all y in H}``; no subgroup check."""
    if len(h_idx) == 0:
        return np.arange(g.order, dtype=np.int64)
    return np.flatnonzero((g.pairing_table[:, h_idx] == 0).all(axis=1))


def annihilator(g: GroupSpec, H: Iterable[Sequence[int]] | np.ndarray) -> frozenset[GroupElement]:
    """``H^perp``; raises :class:`NotASubgroup` unless ``H`` is a subgroup."""
    idx = _as_indices(g, H)
    if not is_subgroup_indices(g, idx):
        raise NotASubgroup("set does not contain 0 or is not closed under subtraction")
    return _as_set(g, annihilator_indices(g, idx))


def generated_subgroup_indices(g: GroupSpec, gens: Sequence[int]) -> np.ndarray:
    """Indices of the subgroup generated by the given element indices."""
    reached = np.zeros(g.order, dtype=bool)
    reached[0] = True
    frontier = np.array([0], dtype=np.int64)
    gens = np.asarray(list(gens), dtype=np.int64)
    while len(frontier) and len(gens):
        nxt = g.add(frontier[:, None], gens[None, :]).ravel()
        nxt = np.unique(nxt[~reached[nxt]])
        reached[nxt] = True
        frontier = nxt
    return np.flatnonzero(reached)


# -- cosets and coset structures ---------------------------------------------


@dataclass(frozen=True, eq=False)
class Coset:
    """The coset ``rep + H`` together with ``H^perp``.

    ``subgroup`` and ``perp`` hold sorted element indices.
    """

    group: GroupSpec
    rep: int
    subgroup: np.ndarray
    perp: np.ndarray

    @classmethod
    def from_subgroup(cls, g: GroupSpec, rep, subgroup_idx: np.ndarray) -> "Coset":
        if not isinstance(rep, (int, np.integer)):
            rep = element_to_index(g, rep)
        sub = np.sort(np.asarray(subgroup_idx, dtype=np.int64))
        return cls(g, int(rep), sub, annihilator_indices(g, sub))

    @classmethod
    def whole_group(cls, g: GroupSpec) -> "Coset":
        return cls.from_subgroup(g, 0, np.arange(g.order))

    @cached_property
    def member_indices(self) -> np.ndarray:
        return np.sort(self.group.add(self.rep, self.subgroup))

    @property
    def representative(self) -> GroupElement:
        return index_to_element(self.group, self.rep)

    @property
    def members(self) -> frozenset[GroupElement]:
        return _as_set(self.group, self.member_indices)

    def __contains__(self, x) -> bool:
        i = x if isinstance(x, (int, np.integer)) else element_to_index(self.group, x)
        return bool(np.isin(i, self.member_indices))


EMPTY = None  # marker returned for labels whose bucket has no members


@dataclass(frozen=True, eq=False)
class CosetStructure:
    """Random coset structure ``beta_1..beta_t`` with a nonzero shift ``u``.

    Labels are stored shifted: ``label_i(alpha) = alpha * beta_i + u_i mod L``.
    """

    group: GroupSpec
    betas: tuple[int, ...]
    shift: tuple[int, ...]

    def __post_init__(self):
        if len(self.betas) != len(self.shift):
            raise ShapeError("shift length must equal the number of betas")

    @property
    def t(self) -> int:
        return len(self.betas)

    @property
    def beta_elements(self) -> list[GroupElement]:
        return [index_to_element(self.group, b) for b in self.betas]

    @cached_property
    def labels(self) -> np.ndarray:
        """``(order, t)`` array of shifted labels for every element."""
        g = self.group
        if self.t == 0:
            return np.zeros((g.order, 0), dtype=np.int64)
        raw = g.pairing_table[:, list(self.betas)]
        return (raw + np.array(self.shift, dtype=np.int64)) % g.lcm_L

    @cached_property
    def subgroup(self) -> np.ndarray:
        """``H = {alpha : alpha * beta_i = 0 for all i}``."""
        return _constraint_members(self.group, np.array(self.betas, dtype=np.int64), np.zeros(self.t, dtype=np.int64))

    @cached_property
    def perp(self) -> np.ndarray:
        return annihilator_indices(self.group, self.subgroup)

    def bucket_of(self, alpha) -> tuple[int, ...]:
        i = alpha if isinstance(alpha, (int, np.integer)) else element_to_index(self.group, alpha)
        return tuple(int(v) for v in self.labels[i])

    @cached_property
    def _buckets(self) -> dict[tuple[int, ...], Coset]:
        out: dict[tuple[int, ...], Coset] = {}
        labels = self.labels
        keys, first = np.unique(labels, axis=0, return_index=True)
        for key, rep in zip(keys, first):
            out[tuple(int(v) for v in key)] = Coset(self.group, int(rep), self.subgroup, self.perp)
        return dict(sorted(out.items()))

    def buckets(self) -> dict[tuple[int, ...], Coset]:
        """Nonempty buckets, keyed by shifted label, in label order."""
        return dict(self._buckets)

    def bucket_coset_representation(self, label: Sequence[int]) -> Coset | None:
        return self._buckets.get(tuple(int(v) % self.group.lcm_L for v in label), EMPTY)

    def label_index(self, label: Sequence[int]) -> int:
        """Mixed-radix encoding of a label in ``[0, L**t)``."""
        idx = 0
        for v in label:
            idx = idx * self.group.lcm_L + int(v)
        return idx


def random_coset_structure(g: GroupSpec, t: int, rng: np.random.Generator) -> CosetStructure:
    if t < 1:
        raise ValueError("t must be >= 1")
    betas = tuple(int(b) for b in rng.integers(g.order, size=t))
    L = g.lcm_L
    if L == 1:
        # Z_L^t is {0}; no nonzero shift exists.
        shift = (0,) * t
    else:
        while True:
            shift = tuple(int(u) for u in rng.integers(L, size=t))
            if any(shift):
                break
    return CosetStructure(g, betas, shift)


def prefix_coset(g: GroupSpec, prefix: Sequence[int]) -> Coset:
    """Bucket ``{r : r_1 = i_1, ..., r_k = i_k}`` as a coset of ``V_{0, e_1..e_k}``."""
    k = len(prefix)
    c = g.coords
    sub = np.flatnonzero((c[:, :k] == 0).all(axis=1))
    rep = np.zeros(g.rank, dtype=np.int64)
    rep[:k] = prefix
    return Coset.from_subgroup(g, int(g.index_of(rep)), sub)


# -- pseudo-independence -------------------------------------------------------


def _units(L: int) -> np.ndarray:
    return np.array([math.gcd(v, L) == 1 for v in range(L)], dtype=bool)


def embed(g: GroupSpec, elems: Sequence[Sequence[int]]) -> np.ndarray:
    """Injective homomorphism G -> Z_L^n, ``x -> (L/q_i) x_i``.

    A Z_L-combination of elements vanishes iff the same combination of the
    embedded vectors vanishes, so dependency questions reduce to Z_L^d.
    """
    rows = [np.array(g.element(e), dtype=np.int64) * g.weights for e in elems]
    return np.array(rows, dtype=np.int64).reshape(len(rows), g.rank) % g.lcm_L


def _combos(L: int, k: int, start: int, stop: int) -> np.ndarray:
    if k == 0:
        return np.zeros((stop - start, 0), dtype=np.int64)
    return np.stack(np.unravel_index(np.arange(start, stop), (L,) * k), axis=1).astype(np.int64)


@dataclass(frozen=True)
class Dependency:
    """``sum coeffs[i] * r_i == 0`` with ``coeffs[unit_index]`` a unit mod L."""

    coeffs: tuple[int, ...]
    unit_index: int


def find_dependency(vecs: np.ndarray, L: int, cap: int = DEFAULT_SEARCH_CAP, chunk: int = 1 << 16):
    """First (lexicographic) relation with a unit coefficient, or None."""
    vecs = np.asarray(vecs, dtype=np.int64) % L
    k = len(vecs)
    total = L**k
    if k * total > cap:
        raise SearchCapExceeded(f"dependency search over Z_{L}^{k} exceeds cap {cap}")
    units = _units(L)
    for start in range(0, total, chunk):
        lam = _combos(L, k, start, min(total, start + chunk))
        zero = ((lam @ vecs) % L == 0).all(axis=1)
        has_unit = units[lam].any(axis=1)
        hits = np.flatnonzero(zero & has_unit)
        if len(hits):
            row = lam[hits[0]]
            j = int(np.flatnonzero(units[row])[0])
            return Dependency(tuple(int(v) for v in row), j)
    return None


def is_pseudo_independent(
    g: GroupSpec, elems: Sequence[Sequence[int]], cap: int = DEFAULT_SEARCH_CAP
) -> tuple[bool, Dependency | None]:
    """Returns ``(True, None)`` if independent, else ``(False, witness)``."""
    if not len(elems):
        raise ValueError("need at least one element")
    dep = find_dependency(embed(g, elems), g.lcm_L, cap)
    return dep is None, dep


@dataclass(frozen=True)
class Expression:
    """``lam * r + sum(coeffs[i] * basis_i) == 0``, i.e. ``r = -lam^{-1} sum(...)``."""

    lam: int
    coeffs: tuple[int, ...]

    def solved(self, L: int) -> tuple[int, ...]:
        """Coefficients ``c_i`` with ``r = sum c_i * basis_i``."""
        inv = pow(self.lam, -1, L)
        return tuple((-inv * c) % L for c in self.coeffs)


@dataclass
class SpanningSet:
    basis: list[int]  # positions in the input sequence
    expressions: dict[int, Expression] = field(default_factory=dict)


def minimal_spanning_vectors(vecs: np.ndarray, L: int, cap: int = DEFAULT_SEARCH_CAP) -> SpanningSet:
    """Smallest pseudo-independent subset spanning the rest with unit coefficient.

    Subsets are tried in increasing size, then in lexicographic position order.
    Raises :class:`SearchCapExceeded` when the search budget runs out.
    """
    vecs = np.asarray(vecs, dtype=np.int64) % L
    k = len(vecs)
    unit_vals = [u for u in range(L) if math.gcd(u, L) == 1]
    work = 0
    for size in range(k + 1):
        n_lam = L**size
        for subset in itertools.combinations(range(k), size):
            work += n_lam * max(1, size)
            if work > cap:
                raise SearchCapExceeded(f"spanning-set search exceeded cap {cap}")
            basis = vecs[list(subset)]
            if size and find_dependency(basis, L, cap) is not None:
                continue
            lam = _combos(L, size, 0, n_lam)
            sums = (lam @ basis) % L if size else np.zeros((1, vecs.shape[1]), dtype=np.int64)
            table: dict[bytes, int] = {}
            for row in range(len(sums) - 1, -1, -1):
                table[sums[row].tobytes()] = row
            exprs: dict[int, Expression] = {}
            for j in range(k):
                if j in subset:
                    continue
                for u in unit_vals:
                    target = (-u * vecs[j]) % L
                    row = table.get(target.tobytes())
                    if row is not None:
                        exprs[j] = Expression(u, tuple(int(v) for v in lam[row]))
                        break
                else:
                    break
            if len(exprs) == k - size:
                return SpanningSet(list(subset), exprs)
    raise SearchCapExceeded("no spanning set found")  # pragma: no cover - full set always spans


def minimal_spanning_set(
    g: GroupSpec, cols: Sequence[Sequence[int]], cap: int = DEFAULT_SEARCH_CAP
) -> SpanningSet:
    if not len(cols):
        raise ValueError("need at least one column")
    return minimal_spanning_vectors(embed(g, cols), g.lcm_L, cap)
