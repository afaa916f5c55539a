"""Aut(G) by generator-image search, double-dual maps, and the exact
automorphism distance."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import GroupTooLarge, ShapeError
from .fourier import BooleanFunction, FourierTable, hamming_distance
from .group import GroupElement, GroupSpec, element_to_index, index_to_element

MAX_GROUP_ORDER = 64
MAX_AUTOMORPHISMS = 100_000


@dataclass(frozen=True, eq=False)
class Automorphism:
    """Bijective homomorphism given by the images of e_1..e_n.

    ``perm[x] == A(x)`` on element indices.
    """

    group: GroupSpec
    perm: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64)
        if p.shape != (self.group.order,) or len(np.unique(p)) != self.group.order:
            raise ValueError("automorphism map must be a permutation of the group")
        p.flags.writeable = False
        object.__setattr__(self, "perm", p)

    @classmethod
    def from_images(cls, g: GroupSpec, images) -> "Automorphism":
        """Extend generator images additively; raises if not bijective."""
        imgs = np.array([i if isinstance(i, (int, np.integer)) else _idx(g, i) for i in images], dtype=np.int64)
        if len(imgs) != g.rank:
            raise ShapeError(f"need {g.rank} generator images, got {len(imgs)}")
        acc = np.zeros(g.order, dtype=np.int64)
        c = g.coords
        for i in range(g.rank):
            acc = g.add(acc, g.scale(np.full(g.order, imgs[i]), c[:, i]))
        auto = cls(g, acc)
        if not auto.is_homomorphism():
            raise ValueError("generator images do not define a homomorphism")
        return auto

    @classmethod
    def identity(cls, g: GroupSpec) -> "Automorphism":
        return cls(g, np.arange(g.order))

    @property
    def generator_images(self) -> list[GroupElement]:
        return [index_to_element(self.group, int(self.perm[e])) for e in self.group.generators]

    def __call__(self, x):
        if isinstance(x, (int, np.integer)):
            return int(self.perm[x])
        return index_to_element(self.group, int(self.perm[_idx(self.group, x)]))

    def __eq__(self, other) -> bool:
        return isinstance(other, Automorphism) and other.group == self.group and np.array_equal(other.perm, self.perm)

    def __hash__(self) -> int:
        return hash((self.group, self.perm.tobytes()))

    def is_homomorphism(self) -> bool:
        g = self.group
        a = np.arange(g.order)
        lhs = self.perm[g.add(a[:, None], a[None, :])]
        rhs = g.add(self.perm[:, None], self.perm[None, :])
        return bool((lhs == rhs).all())

    def is_identity(self) -> bool:
        return bool((self.perm == np.arange(self.group.order)).all())

    @cached_property
    def double_dual(self) -> "Automorphism":
        return dual_double(self.group, self)


def _idx(g: GroupSpec, x) -> int:
    return element_to_index(g, x)


def _check(g: GroupSpec, *autos: Automorphism):
    for a in autos:
        if a.group != g:
            raise ShapeError(f"automorphism of {a.group} used on {g}")


def compose(a: Automorphism, b: Automorphism) -> Automorphism:
    """``a o b``: first ``b``, then ``a``."""
    _check(a.group, b)
    return Automorphism(a.group, a.perm[b.perm])


def invert(a: Automorphism) -> Automorphism:
    inv = np.empty_like(a.perm)
    inv[a.perm] = np.arange(len(a.perm))
    return Automorphism(a.group, inv)


def apply(a: Automorphism, f: BooleanFunction) -> BooleanFunction:
    """``f o A``."""
    _check(f.group, a)
    return BooleanFunction(f.group, f.values[a.perm])


def dual_double(g: GroupSpec, a: Automorphism) -> Automorphism:
    """The map ``r -> r'`` with ``chi_{r'}(x) = chi_r(A(x))`` for every ``x``.

    ``r'`` is pinned down by its pairings with the canonical generators:
    ``r' * e_i = (L / q_i) r'_i``.
    """
    _check(g, a)
    r = np.arange(g.order)
    cols = []
    for i, e in enumerate(g.generators):
        p = g.pair(r, int(a.perm[e]))
        cols.append(p // g.weights[i])
    coords = np.stack(cols, axis=1) if cols else np.zeros((g.order, 0), dtype=np.int64)
    return Automorphism(g, g.index_of(coords))


@lru_cache(maxsize=32)
def _enumerate(g: GroupSpec, max_auts: int) -> tuple[Automorphism, ...]:
    candidates = []
    for q in g.moduli:
        # image of e_i must have order dividing q_i
        ok = (g.scale(np.arange(g.order), np.full(g.order, q)) == 0)
        candidates.append(np.flatnonzero(ok))

    found: list[np.ndarray] = []

    def extend(k: int, dom: np.ndarray, img: np.ndarray):
        if k == g.rank:
            perm = np.empty(g.order, dtype=np.int64)
            perm[dom] = img
            found.append(perm)
            if len(found) > max_auts:
                raise GroupTooLarge(f"|Aut(G)| exceeds cap {max_auts}")
            return
        q, s = g.moduli[k], g.strides[k]
        steps = np.arange(q, dtype=np.int64)
        new_dom = (dom[:, None] + steps[None, :] * s).ravel()
        for y in candidates[k]:
            multiples = g.scale(np.full(q, y), steps)
            new_img = g.add(img[:, None], multiples[None, :]).ravel()
            if len(np.unique(new_img)) == len(new_img):
                extend(k + 1, new_dom, new_img)

    extend(0, np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64))
    return tuple(Automorphism(g, p) for p in found)


def enumerate_automorphisms(
    g: GroupSpec, cap: int = MAX_GROUP_ORDER, max_auts: int = MAX_AUTOMORPHISMS
) -> list[Automorphism]:
    """All of Aut(G); raises :class:`GroupTooLarge` beyond the caps."""
    if g.order > cap:
        raise GroupTooLarge(f"|G| = {g.order} exceeds cap {cap}")
    return list(_enumerate(g, max_auts))


def automorphism_table(autos: list[Automorphism]) -> np.ndarray:
    """``(|Aut|, |G|)`` stack of permutations."""
    return np.stack([a.perm for a in autos]) if autos else np.zeros((0, 0), dtype=np.int64)


def permute_coefficients(t: FourierTable, a: Automorphism) -> FourierTable:
    """Coefficients of ``f o A`` from those of ``f``."""
    _check(t.group, a)
    d = invert(a).double_dual
    return FourierTable(t.group, t.coeffs[d.perm])


def exact_automorphism_distance(
    f: BooleanFunction, g: BooleanFunction, cap: int = MAX_GROUP_ORDER, max_auts: int = MAX_AUTOMORPHISMS
) -> tuple[float, Automorphism]:
    """``min_A delta(f, g o A)`` and a minimizing ``A`` (first in enumeration order)."""
    if f.group != g.group:
        raise ShapeError("functions live on different groups")
    autos = enumerate_automorphisms(f.group, cap, max_auts)
    perms = automorphism_table(autos)
    dists = (g.values[perms] != f.values[None, :]).mean(axis=1)
    k = int(np.argmin(dists))
    assert abs(hamming_distance(f, apply(autos[k], g)) - dists[k]) < 1e-12
    return float(dists[k]), autos[k]
