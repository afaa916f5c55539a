"""Finite Abelian groups Z_{p1^m1} x ... x Z_{pn^mn} and their characters.

Elements are plain tuples of residues.  Internally most code works on
element *indices* in mixed-radix order with the most significant factor
first, so ``index = sum(coords[i] * strides[i])`` and ``strides[-1] == 1``.

Characters are handled exactly: ``chi_r(x) = omega_L ** (r * x)`` where
``r * x`` is the pseudo inner product in Z_L and ``omega_L = exp(2 pi i / L)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidGroup, ShapeError

GroupElement = tuple[int, ...]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class RootOfUnity:
    """``omega_L ** exponent``, kept as an exact exponent in Z_L."""

    exponent: int
    L: int

    def __post_init__(self):
        object.__setattr__(self, "exponent", self.exponent % self.L)

    def __mul__(self, other: "RootOfUnity") -> "RootOfUnity":
        if other.L != self.L:
            raise ShapeError(f"roots of different orders: {self.L} vs {other.L}")
        return RootOfUnity(self.exponent + other.exponent, self.L)

    def __pow__(self, k: int) -> "RootOfUnity":
        return RootOfUnity(self.exponent * k, self.L)

    def conjugate(self) -> "RootOfUnity":
        return RootOfUnity(-self.exponent, self.L)

    def __complex__(self) -> complex:
        return complex(np.exp(2j * np.pi * self.exponent / self.L))

    @property
    def value(self) -> complex:
        return complex(self)


@dataclass(frozen=True)
class GroupSpec:
    """The group prod Z_{p_i^{m_i}}; build it with :func:`build_group`."""

    factors: tuple[tuple[int, int], ...]
    moduli: tuple[int, ...] = field(init=False)
    order: int = field(init=False)
    lcm_L: int = field(init=False)
    strides: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        moduli = tuple(p**m for p, m in self.factors)
        strides = []
        acc = 1
        for q in reversed(moduli):
            strides.append(acc)
            acc *= q
        object.__setattr__(self, "moduli", moduli)
        object.__setattr__(self, "order", math.prod(moduli))
        object.__setattr__(self, "lcm_L", reduce(math.lcm, moduli, 1))
        object.__setattr__(self, "strides", tuple(reversed(strides)))

    @property
    def L(self) -> int:
        return self.lcm_L

    @property
    def rank(self) -> int:
        return len(self.moduli)

    def __repr__(self) -> str:
        if not self.moduli:
            return "GroupSpec(trivial)"
        return "GroupSpec(" + " x ".join(f"Z_{q}" for q in self.moduli) + ")"

    def label(self) -> str:
        return "x".join(f"Z{q}" for q in self.moduli) or "Z1"

    # -- vectorized tables -------------------------------------------------

    @cached_property
    def weights(self) -> np.ndarray:
        """``L / p_i^{m_i}`` per coordinate."""
        return np.array([self.lcm_L // q for q in self.moduli], dtype=np.int64)

    @cached_property
    def _moduli_arr(self) -> np.ndarray:
        return np.array(self.moduli, dtype=np.int64)

    @cached_property
    def _strides_arr(self) -> np.ndarray:
        return np.array(self.strides, dtype=np.int64)

    @cached_property
    def coords(self) -> np.ndarray:
        """``(order, rank)`` array of coordinates in enumeration order."""
        idx = np.arange(self.order, dtype=np.int64)
        if self.rank == 0:
            return np.zeros((self.order, 0), dtype=np.int64)
        return (idx[:, None] // self._strides_arr) % self._moduli_arr

    @cached_property
    def pairing_table(self) -> np.ndarray:
        """``pairing_table[r, x] = r * x`` for all element indices."""
        c = self.coords
        return ((c * self.weights) @ c.T) % self.lcm_L

    @cached_property
    def generators(self) -> tuple[int, ...]:
        """Indices of the canonical generators e_1..e_n."""
        return tuple(int(s) for s in self.strides)

    # -- index arithmetic (arrays of element indices) ------------------------

    def index_of(self, coords: np.ndarray) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64) % self._moduli_arr
        return c @ self._strides_arr

    def add(self, a, b) -> np.ndarray:
        return self.index_of(self.coords[a] + self.coords[b])

    def sub(self, a, b) -> np.ndarray:
        return self.index_of(self.coords[a] - self.coords[b])

    def neg(self, a) -> np.ndarray:
        return self.index_of(-self.coords[a])

    def scale(self, a, k) -> np.ndarray:
        return self.index_of(self.coords[a] * np.asarray(k, dtype=np.int64)[..., None])

    def pair(self, a, b) -> np.ndarray:
        """Pseudo inner product of index arrays, broadcast elementwise."""
        return (self.coords[a] * self.coords[b] * self.weights).sum(axis=-1) % self.lcm_L

    def element_order(self, a: int) -> int:
        c = self.coords[a]
        return reduce(math.lcm, (q // math.gcd(int(x), q) for x, q in zip(c, self.moduli)), 1)

    def root_values(self, exponents) -> np.ndarray:
        """``omega_L ** e`` as complex numbers."""
        return np.exp(2j * np.pi * np.asarray(exponents) / self.lcm_L)

    # -- element-level helpers ----------------------------------------------

    def element(self, x: Iterable[int]) -> GroupElement:
        x = tuple(int(v) for v in x)
        if len(x) != self.rank:
            raise ShapeError(f"element {x} has {len(x)} coordinates, group has {self.rank}")
        return tuple(v % q for v, q in zip(x, self.moduli))

    def zero(self) -> GroupElement:
        return (0,) * self.rank

    def elements(self) -> list[GroupElement]:
        return [tuple(int(v) for v in row) for row in self.coords]


def build_group(moduli: Sequence[tuple[int, int]]) -> GroupSpec:
    """Build ``prod Z_{p^m}`` from ``[(p, m), ...]``.

    An empty sequence is rejected; the trivial group comes from
    :func:`trivial_group`.
    """
    factors = [tuple(int(v) for v in pm) for pm in moduli]
    if not factors:
        raise InvalidGroup("group needs at least one cyclic factor")
    for pm in factors:
        if len(pm) != 2:
            raise InvalidGroup(f"factor {pm} is not a (prime, exponent) pair")
        p, m = pm
        if not _is_prime(p):
            raise InvalidGroup(f"{p} is not prime")
        if m < 1:
            raise InvalidGroup(f"exponent {m} must be >= 1")
    return GroupSpec(tuple(factors))


def trivial_group() -> GroupSpec:
    """The group of order 1 (no cyclic factors)."""
    return GroupSpec(())


def parse_group(text: str) -> GroupSpec:
    """Parse ``"2^2,3"`` or ``"4,3"`` (prime-power moduli) into a group."""
    factors = []
    for tok in text.replace("x", ",").split(","):
        tok = tok.strip().lstrip("Z")
        if not tok:
            continue
        if "^" in tok:
            p, m = tok.split("^")
            factors.append((int(p), int(m)))
        else:
            q = int(tok)
            factors.append(_prime_power(q))
    return build_group(factors)


def _prime_power(q: int) -> tuple[int, int]:
    if q < 2:
        raise InvalidGroup(f"modulus {q} is not a prime power")
    p = next(d for d in range(2, q + 1) if q % d == 0)
    m = 0
    while q % p == 0:
        q //= p
        m += 1
    if q != 1:
        raise InvalidGroup(f"modulus is not a prime power (factor {p} and cofactor {q})")
    return p, m


def pseudo_inner(g: GroupSpec, r: Sequence[int], x: Sequence[int]) -> int:
    """``sum_i (L / p_i^{m_i}) r_i x_i mod L``."""
    r = g.element(r)
    x = g.element(x)
    return sum(w * a * b for w, a, b in zip(g.weights.tolist(), r, x)) % g.lcm_L


def character_eval(g: GroupSpec, r: Sequence[int], x: Sequence[int]) -> RootOfUnity:
    return RootOfUnity(pseudo_inner(g, r, x), g.lcm_L)


def element_combine(
    g: GroupSpec, a: Sequence[int], b: Sequence[int], scalar_a: int = 1, scalar_b: int = 1
) -> GroupElement:
    a = g.element(a)
    b = g.element(b)
    return tuple((scalar_a * u + scalar_b * v) % q for u, v, q in zip(a, b, g.moduli))


def index_to_element(g: GroupSpec, i: int) -> GroupElement:
    if not 0 <= i < g.order:
        raise IndexError(f"index {i} out of range for group of order {g.order}")
    return tuple((i // s) % q for s, q in zip(g.strides, g.moduli))


def element_to_index(g: GroupSpec, x: Sequence[int]) -> int:
    x = g.element(x)
    return sum(v * s for v, s in zip(x, g.strides))


def sample_uniform(g: GroupSpec, rng: np.random.Generator) -> GroupElement:
    return tuple(int(rng.integers(q)) for q in g.moduli)


def sample_indices(g: GroupSpec, rng: np.random.Generator, size) -> np.ndarray:
    """Uniform element indices, vectorized."""
    return rng.integers(g.order, size=size, dtype=np.int64)
