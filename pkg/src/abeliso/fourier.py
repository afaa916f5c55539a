"""Exact (brute-force) Fourier analysis over a finite Abelian group.

This is the trusted reference layer: the transform is the direct
``O(|G|^2)`` sum, never an FFT.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cosets import Coset
from .errors import PartitionError, ShapeError
from .group import GroupElement, GroupSpec, element_to_index, index_to_element

ZERO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BooleanFunction:
    """A +-1 valued function on ``group``, values in enumeration order."""

    group: GroupSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.group.order,):
            raise ShapeError(f"expected {self.group.order} values, got shape {v.shape}")
        if not np.isin(v, (-1, 1)).all():
            raise ValueError("Boolean function values must be -1 or +1")
        v = v.astype(np.int8)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __call__(self, x) -> int:
        i = x if isinstance(x, (int, np.integer)) else element_to_index(self.group, x)
        return int(self.values[i])

    def __neg__(self) -> "BooleanFunction":
        return BooleanFunction(self.group, -self.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BooleanFunction)
            and other.group == self.group
            and np.array_equal(other.values, self.values)
        )

    __hash__ = None

    @classmethod
    def constant(cls, g: GroupSpec, value: int = 1) -> "BooleanFunction":
        return cls(g, np.full(g.order, value, dtype=np.int8))


@dataclass(frozen=True, eq=False)
class FourierTable:
    """Coefficients ``coeffs[index(r)] = f_hat(chi_r)``."""

    group: GroupSpec
    coeffs: np.ndarray

    def __getitem__(self, r) -> complex:
        i = r if isinstance(r, (int, np.integer)) else element_to_index(self.group, r)
        return complex(self.coeffs[i])

    def support(self, tol: float = ZERO_TOL) -> np.ndarray:
        return np.flatnonzero(np.abs(self.coeffs) > tol)


@lru_cache(maxsize=16)
def character_matrix(g: GroupSpec) -> np.ndarray:
    """``M[r, x] = chi_r(x)``."""
    m = g.root_values(g.pairing_table)
    m.flags.writeable = False
    return m


def _values(f, g: GroupSpec | None = None) -> tuple[GroupSpec, np.ndarray]:
    if isinstance(f, BooleanFunction):
        return f.group, f.values.astype(np.float64)
    if g is None:
        raise ShapeError("raw value arrays need an explicit group")
    v = np.asarray(f)
    if v.shape != (g.order,):
        raise ShapeError(f"expected {g.order} values, got shape {v.shape}")
    return g, v


def dft(f, group: GroupSpec | None = None) -> FourierTable:
    """``f_hat(chi_r) = |G|^-1 sum_x f(x) conj(chi_r(x))``."""
    g, v = _values(f, group)
    coeffs = character_matrix(g).conj() @ v / g.order
    return FourierTable(g, coeffs)


def idft(t: FourierTable) -> np.ndarray:
    """``f(x) = sum_r f_hat(chi_r) chi_r(x)``; complex values."""
    return character_matrix(t.group).T @ t.coeffs


def spectral_norm(t: FourierTable) -> float:
    return float(np.abs(t.coeffs).sum())


def sparsity(t: FourierTable, tol: float = ZERO_TOL) -> int:
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return int((np.abs(t.coeffs) > tol).sum())


def _partition_labels(g: GroupSpec, partition) -> np.ndarray:
    """Normalize a partition into an array of bucket ids, one per element."""
    if isinstance(partition, Mapping):
        out = np.full(g.order, -1, dtype=np.int64)
        keys = list(partition)
        for k, key in enumerate(keys):
            members = partition[key]
            if isinstance(members, Coset):
                idx = members.member_indices
            elif isinstance(members, np.ndarray):
                idx = members.astype(np.int64)
            else:
                idx = np.array([element_to_index(g, m) for m in members], dtype=np.int64)
            if (out[idx] != -1).any():
                raise PartitionError(f"bucket {key!r} overlaps an earlier bucket")
            out[idx] = k
        if (out == -1).any():
            raise PartitionError("partition does not cover the group")
        return out
    arr = np.asarray(partition)
    if arr.shape[0] != g.order:
        raise PartitionError("label array must have one entry per element")
    return arr


def exact_bucket_weights(t: FourierTable, partition) -> dict:
    """``{bucket: (wt2, wt4)}`` from exact coefficients.

    ``partition`` is either a mapping ``bucket -> members`` (sets of elements,
    index arrays, or :class:`Coset`) or a per-element label array of length
    ``|G|`` (2-D label arrays are grouped by row).
    """
    g = t.group
    mag2 = np.abs(t.coeffs) ** 2
    out = {}
    if isinstance(partition, Mapping):
        ids = _partition_labels(g, partition)
        for k, key in enumerate(partition):
            sel = ids == k
            out[key] = (float(mag2[sel].sum()), float((mag2[sel] ** 2).sum()))
        return out
    labels = _partition_labels(g, partition)
    flat = labels.reshape(g.order, -1)
    keys, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for k, key in enumerate(keys):
        sel = inverse == k
        label = tuple(int(v) for v in key) if labels.ndim > 1 else int(key[0])
        out[label] = (float(mag2[sel].sum()), float((mag2[sel] ** 2).sum()))
    return out


def exact_projection(f, coset: Coset, x, method: str = "spectral") -> complex:
    """``P_C f(x)`` for the coset ``C = r + H``.

    ``method="spectral"`` sums ``f_hat(beta) chi_beta(x)`` over the coset;
    ``method="average"`` is the exact mean of ``f(x - z) chi_r(z)`` over
    ``z in H^perp``.  The two agree to rounding.
    """
    g = coset.group
    _, v = _values(f, g)
    xi = x if isinstance(x, (int, np.integer)) else element_to_index(g, x)
    if method == "spectral":
        t = dft(v, g)
        members = coset.member_indices
        return complex((t.coeffs[members] * g.root_values(g.pair(members, xi))).sum())
    if method == "average":
        z = coset.perp
        vals = v[g.sub(xi, z)] * g.root_values(g.pair(coset.rep, z))
        return complex(vals.mean())
    raise ValueError(f"unknown method {method!r}")


def projection_function(f, coset: Coset) -> np.ndarray:
    """``P_C f`` at every point, via the spectral formula."""
    g = coset.group
    t = dft(_values(f, g)[1], g)
    mask = np.zeros(g.order)
    mask[coset.member_indices] = 1.0
    return idft(FourierTable(g, t.coeffs * mask))


def _check_same_group(f: BooleanFunction, g: BooleanFunction):
    if f.group != g.group:
        raise ShapeError(f"functions live on different groups: {f.group} vs {g.group}")


def correlation(f: BooleanFunction, g: BooleanFunction) -> float:
    """``E_x[f(x) g(x)]`` evaluated pointwise."""
    _check_same_group(f, g)
    return float((f.values.astype(np.int64) * g.values).mean())


def spectral_correlation(f: BooleanFunction, g: BooleanFunction) -> float:
    """``sum_r f_hat(r) conj(g_hat(r))``; equals :func:`correlation` by Parseval."""
    _check_same_group(f, g)
    return float(np.real(np.vdot(dft(g).coeffs, dft(f).coeffs)))


def hamming_distance(f: BooleanFunction, g: BooleanFunction) -> float:
    """Fraction of points where ``f`` and ``g`` disagree."""
    _check_same_group(f, g)
    return float((f.values != g.values).mean())


def indicator_function(g: GroupSpec, subset: Iterable[Sequence[int]] | np.ndarray) -> BooleanFunction:
    """``-1`` on ``subset`` and ``+1`` elsewhere."""
    values = np.ones(g.order, dtype=np.int8)
    if isinstance(subset, np.ndarray):
        idx = subset.astype(np.int64)
    else:
        idx = np.array([element_to_index(g, s) for s in subset], dtype=np.int64)
    values[idx] = -1
    return BooleanFunction(g, values)


def bucket_truth(t: FourierTable, members: np.ndarray) -> tuple[int, float]:
    """Dominating element of a bucket and its coefficient magnitude."""
    mags = np.abs(t.coeffs[members])
    k = int(np.argmax(mags))
    return int(members[k]), float(mags[k])


def heavy_set(t: FourierTable, threshold: float) -> set[GroupElement]:
    return {index_to_element(t.group, int(i)) for i in np.flatnonzero(np.abs(t.coeffs) >= threshold)}
