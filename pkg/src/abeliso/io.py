"""Function files, report serialization, and synthetic function generators."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .automorphisms import Automorphism, apply, enumerate_automorphisms
from .cosets import ConstraintSubgroup
from .errors import AbelisoError, ShapeError
from .fourier import BooleanFunction, FourierTable, idft
from .group import GroupSpec, build_group, element_to_index, index_to_element

FORMAT = "abeliso-function/1"
ENUMERATION = "mixed-radix-msf"
BOOLEAN_TOL = 1e-6


class FileFormatError(AbelisoError):
    """Malformed or inconsistent function file."""


# -- JSON with fixed float precision -------------------------------------------


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _dump(obj, 0, indent) + "\n"


def _dump(obj, level: int, indent: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite float {x}")
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, level + 1, indent)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_dump(v, level + 1, indent) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _dump(v, level + 1, indent) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


# -- function files ---------------------------------------------------------------


def group_payload(g: GroupSpec) -> list[list[int]]:
    return [[p, m] for p, m in g.factors]


def function_document(f: BooleanFunction) -> dict:
    return {
        "format": FORMAT,
        "enumeration": ENUMERATION,
        "group": group_payload(f.group),
        "representation": "dense",
        "values": [int(v) for v in f.values],
    }


def sparse_document(t: FourierTable, boolean: bool = True, tol: float = 1e-12) -> dict:
    g = t.group
    support = np.flatnonzero(np.abs(t.coeffs) > tol)
    return {
        "format": FORMAT,
        "enumeration": ENUMERATION,
        "group": group_payload(g),
        "representation": "sparse",
        "boolean": boolean,
        "coefficients": [[list(index_to_element(g, int(i))), complex_pair(t.coeffs[i])] for i in support],
    }


def write_function(path, f: BooleanFunction) -> None:
    Path(path).write_text(dumps(function_document(f)))


def parse_function(doc: dict) -> BooleanFunction:
    """Validate a function document and return the Boolean function it encodes."""
    if not isinstance(doc, dict):
        raise FileFormatError("function file must hold a JSON object")
    if doc.get("enumeration", ENUMERATION) != ENUMERATION:
        raise FileFormatError(f"unsupported enumeration {doc.get('enumeration')!r}")
    try:
        g = build_group([tuple(pm) for pm in doc["group"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"bad group field: {exc}") from exc
    rep = doc.get("representation", "dense")
    if rep == "dense":
        values = doc.get("values")
        if not isinstance(values, list) or len(values) != g.order:
            raise FileFormatError(f"dense file needs {g.order} values")
        if any(v not in (-1, 1) or isinstance(v, bool) for v in values):
            raise FileFormatError("dense values must be -1 or +1")
        return BooleanFunction(g, np.array(values))
    if rep == "sparse":
        coeffs = np.zeros(g.order, dtype=np.complex128)
        seen = set()
        for entry in doc.get("coefficients", []):
            try:
                r, (re, im) = entry
                i = element_to_index(g, r)
            except (TypeError, ValueError, ShapeError) as exc:
                raise FileFormatError(f"bad coefficient entry {entry!r}") from exc
            if i in seen:
                raise FileFormatError(f"duplicate support element {r}")
            seen.add(i)
            coeffs[i] = complex(float(re), float(im))
        vals = idft(FourierTable(g, coeffs))
        if not doc.get("boolean", True):
            raise FileFormatError("only Boolean (+-1) functions are supported")
        rounded = np.where(vals.real >= 0, 1, -1)
        if np.abs(vals - rounded).max(initial=0.0) > BOOLEAN_TOL:
            raise FileFormatError("sparse spectrum does not synthesize a +-1 function")
        return BooleanFunction(g, rounded)
    raise FileFormatError(f"unknown representation {rep!r}")


def read_function(path) -> BooleanFunction:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: not valid JSON ({exc})") from exc
    return parse_function(doc)


def automorphism_document(a: Automorphism) -> dict:
    return {
        "group": group_payload(a.group),
        "enumeration": ENUMERATION,
        "generator_images": [list(e) for e in a.generator_images],
        "perm": [int(v) for v in a.perm],
    }


# -- generators -------------------------------------------------------------------


def constant(g: GroupSpec, value: int = 1) -> BooleanFunction:
    return BooleanFunction.constant(g, value)


def random_boolean(g: GroupSpec, rng: np.random.Generator) -> BooleanFunction:
    return BooleanFunction(g, rng.choice(np.array([-1, 1], dtype=np.int8), size=g.order))


def subgroup_indicator(g: GroupSpec, constraints=None, rng: np.random.Generator | None = None) -> BooleanFunction:
    """``-1`` on ``{x : r * x = 0 for each r}``, ``+1`` elsewhere.

    Without explicit constraints one nonzero ``r`` is drawn from ``rng``.
    """
    if constraints is None:
        if rng is None or g.order == 1:
            raise ValueError("need constraints or an rng on a nontrivial group")
        constraints = [index_to_element(g, int(rng.integers(1, g.order)))]
    sub = ConstraintSubgroup(g, tuple((g.element(r), 0) for r in constraints))
    values = np.ones(g.order, dtype=np.int8)
    values[sub.member_indices] = -1
    return BooleanFunction(g, values)


def automorphic_image(f: BooleanFunction, rng: np.random.Generator) -> tuple[BooleanFunction, Automorphism]:
    """``f o A`` for ``A`` uniform over Aut(G)."""
    autos = enumerate_automorphisms(f.group)
    a = autos[int(rng.integers(len(autos)))]
    return apply(a, f), a


def far_perturbation(f: BooleanFunction, fraction: float, rng: np.random.Generator) -> BooleanFunction:
    """Flip exactly ``round(fraction * |G|)`` uniformly chosen points."""
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must be in [0, 1]")
    g = f.group
    k = int(round(fraction * g.order))
    flip = rng.choice(g.order, size=k, replace=False)
    values = f.values.copy()
    values[flip] *= -1
    return BooleanFunction(g, values)


GENERATOR_KINDS = ("constant", "subgroup-indicator", "random", "automorphic-image", "far-perturbation")
