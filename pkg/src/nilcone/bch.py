"""Group law in exponential coordinates via the Baker-Campbell-Hausdorff series.

For a nilpotent algebra of step r the Dynkin expansion truncates at
bracket depth r, so log(exp(u)exp(v)) is a polynomial map.  The
coefficients are computed once per algebra as exact rational
polynomials in the 2m coordinate variables; the same table is evaluated
with Fractions for exact work and compiled to flat float arrays for the
Monte Carlo kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

from . import ratlin
from .algebra import (
    Gradation,
    NilpotentAlgebraSpec,
    StructuralError,
    Tensor,
    builtin_algebra,
    gradation,
)

MAX_STEP = 6

# A monomial is a sorted tuple of (variable, exponent); variables
# 0..m-1 are coordinates of the left factor, m..2m-1 of the right.
Mono = tuple[tuple[int, int], ...]
Poly = dict[Mono, Fraction]


def _poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            merged: dict[int, int] = {}
            for v, e in ma:
                merged[v] = merged.get(v, 0) + e
            for v, e in mb:
                merged[v] = merged.get(v, 0) + e
            key = tuple(sorted(merged.items()))
            c = ca * cb
            prev = out.get(key)
            out[key] = c if prev is None else prev + c
    return {k: c for k, c in out.items() if c != 0}


def _poly_axpy(target: Poly, scale: Fraction, src: Poly) -> None:
    for mono, c in src.items():
        v = target.get(mono, Fraction(0)) + scale * c
        if v == 0:
            target.pop(mono, None)
        else:
            target[mono] = v


def _poly_bracket(tensor: Tensor, dim: int, u: list[Poly], v: list[Poly]) -> list[Poly]:
    out: list[Poly] = [{} for _ in range(dim)]
    for (i, j), coeffs in tensor.items():
        if not u[i] and not v[j] and not u[j] and not v[i]:
            continue
        f: Poly = {}
        _poly_axpy(f, Fraction(1), _poly_mul(u[i], v[j]))
        _poly_axpy(f, Fraction(-1), _poly_mul(u[j], v[i]))
        if not f:
            continue
        for k, c in coeffs.items():
            _poly_axpy(out[k], c, f)
    return out


@lru_cache(maxsize=None)
def dynkin_word_coefficients(max_len: int) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    """Rational weight of each letter word in the Dynkin expansion.

    Words are tuples over {0, 1} (0 = left letter, 1 = right letter) of
    length at most ``max_len``; the associated Lie monomial is the
    right-nested bracket of the letters.  Weights aggregate the Dynkin
    double sum over all block decompositions of the word.
    """
    if max_len > MAX_STEP:
        raise StructuralError(f"BCH truncation supports step <= {MAX_STEP}")
    acc: dict[tuple[int, ...], Fraction] = {}

    def extend(word: tuple[int, ...], n_blocks: int, fact_prod: int) -> None:
        for p in range(0, max_len - len(word) + 1):
            for q in range(0, max_len - len(word) - p + 1):
                if p + q == 0:
                    continue
                w = word + (0,) * p + (1,) * q
                f = fact_prod * factorial(p) * factorial(q)
                n = n_blocks + 1
                sign = Fraction(-1) ** (n - 1)
                weight = sign / (n * len(w) * f)
                acc[w] = acc.get(w, Fraction(0)) + weight
                extend(w, n, f)

    extend((), 0, 1)
    return tuple(sorted((w, c) for w, c in acc.items() if c != 0))


def bch_polynomials(tensor: Tensor, dim: int, step: int) -> list[Poly]:
    """Coordinatewise polynomials of the product log(exp(u) exp(v))."""
    x_vec: list[Poly] = [{((k, 1),): Fraction(1)} for k in range(dim)]
    y_vec: list[Poly] = [{((dim + k, 1),): Fraction(1)} for k in range(dim)]
    letters = (x_vec, y_vec)
    out: list[Poly] = [{} for _ in range(dim)]
    for word, weight in dynkin_word_coefficients(step):
        cur = letters[word[-1]]
        for letter in reversed(word[:-1]):
            cur = _poly_bracket(tensor, dim, letters[letter], cur)
            if all(not p for p in cur):
                break
        else:
            for k in range(dim):
                if cur[k]:
                    _poly_axpy(out[k], weight, cur[k])
    return out


def _eval_polys(polys: list[Poly], dim: int, a, b):
    vals = tuple(a) + tuple(b)
    out = []
    for k in range(dim):
        acc = 0
        for mono, c in polys[k].items():
            term = c
            for v, e in mono:
                base = vals[v]
                for _ in range(e):
                    term = term * base
            acc = acc + term
        out.append(acc)
    return tuple(out)


@dataclass(frozen=True)
class GroupLaw:
    """Multiplication, inverse, powers for one algebra and one bracket.

    ``law`` is "group" for the original bracket or "graded" for the
    associated graded one.  Coordinates are exponential coordinates in
    the adapted basis; scalars may be Fractions (exact) or floats.
    """

    algebra_id: str
    law: str
    dim: int
    degrees: tuple[int, ...]
    polys: tuple  # tuple of (mono, coeff) tuples per coordinate

    def identity(self) -> tuple:
        return (Fraction(0),) * self.dim

    def mul(self, a, b) -> tuple:
        out = list(a)
        for k in range(self.dim):
            out[k] = out[k] + b[k]
        m = self.dim
        vals = tuple(a) + tuple(b)
        for k, terms in enumerate(self.polys):
            acc = out[k]
            for mono, c in terms:
                term = c
                for v, e in mono:
                    base = vals[v]
                    for _ in range(e):
                        term = term * base
                acc = acc + term
            out[k] = acc
        del m
        return tuple(out)

    def inv(self, a) -> tuple:
        return tuple(-c for c in a)

    def pow(self, a, n) -> tuple:
        # exp(x)^n = exp(n x) along the one-parameter subgroup
        return tuple(n * c for c in a)

    def comm(self, a, b) -> tuple:
        return self.mul(self.mul(self.inv(a), self.inv(b)), self.mul(a, b))

    def conjugate(self, a, b) -> tuple:
        """b^{-1} a b."""
        return self.mul(self.mul(self.inv(b), a), b)

    def bind_right(self, b):
        """Partially evaluated x -> x * b, for hot exact loops (BFS)."""
        m = self.dim
        collected: list[dict[Mono, Fraction]] = [dict() for _ in range(m)]
        for k, terms in enumerate(self.polys):
            for mono, c in terms:
                xs = []
                scale = c
                for v, e in mono:
                    if v < m:
                        xs.append((v, e))
                    else:
                        base = b[v - m]
                        for _ in range(e):
                            scale = scale * base
                        if scale == 0:
                            break
                if scale == 0:
                    continue
                key = tuple(xs)
                collected[k][key] = collected[k].get(key, Fraction(0)) + scale
        compiled = [
            tuple((mono, c) for mono, c in sorted(col.items()) if c != 0)
            for col in collected
        ]

        def mul_right(a, _compiled=tuple(compiled), _b=tuple(b), _m=m):
            out = list(a)
            for k in range(_m):
                acc = out[k] + _b[k]
                for mono, c in _compiled[k]:
                    term = c
                    for v, e in mono:
                        base = a[v]
                        for _ in range(e):
                            term = term * base
                    acc = acc + term
                out[k] = acc
            return tuple(out)

        return mul_right


def _freeze_polys(polys: list[Poly], dim: int) -> tuple:
    """Drop the linear part (handled additively) and sort terms."""
    frozen = []
    for k in range(dim):
        terms = []
        for mono, c in polys[k].items():
            if mono == ((k, 1),) or mono == ((dim + k, 1),):
                if c != 1:
                    raise StructuralError("BCH linear part is not the sum map")
                continue
            total = sum(e for _, e in mono)
            if total < 2:
                raise StructuralError("unexpected linear cross term in BCH")
            terms.append((mono, c))
        frozen.append(tuple(sorted(terms)))
    return tuple(frozen)


class NilpotentGroup:
    """A simply connected nilpotent group in adapted exponential coordinates.

    Wraps a validated algebra presentation together with its gradation,
    and exposes the polynomial group law for both the original and the
    associated graded bracket.  All coordinates used by this object and
    everything downstream are with respect to the adapted basis.
    """

    def __init__(self, spec: NilpotentAlgebraSpec, name: str | None = None):
        self.input_spec = spec
        self.grad: Gradation = gradation(spec)
        self.name = name or spec.name or f"algebra{spec.dim}"
        self.dim = spec.dim
        self.step = self.grad.step
        self.degrees = self.grad.degrees
        self.abelian_dim = self.grad.abelian_dim
        if self.step > MAX_STEP:
            raise StructuralError(f"step {self.step} exceeds supported bound {MAX_STEP}")
        group_polys = bch_polynomials(self.grad.adapted_tensor, self.dim, self.step)
        graded_polys = bch_polynomials(self.grad.graded_tensor, self.dim, self.step)
        self.law_group = GroupLaw(
            algebra_id=self.name,
            law="group",
            dim=self.dim,
            degrees=self.degrees,
            polys=_freeze_polys(group_polys, self.dim),
        )
        self.law_graded = GroupLaw(
            algebra_id=self.name,
            law="graded",
            dim=self.dim,
            degrees=self.degrees,
            polys=_freeze_polys(graded_polys, self.dim),
        )

    def law(self, tag: str) -> GroupLaw:
        if tag == "group":
            return self.law_group
        if tag == "graded":
            return self.law_graded
        raise StructuralError(f"unknown law tag {tag!r}")

    def to_adapted(self, v) -> tuple:
        return self.grad.to_adapted(ratlin.as_vec(v))

    def __repr__(self) -> str:  # pragma: no cover
        return f"NilpotentGroup({self.name}, dim={self.dim}, step={self.step})"


_GROUP_CACHE: dict[str, NilpotentGroup] = {}


def get_group(name_or_spec) -> NilpotentGroup:
    """Group for a built-in name or a custom NilpotentAlgebraSpec."""
    if isinstance(name_or_spec, NilpotentGroup):
        return name_or_spec
    if isinstance(name_or_spec, NilpotentAlgebraSpec):
        spec = name_or_spec
        key = spec.name or spec.to_json()
        if key not in _GROUP_CACHE:
            _GROUP_CACHE[key] = NilpotentGroup(spec)
        return _GROUP_CACHE[key]
    name = str(name_or_spec)
    if name not in _GROUP_CACHE:
        _GROUP_CACHE[name] = NilpotentGroup(builtin_algebra(name))
    return _GROUP_CACHE[name]


@dataclass(frozen=True)
class GroupPoint:
    """A group element: exponential coordinates, law tag, algebra id."""

    coords: tuple
    law: str
    algebra: str

    def __post_init__(self):
        if self.law not in ("group", "graded"):
            raise StructuralError(f"unknown law tag {self.law!r}")


def point(coords, law: str, algebra) -> GroupPoint:
    grp = get_group(algebra)
    coords = tuple(coords)
    if len(coords) != grp.dim:
        raise StructuralError(
            f"expected {grp.dim} coordinates for {grp.name}, got {len(coords)}"
        )
    return GroupPoint(coords=coords, law=law, algebra=grp.name)


def _resolve(a: GroupPoint, b: GroupPoint | None = None) -> GroupLaw:
    if b is not None:
        if a.algebra != b.algebra:
            raise StructuralError(f"algebra mismatch: {a.algebra} vs {b.algebra}")
        if a.law != b.law:
            raise StructuralError(f"law mismatch: {a.law} vs {b.law}")
    return get_group(a.algebra).law(a.law)


def bch_product(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    law = _resolve(a, b)
    return GroupPoint(law.mul(a.coords, b.coords), a.law, a.algebra)


def inverse(a: GroupPoint) -> GroupPoint:
    law = _resolve(a)
    return GroupPoint(law.inv(a.coords), a.law, a.algebra)


def power(a: GroupPoint, n) -> GroupPoint:
    law = _resolve(a)
    return GroupPoint(law.pow(a.coords, n), a.law, a.algebra)


def commutator(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    law = _resolve(a, b)
    return GroupPoint(law.comm(a.coords, b.coords), a.law, a.algebra)
