"""Dilations, scaling maps, projections, quasi-norms, factorization.

The smooth side of the geometry: everything here lives on the ambient
group or its associated graded group (the Carnot group carrying the
dilations).  Word metrics and lattice machinery are in wordmetric.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .algebra import Gradation, StructuralError
from .bch import GroupLaw, GroupPoint, NilpotentGroup, get_group
from .ratlin import rref, solve_in_basis


def _degrees_of(grad_or_group) -> tuple[int, ...]:
    if isinstance(grad_or_group, NilpotentGroup):
        return grad_or_group.degrees
    if isinstance(grad_or_group, Gradation):
        return grad_or_group.degrees
    raise TypeError("expected a Gradation or NilpotentGroup")


def dilation(grad, g: GroupPoint, t) -> GroupPoint:
    """Grading dilation: coordinate of degree d scales by t**d."""
    if t <= 0:
        raise StructuralError("dilation parameter must be positive")
    degrees = _degrees_of(grad)
    coords = tuple(c * t ** d for c, d in zip(g.coords, degrees))
    return GroupPoint(coords, g.law, g.algebra)


def scl(gamma: GroupPoint, t) -> GroupPoint:
    """Scaling map into the asymptotic cone: dilate by 1/t, retag graded.

    Lattice elements viewed at scale t become points of the graded
    group; the coordinate identity makes the map explicit.
    """
    if t <= 0:
        raise StructuralError("scaling depth must be positive")
    grp = get_group(gamma.algebra)
    one = Fraction(1) if isinstance(t, (int, Fraction)) else 1.0
    s = one / t
    coords = tuple(c * s ** d for c, d in zip(gamma.coords, grp.degrees))
    return GroupPoint(coords, "graded", gamma.algebra)


def _zero_like(c):
    return Fraction(0) if isinstance(c, (int, Fraction)) else 0.0


def pi_ab(g: GroupPoint) -> GroupPoint:
    """Zero out all coordinates of degree two and higher."""
    degrees = get_group(g.algebra).degrees
    coords = tuple(c if d == 1 else _zero_like(c) for c, d in zip(g.coords, degrees))
    return GroupPoint(coords, g.law, g.algebra)


def pi_com(g: GroupPoint) -> GroupPoint:
    """Zero out the degree-one (abelian) coordinates."""
    degrees = get_group(g.algebra).degrees
    coords = tuple(c if d > 1 else _zero_like(c) for c, d in zip(g.coords, degrees))
    return GroupPoint(coords, g.law, g.algebra)


def quasi_norm_m(grad, g) -> float:
    """Homogeneous quasi-norm max_i |x_i|**(1/d_i)."""
    degrees = _degrees_of(grad)
    coords = g.coords if isinstance(g, GroupPoint) else tuple(g)
    best = 0.0
    for c, d in zip(coords, degrees):
        v = abs(float(c)) ** (1.0 / d)
        if v > best:
            best = v
    return best


def quasi_norm_powers(grad, coords) -> tuple[int, tuple[Fraction, ...]]:
    """Exact comparator data for the quasi-norm.

    Returns (L, values) with L = lcm of the degrees and values_i =
    |x_i|**(L/d_i) as Fractions; max(values) equals the quasi-norm
    raised to the L-th power, so quasi-norms of rational points compare
    exactly without extracting roots.
    """
    degrees = _degrees_of(grad)
    L = math.lcm(*degrees)
    vals = tuple(abs(Fraction(c)) ** (L // d) for c, d in zip(coords, degrees))
    return L, vals


def proxy_distance(grad, a: GroupPoint, b: GroupPoint) -> float:
    """Quasi-norm of the graded-law difference a^{-1} * b."""
    grp = get_group(a.algebra)
    law = grp.law_graded
    ca = tuple(float(c) for c in a.coords)
    cb = tuple(float(c) for c in b.coords)
    return quasi_norm_m(grad, law.mul(law.inv(ca), cb))


def fit_exponent(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    pts = [(math.log(float(x)), math.log(float(y))) for x, y in zip(xs, ys)
           if float(x) > 0 and float(y) > 0]
    if len(pts) < 2:
        raise ValueError("need at least two positive points to fit an exponent")
    n = len(pts)
    mx = sum(p[0] for p in pts) / n
    my = sum(p[1] for p in pts) / n
    num = sum((p[0] - mx) * (p[1] - my) for p in pts)
    den = sum((p[0] - mx) ** 2 for p in pts)
    return num / den


# ----------------------------------------------------------- factorization

class FactorizationError(RuntimeError):
    """Raised when the peeling loop fails to absorb the residual."""

    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Factorization:
    """A word in dilated horizontal generators multiplying to a point.

    Each term is (generator index, exponent a >= 0) meaning the dilated
    generator delta_a(s_index); indices 0..d-1 are the degree-one
    coordinate generators, d..2d-1 their inverses.
    """

    algebra: str
    terms: tuple[tuple[int, object], ...]

    def __len__(self) -> int:
        return len(self.terms)


def generating_set(group: NilpotentGroup) -> list[GroupPoint]:
    """The 2d horizontal coordinate generators, inverses in the back half."""
    d = group.abelian_dim
    m = group.dim
    out = []
    for sign in (1, -1):
        for j in range(d):
            coords = tuple(
                Fraction(sign) if k == j else Fraction(0) for k in range(m)
            )
            out.append(GroupPoint(coords, "graded", group.name))
    return out


def _letter_coords(group: NilpotentGroup, idx: int, a):
    d = group.abelian_dim
    m = group.dim
    j = idx if idx < d else idx - d
    sign = 1 if idx < d else -1
    zero = Fraction(0) if isinstance(a, (int, Fraction)) else 0.0
    return tuple(sign * a if k == j else zero for k in range(m))


def evaluate_factorization(group: NilpotentGroup, fact: Factorization) -> GroupPoint:
    law = group.law_graded
    acc = law.identity()
    exact = all(isinstance(a, (int, Fraction)) for _, a in fact.terms)
    if not exact:
        acc = tuple(0.0 for _ in range(group.dim))
    for idx, a in fact.terms:
        acc = law.mul(acc, _letter_coords(group, idx, a if exact else float(a)))
    return GroupPoint(acc, "graded", group.name)


def _invert_word(d: int, letters):
    out = []
    for idx, role in reversed(letters):
        out.append((idx + d if idx < d else idx - d, role))
    return tuple(out)


def _nested_word(d: int, seq) -> tuple:
    """Commutator word a b a^{-1} b^{-1} nested along seq, roles marked.

    The outermost letter (seq[0]) carries the role "outer"; in exact
    mode its exponent absorbs the full target coefficient so no k-th
    roots appear.
    """
    if len(seq) == 1:
        return ((seq[0], "outer"),)
    a = ((seq[0], "outer"),)
    b = tuple((i, "unit") for i, _ in _nested_word(d, seq[1:]))
    # inner word reverts to unit role; only the top-level letter scales
    return a + b + _invert_word(d, a) + _invert_word(d, b)


def _word_eval(group: NilpotentGroup, letters, outer_exp, unit_exp):
    law = group.law_graded
    acc = law.identity()
    for idx, role in letters:
        a = outer_exp if role == "outer" else unit_exp
        acc = law.mul(acc, _letter_coords(group, idx, a))
    return acc


class _GadgetBasis:
    """Per-degree commutator gadget words spanning each graded level."""

    def __init__(self, group: NilpotentGroup):
        self.group = group
        self.levels: dict[int, tuple[list[tuple], list[tuple]]] = {}
        d = group.abelian_dim
        idx_by_level: dict[int, list[int]] = {}
        for k, deg in enumerate(group.degrees):
            idx_by_level.setdefault(deg, []).append(k)
        for level in sorted(idx_by_level):
            if level == 1:
                continue
            coords_idx = idx_by_level[level]
            words, vectors = [], []
            for seq in _lex_sequences(d, level):
                w = _nested_word(d, seq)
                full = _word_eval(group, w, Fraction(1), Fraction(1))
                vec = tuple(full[i] for i in coords_idx)
                if all(v == 0 for v in vec):
                    continue
                if len(rref(tuple(vectors) + (vec,))[0]) == len(vectors) + 1:
                    words.append(w)
                    vectors.append(vec)
                if len(vectors) == len(coords_idx):
                    break
            if len(vectors) < len(coords_idx):
                raise StructuralError(
                    f"gadget words do not span degree-{level} layer of {group.name}"
                )
            self.levels[level] = (words, vectors)

    def solve(self, level: int, target_vec):
        words, vectors = self.levels[level]
        coeffs = solve_in_basis(tuple(vectors), tuple(target_vec))
        return words, coeffs


def _lex_sequences(d: int, length: int):
    seq = [0] * length
    while True:
        yield tuple(seq)
        i = length - 1
        while i >= 0 and seq[i] == d - 1:
            seq[i] = 0
            i -= 1
        if i < 0:
            return
        seq[i] += 1


_GADGET_CACHE: dict[str, _GadgetBasis] = {}


def _gadgets(group: NilpotentGroup) -> _GadgetBasis:
    gb = _GADGET_CACHE.get(group.name)
    if gb is None:
        gb = _GadgetBasis(group)
        _GADGET_CACHE[group.name] = gb
    return gb


def _root(value: float, k: int) -> float:
    return value ** (1.0 / k)


def horizontal_factorization(group, g, order: str = "asc",
                             style: str = "uniform",
                             max_passes: int = 50,
                             tol: float = 1e-12) -> Factorization:
    """Factor a graded-group point as a word of dilated generators.

    Peels degree levels from the bottom up: abelian coordinates become
    single dilated generators (in ascending or descending coordinate
    order), deeper levels are matched by commutator gadget words.  The
    cross terms each emission introduces live in strictly higher
    degrees, so repeated passes absorb them; the loop is capped at
    ``max_passes``.

    style "uniform" dilates a whole degree-k gadget by |t|**(1/k)
    (floats); style "exact" puts the full coefficient on the gadget's
    outermost letter, which keeps Fraction inputs exact.
    """
    if isinstance(group, (str,)) or not isinstance(group, NilpotentGroup):
        group = get_group(group)
    if isinstance(g, GroupPoint):
        coords = g.coords
    else:
        coords = tuple(g)
    exact = style == "exact"
    if exact and not all(isinstance(c, (int, Fraction)) for c in coords):
        raise StructuralError("exact factorization needs rational coordinates")
    law = group.law_graded
    if exact:
        target = tuple(Fraction(c) for c in coords)
        acc = law.identity()
    else:
        target = tuple(float(c) for c in coords)
        acc = tuple(0.0 for _ in range(group.dim))
    d = group.abelian_dim
    degrees = group.degrees
    ab_indices = [k for k, deg in enumerate(degrees) if deg == 1]
    if order == "desc":
        ab_indices = ab_indices[::-1]
    elif order != "asc":
        raise StructuralError(f"unknown factorization order {order!r}")
    levels = sorted(set(degrees))
    terms: list[tuple[int, object]] = []

    def residual():
        return law.mul(law.inv(acc), target)

    for _ in range(max_passes):
        r = residual()
        if exact:
            done = all(c == 0 for c in r)
        else:
            done = max(abs(float(c)) for c in r) <= tol
        if done:
            return Factorization(algebra=group.name, terms=tuple(terms))
        emitted = False

        def settled(c) -> bool:
            # sub-tolerance float noise must not starve deeper levels
            return c == 0 if exact else abs(float(c)) <= tol

        for level in levels:
            if level == 1:
                for j in ab_indices:
                    if settled(r[j]):
                        continue
                    c = r[j]
                    idx = j if c > 0 else j + d
                    a = abs(c)
                    terms.append((idx, a))
                    acc = law.mul(acc, _letter_coords(group, idx, a))
                    emitted = True
                if emitted:
                    break
                continue
            vec = [r[k] for k, deg in enumerate(degrees) if deg == level]
            if all(settled(v) for v in vec):
                continue
            if not exact:
                vec = [Fraction(v) for v in vec]
            words, coeffs = _gadgets(group).solve(level, vec)
            for w, t in zip(words, coeffs):
                if t == 0:
                    continue
                letters = w if t > 0 else _invert_word(d, w)
                if exact:
                    outer, unit = abs(t), Fraction(1)
                else:
                    outer = unit = _root(abs(float(t)), level)
                for idx, role in letters:
                    a = outer if role == "outer" else unit
                    terms.append((idx, a))
                acc = law.mul(acc, _word_eval(group, letters, outer, unit))
                emitted = True
            if emitted:
                break
        if not emitted:
            break
    r = residual()
    if exact and all(c == 0 for c in r):
        return Factorization(algebra=group.name, terms=tuple(terms))
    if not exact and max(abs(float(c)) for c in r) <= tol:
        return Factorization(algebra=group.name, terms=tuple(terms))
    raise FactorizationError(
        f"factorization failed to converge for {group.name}", residual=r
    )
