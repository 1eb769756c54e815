"""Averaged abelianization, iterate asymptotics, and the derivative map.

The pipeline: estimate the mean abelianized cocycle on the horizontal
generators, extend it to the whole graded group through horizontal
factorizations (the derivative map), then run the convergence
experiments that probe the scaled cocycle against that map.

Convergence in measure has no finite-sample certificate, so "with high
probability" is operationalized as a threshold on the acceptance
fraction at the largest depth plus a monotone trend after median-of-3
smoothing; the proxy metric is always the quasi-norm of the graded
difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import StructuralError
from .bch import GroupPoint, NilpotentGroup, get_group
from .coupling import (
    CouplingSpec,
    alpha,
    box_samples,
    coupling_kernels,
    domain_samples,
    seed_lineage,
)
from .geometry import generating_set, horizontal_factorization, quasi_norm_m
from .kernels import (
    bch_batch,
    dilate_batch,
    fold_digits,
    law_table,
    quasi_norm_batch,
    reduce_batch,
    translate_batch,
)
from .wordmetric import digits_to_point

DEFAULT_WORKERS = 4

# spawn-key tags keeping the per-operation sample streams disjoint
_TAG_MEAN_AB = 0
_TAG_ITERATES = 1
_TAG_MAIN = 2
_TAG_KAPPA = 3
_TAG_RECUR = 4
_TAG_PROBE = 5
_TAG_WORD = 6


def median3_smooth(values):
    """Median-of-3 smoothing with clamped ends."""
    v = list(values)
    if len(v) < 3:
        return v
    out = [v[0]]
    for i in range(1, len(v) - 1):
        out.append(sorted(v[i - 1:i + 2])[1])
    out.append(v[-1])
    return out


def nondecreasing(values, tol: float = 1e-9) -> bool:
    v = list(values)
    return all(b >= a - tol for a, b in zip(v, v[1:]))


def strictly_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


def _coords_of(g) -> tuple:
    return g.coords if isinstance(g, GroupPoint) else tuple(g)


def _float_coords(g) -> np.ndarray:
    return np.asarray([float(c) for c in _coords_of(g)], dtype=np.float64)


def _abelian_indices(grp: NilpotentGroup) -> list[int]:
    return [i for i, d in enumerate(grp.degrees) if d == 1]


def _graded_dist(grp: NilpotentGroup, points: np.ndarray,
                 target: np.ndarray) -> np.ndarray:
    """Proxy distances from each row to the target, in the graded group."""
    tab = law_table(grp.law_graded)
    t = np.broadcast_to(target, points.shape).copy()
    diff = bch_batch(tab, -points, t)
    return quasi_norm_batch(grp.degrees, diff)


# ------------------------------------------------------- mean abelianization

@dataclass(frozen=True)
class MeanAbelianization:
    """Monte Carlo estimate of the averaged abelianized cocycle."""

    vector: tuple[float, ...]
    ci: tuple[float, ...]
    samples: int
    seed: int


def _cocycle_coords_batch(coupling: CouplingSpec, gamma_coords, x: np.ndarray,
                          side: str = "alpha") -> np.ndarray:
    ck = coupling_kernels(coupling)
    if side == "alpha":
        digits, _ = ck.alpha_digits(gamma_coords, x)
        return ck.lambda_coords(digits)
    if side == "beta":
        digits, _ = ck.beta_digits(gamma_coords, x)
        return -ck.gamma_coords(digits)
    raise StructuralError(f"unknown cocycle side {side!r}")


def mean_abelianization(coupling: CouplingSpec, gamma, samples: int, seed: int,
                        workers: int = DEFAULT_WORKERS,
                        side: str = "alpha") -> MeanAbelianization:
    """Average of the abelian coordinates of the cocycle at gamma."""
    if samples < 1:
        raise StructuralError("samples must be >= 1")
    grp = coupling.ambient()
    if side == "alpha":
        x = domain_samples(coupling, samples, seed, workers, _TAG_MEAN_AB)
    else:
        x = box_samples(coupling, samples, seed, workers, _TAG_MEAN_AB)
    lam = _cocycle_coords_batch(coupling, _coords_of(gamma), x, side)
    ab = _abelian_indices(grp)
    vec = [0.0] * grp.dim
    ci = [0.0] * grp.dim
    for i in ab:
        col = lam[:, i]
        vec[i] = float(col.mean())
        sd = float(col.std(ddof=1)) if samples > 1 else 0.0
        ci[i] = 1.96 * sd / math.sqrt(samples)
    return MeanAbelianization(vector=tuple(vec), ci=tuple(ci),
                              samples=samples, seed=seed)


def cocycle_ergodic_average(coupling: CouplingSpec, gamma, x, n: int) -> tuple:
    """(1/n) times the abelian part of the cocycle at gamma^n (exact)."""
    if n < 1:
        raise StructuralError("n must be >= 1")
    grp = coupling.ambient()
    law = grp.law_group
    power = law.pow(tuple(Fraction(c) for c in _coords_of(gamma)), n)
    lam = alpha(coupling, power, x)
    ab = set(_abelian_indices(grp))
    return tuple(
        c / n if i in ab else type(c)(0) for i, c in enumerate(lam.coords)
    )


# ------------------------------------------------------------ derivative map

@dataclass(frozen=True)
class GeneratorImageTable:
    """Estimated abelianized images of the 2d horizontal generators."""

    coupling: str
    side: str
    entries: tuple[tuple[float, ...], ...]
    cis: tuple[tuple[float, ...], ...]
    samples: int
    seed: int

    def image(self, idx: int) -> tuple[float, ...]:
        return self.entries[idx]


@dataclass(frozen=True)
class PansuDerivative:
    """The derivative map assembled from generator images.

    Applies to graded-group points by factorizing into dilated
    horizontal generators and multiplying the correspondingly dilated
    image vectors in the target graded group.
    """

    table: GeneratorImageTable
    source: str
    target: str
    style: str = "uniform"

    def apply(self, g, order: str = "asc") -> GroupPoint:
        return phi_apply(self, g, order=order)


def build_phi(coupling: CouplingSpec, samples: int, seed: int,
              workers: int = DEFAULT_WORKERS,
              side: str = "alpha") -> PansuDerivative:
    """Estimate generator images and wrap them as the derivative map."""
    grp = coupling.ambient()
    gens = generating_set(grp)
    if side == "alpha":
        x = domain_samples(coupling, samples, seed, workers, _TAG_MEAN_AB)
    else:
        x = box_samples(coupling, samples, seed, workers, _TAG_MEAN_AB)
    ab = _abelian_indices(grp)
    entries = []
    cis = []
    for s in gens:
        lam = _cocycle_coords_batch(coupling, s.coords, x, side)
        vec = [0.0] * grp.dim
        ci = [0.0] * grp.dim
        for i in ab:
            col = lam[:, i]
            vec[i] = float(col.mean())
            sd = float(col.std(ddof=1)) if samples > 1 else 0.0
            ci[i] = 1.96 * sd / math.sqrt(samples)
        entries.append(tuple(vec))
        cis.append(tuple(ci))
    table = GeneratorImageTable(
        coupling=coupling.name, side=side, entries=tuple(entries),
        cis=tuple(cis), samples=samples, seed=seed,
    )
    return PansuDerivative(table=table, source=grp.name, target=grp.name)


def phi_apply(deriv: PansuDerivative, g, order: str = "asc") -> GroupPoint:
    """Image of a graded-group point under the derivative map."""
    src = get_group(deriv.source)
    tgt = get_group(deriv.target)
    coords = tuple(float(c) for c in _coords_of(g))
    fact = horizontal_factorization(src, coords, order=order,
                                    style=deriv.style)
    law = tgt.law_graded
    acc = tuple(0.0 for _ in range(tgt.dim))
    for idx, a in fact.terms:
        img = deriv.table.image(idx)
        letter = tuple(float(a) * v for v in img)
        acc = law.mul(acc, letter)
    return GroupPoint(acc, "graded", tgt.name)


# ---------------------------------------------------------------- reports

@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    samples: int
    fraction_within_eps: float
    median_proxy_dist: float
    seed: int


@dataclass
class ConvergenceReport:
    """Per-depth acceptance fractions and medians for one experiment."""

    experiment: str
    rows: tuple[ConvergenceRow, ...]
    seed: int
    eps: float
    meta: dict = field(default_factory=dict)

    def fractions(self):
        return [r.fraction_within_eps for r in self.rows]

    def medians(self):
        return [r.median_proxy_dist for r in self.rows]

    def threshold_ok(self, threshold: float = 0.9) -> bool:
        return bool(self.rows) and self.rows[-1].fraction_within_eps >= threshold

    def monotone_ok(self, tol: float = 1e-9) -> bool:
        return nondecreasing(median3_smooth(self.fractions()), tol)

    def csv_rows(self):
        header = ["n", "samples", "fraction_within_eps",
                  "median_proxy_dist", "seed"]
        return header, [
            [r.n, r.samples, r.fraction_within_eps, r.median_proxy_dist, r.seed]
            for r in self.rows
        ]

    def summary(self) -> dict:
        return {
            "experiment": self.experiment,
            "eps": self.eps,
            "seed": self.seed,
            "rows": [
                {
                    "n": r.n,
                    "samples": r.samples,
                    "fraction_within_eps": r.fraction_within_eps,
                    "median_proxy_dist": r.median_proxy_dist,
                }
                for r in self.rows
            ],
            "threshold_ok": self.threshold_ok(),
            "monotone_ok": self.monotone_ok(),
            **{k: v for k, v in self.meta.items() if isinstance(v, (str, int, float))},
        }


# ------------------------------------------------------- iterate asymptotics

@dataclass(frozen=True)
class IterateRow:
    n: int
    samples: int
    median_ab_dev: float
    median_com_over_n: float
    median_scl_dist: float
    seed: int


@dataclass
class IterateReport:
    coupling: str
    gamma: tuple
    rows: tuple[IterateRow, ...]
    mean_ab: tuple[float, ...]
    seed: int

    def com_decreasing(self) -> bool:
        return strictly_decreasing([r.median_com_over_n for r in self.rows])

    def scl_decreasing(self) -> bool:
        return strictly_decreasing([r.median_scl_dist for r in self.rows])

    def csv_rows(self):
        header = ["n", "samples", "median_ab_dev", "median_com_over_n",
                  "median_scl_dist", "seed"]
        return header, [
            [r.n, r.samples, r.median_ab_dev, r.median_com_over_n,
             r.median_scl_dist, r.seed]
            for r in self.rows
        ]


def iterate_diagnostics(coupling: CouplingSpec, gamma, n_list, samples: int,
                        seed: int, workers: int = DEFAULT_WORKERS) -> IterateReport:
    """Distributions of the three iterate statistics per depth.

    Per sample x and depth n: deviation of the ergodic average from the
    mean abelianization, the commutator-part quasi-norm over n, and the
    proxy distance of the rescaled cocycle to the mean.
    """
    grp = coupling.ambient()
    gcoords = _float_coords(gamma)
    abar = mean_abelianization(coupling, gamma, samples, seed, workers)
    target = np.asarray(abar.vector, dtype=np.float64)
    ab = _abelian_indices(grp)
    com_mask = np.ones(grp.dim, dtype=bool)
    com_mask[ab] = False
    rows = []
    for i, n in enumerate(n_list):
        x = domain_samples(coupling, samples, seed, workers, _TAG_ITERATES, i)
        lam = _cocycle_coords_batch(coupling, tuple(n * gcoords), x)
        avg = lam[:, ab] / n
        a_dev = np.sqrt(((avg - target[ab]) ** 2).sum(axis=1))
        com = lam.copy()
        com[:, ~com_mask] = 0.0
        b = quasi_norm_batch(grp.degrees, com) / n
        scaled = dilate_batch(grp.degrees, 1.0 / n, lam)
        c = _graded_dist(grp, scaled, target)
        rows.append(IterateRow(
            n=int(n), samples=samples,
            median_ab_dev=float(np.median(a_dev)),
            median_com_over_n=float(np.median(b)),
            median_scl_dist=float(np.median(c)),
            seed=seed,
        ))
    return IterateReport(
        coupling=coupling.name,
        gamma=tuple(float(v) for v in gcoords),
        rows=tuple(rows),
        mean_ab=abar.vector,
        seed=seed,
    )


@dataclass
class TailRow:
    n: int
    bound: float
    tail_prob: float


@dataclass
class SubadditiveReport:
    coupling: str
    gamma: tuple
    rows: tuple[TailRow, ...]
    samples: int
    seed: int

    def bound_exists(self, level: float = 0.05, min_n: int = 16) -> bool:
        bounds = sorted({r.bound for r in self.rows})
        for m in bounds:
            if all(r.tail_prob < level for r in self.rows
                   if r.bound == m and r.n >= min_n):
                return True
        return False

    def csv_rows(self):
        header = ["n", "bound", "tail_prob"]
        return header, [[r.n, r.bound, r.tail_prob] for r in self.rows]


def subadditive_growth_probe(coupling: CouplingSpec, gamma, n_list,
                             samples: int, seed: int = 0,
                             bounds=(0.5, 1.0, 2.0, 4.0, 8.0),
                             workers: int = DEFAULT_WORKERS) -> SubadditiveReport:
    """Tail probabilities of the cocycle quasi-norm against linear scales."""
    gcoords = _float_coords(gamma)
    grp = coupling.ambient()
    rows = []
    for i, n in enumerate(n_list):
        x = domain_samples(coupling, samples, seed, workers, _TAG_PROBE, i)
        lam = _cocycle_coords_batch(coupling, tuple(n * gcoords), x)
        norms = quasi_norm_batch(grp.degrees, lam)
        for m in bounds:
            rows.append(TailRow(n=int(n), bound=float(m),
                                tail_prob=float((norms > m * n).mean())))
    return SubadditiveReport(
        coupling=coupling.name, gamma=tuple(float(v) for v in gcoords),
        rows=tuple(rows), samples=samples, seed=seed,
    )


# ----------------------------------------------------------- gamma sequences

def gamma_sequence(grad, lattice, g, n: int,
                   order: str = "asc") -> GroupPoint:
    """The depth-n lattice approximant: floor-scaled factorization word."""
    grp = get_group(lattice.group)
    fact = horizontal_factorization(grp, _coords_of(g), order=order)
    law = grp.law_group
    d = grp.abelian_dim
    acc = law.identity()
    for idx, a in fact.terms:
        e = math.floor(n * float(a))
        if e == 0:
            continue
        j = idx if idx < d else idx - d
        base = lattice.basis[j]
        if idx >= d:
            base = law.inv(base)
        acc = law.mul(acc, law.pow(base, e))
    return GroupPoint(acc, "group", grp.name)


# ------------------------------------------------------- theorem experiments

def main_theorem_experiment(coupling: CouplingSpec, deriv: PansuDerivative,
                            g, n_list, eps: float, samples: int, seed: int,
                            workers: int = DEFAULT_WORKERS,
                            target=None, order: str = "asc",
                            perturb_digits=None) -> ConvergenceReport:
    """Acceptance fraction of the rescaled cocycle against the derivative.

    For each depth n the lattice approximant of g moves uniform domain
    samples; the cocycle value is rescaled by n and compared to the
    derivative image (or an explicit target override, e.g. for control
    runs).  perturb_digits optionally left-multiplies the approximant
    by a fixed lattice word to exercise sequence-independence.
    """
    grp = coupling.ambient()
    if target is None:
        target_coords = _float_coords(phi_apply(deriv, g, order=order))
    else:
        target_coords = _float_coords(target)
    law = grp.law_group
    rows = []
    for i, n in enumerate(n_list):
        gam = gamma_sequence(grp.grad, coupling.gamma_lattice, g, int(n), order)
        gam_coords = gam.coords
        if perturb_digits is not None:
            pert = digits_to_point(coupling.gamma_lattice, perturb_digits)
            gam_coords = law.mul(pert.coords, gam_coords)
        x = domain_samples(coupling, samples, seed, workers, _TAG_MAIN, i)
        lam = _cocycle_coords_batch(coupling, gam_coords, x)
        scaled = dilate_batch(grp.degrees, 1.0 / float(n), lam)
        dist = _graded_dist(grp, scaled, target_coords)
        rows.append(ConvergenceRow(
            n=int(n), samples=samples,
            fraction_within_eps=float((dist < eps).mean()),
            median_proxy_dist=float(np.median(dist)),
            seed=seed,
        ))
    return ConvergenceReport(
        experiment="main-theorem", rows=tuple(rows), seed=seed, eps=eps,
        meta={"coupling": coupling.name,
              "g": ",".join(str(float(c)) for c in _coords_of(g))},
    )


@dataclass
class DefectReport:
    """Max proxy defect over a family of checks."""

    kind: str
    max_defect: float
    tolerance: float
    count: int

    @property
    def ok(self) -> bool:
        return self.max_defect <= self.tolerance


def homomorphism_check(deriv: PansuDerivative, pairs, tolerance: float = 0.1,
                       order: str = "asc") -> DefectReport:
    """Compare the image of a product with the product of images."""
    src = get_group(deriv.source)
    tgt = get_group(deriv.target)
    src_law = src.law_graded
    tgt_law = tgt.law_graded
    worst = 0.0
    count = 0
    for g, h in pairs:
        gc = tuple(float(c) for c in _coords_of(g))
        hc = tuple(float(c) for c in _coords_of(h))
        lhs = _float_coords(phi_apply(deriv, src_law.mul(gc, hc), order=order))
        fg = _float_coords(phi_apply(deriv, gc, order=order))
        fh = _float_coords(phi_apply(deriv, hc, order=order))
        rhs = np.asarray(tgt_law.mul(tuple(fg), tuple(fh)), dtype=np.float64)
        d = quasi_norm_m(tgt.grad, tgt_law.mul(tuple(-lhs), tuple(rhs)))
        worst = max(worst, d)
        count += 1
    return DefectReport(kind="homomorphism", max_defect=worst,
                        tolerance=tolerance, count=count)


def inverse_check(phi: PansuDerivative, psi: PansuDerivative, points,
                  tolerance: float = 0.1) -> DefectReport:
    """Round-trip defect of the two derivative maps."""
    src = get_group(phi.source)
    worst = 0.0
    count = 0
    for g in points:
        gc = tuple(float(c) for c in _coords_of(g))
        img = phi_apply(phi, gc)
        back = _float_coords(phi_apply(psi, img.coords))
        law = src.law_graded
        d = quasi_norm_m(src.grad, law.mul(tuple(-back), gc))
        worst = max(worst, d)
        count += 1
    return DefectReport(kind="inverse", max_defect=worst,
                        tolerance=tolerance, count=count)


# ----------------------------------------------------------------- kappa map

@dataclass
class KappaReport:
    """Sup-distance convergence of the rounded-dilation cocycle map."""

    coupling: str
    radius: float
    grid_step: float
    grid_size: int
    eps: float
    rows: tuple[ConvergenceRow, ...]
    seed: int

    def fractions(self):
        return [r.fraction_within_eps for r in self.rows]

    def threshold_ok(self, threshold: float = 0.9) -> bool:
        return bool(self.rows) and self.rows[-1].fraction_within_eps >= threshold

    def monotone_ok(self, tol: float = 1e-9) -> bool:
        return nondecreasing(median3_smooth(self.fractions()), tol)

    def csv_rows(self):
        header = ["n", "samples", "fraction_within_eps",
                  "median_proxy_dist", "seed"]
        return header, [
            [r.n, r.samples, r.fraction_within_eps, r.median_proxy_dist, r.seed]
            for r in self.rows
        ]


def _quasi_ball_grid(grp: NilpotentGroup, radius: float, step: float,
                     cap: int = 200_000) -> np.ndarray:
    axes = []
    for d in grp.degrees:
        extent = radius ** d
        k = int(math.floor(extent / step))
        axes.append(np.arange(-k, k + 1, dtype=np.float64) * step)
    size = int(np.prod([len(a) for a in axes]))
    if size > cap:
        raise StructuralError(f"grid of {size} points exceeds cap {cap}")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    keep = quasi_norm_batch(grp.degrees, pts) <= radius + 1e-12
    return pts[keep]


def kappa_grid(coupling: CouplingSpec, deriv: PansuDerivative,
               x_samples: int, n_list, radius: float, grid_step: float,
               seed: int, eps: float = 0.3,
               workers: int = DEFAULT_WORKERS) -> KappaReport:
    """Per-sample sup distance over a grid between kappa and the derivative.

    kappa_{x,n}(g) rescales the cocycle at the lattice rounding of the
    n-dilated grid point; the report tracks the fraction of samples
    whose sup-distance over the whole grid stays below eps.
    """
    grp = coupling.ambient()
    ck = coupling_kernels(coupling)
    grid = _quasi_ball_grid(grp, radius, grid_step)
    phi_vals = np.stack([
        _float_coords(phi_apply(deriv, tuple(p))) for p in grid
    ])
    tab = ck.table
    graded_tab = law_table(grp.law_graded)
    rows = []
    for i, n in enumerate(n_list):
        n = int(n)
        dil = dilate_batch(grp.degrees, float(n), grid)
        digits, _ = reduce_batch(tab, ck.gamma_logs, ck.gamma_leads, dil,
                                 side="right", mode="round")
        jn = fold_digits(tab, ck.gamma_logs, digits, order="desc")
        x = domain_samples(coupling, x_samples, seed, workers, _TAG_KAPPA, i)
        sups = np.empty(x_samples, dtype=np.float64)
        for xi in range(x_samples):
            moved = translate_batch(tab, x[xi], jn, side="right")
            dg, _ = ck.reduce(moved)
            lam = ck.lambda_coords(dg)
            scaled = dilate_batch(grp.degrees, 1.0 / n, lam)
            diff = bch_batch(graded_tab, -scaled, phi_vals)
            sups[xi] = float(quasi_norm_batch(grp.degrees, diff).max())
        rows.append(ConvergenceRow(
            n=n, samples=x_samples,
            fraction_within_eps=float((sups < eps).mean()),
            median_proxy_dist=float(np.median(sups)),
            seed=seed,
        ))
    return KappaReport(
        coupling=coupling.name, radius=float(radius),
        grid_step=float(grid_step), grid_size=int(grid.shape[0]),
        eps=eps, rows=tuple(rows), seed=seed,
    )


# --------------------------------------------------------------- recurrence

@dataclass
class RecurrenceReport:
    coupling: str
    g: tuple
    delta: float
    horizon: int
    samples: int
    success_fraction: float
    first_depths: tuple[int, ...]
    seed: int

    def csv_rows(self):
        header = ["sample", "first_depth"]
        return header, [[i, d] for i, d in enumerate(self.first_depths)]


def _perturbation_words(lattice, max_len: int):
    grp = get_group(lattice.group)
    law = grp.law_group
    gens = [g.coords for g in lattice.generators]
    seen = {law.identity(): True}
    frontier = [law.identity()]
    out = [law.identity()]
    for _ in range(max_len):
        nxt = []
        for p in frontier:
            for s in gens:
                q = law.mul(p, s)
                if q not in seen:
                    seen[q] = True
                    nxt.append(q)
                    out.append(q)
        frontier = nxt
    return out


def recurrence_search(coupling: CouplingSpec, g, delta: float, box_a,
                      horizon: int, samples: int, seed: int,
                      workers: int = DEFAULT_WORKERS,
                      max_word_len: int = 3) -> RecurrenceReport:
    """Return-time search: lattice words close to g in the cone that send
    each sample back into the target sub-box.

    Candidates at depth n are the gamma_sequence approximant of g times
    lattice perturbation words of bounded length, filtered by the
    rescaled proxy distance to g; a sample succeeds at the first depth
    where some candidate's induced action lands it back in the box.
    Exhausting the horizon counts as failure, not an error.
    """
    grp = coupling.ambient()
    ck = coupling_kernels(coupling)
    lo = np.asarray([float(a) for a, _ in box_a], dtype=np.float64)
    hi = np.asarray([float(b) for _, b in box_a], dtype=np.float64)
    if lo.shape != (grp.dim,) or np.any(hi <= lo):
        raise StructuralError("box must be per-coordinate (low, high) pairs")
    rng = np.random.Generator(np.random.PCG64(seed_lineage(seed, _TAG_RECUR)))
    x = rng.uniform(lo, hi, size=(samples, grp.dim))
    dg0, _ = ck.reduce(x)
    if np.any(dg0 != 0):
        raise StructuralError("box is not inside the fundamental domain")
    target = _float_coords(g)
    perts = np.asarray(
        [[float(c) for c in p] for p in _perturbation_words(coupling.gamma_lattice, max_word_len)],
        dtype=np.float64,
    )
    law = grp.law_group
    tab = ck.table
    first = np.full(samples, -1, dtype=np.int64)
    active = np.arange(samples)
    for n in range(1, horizon + 1):
        gam = gamma_sequence(grp.grad, coupling.gamma_lattice, g, n)
        base = np.asarray([float(c) for c in gam.coords])
        cands = translate_batch(tab, base, perts, side="left")
        scaled = dilate_batch(grp.degrees, 1.0 / n, cands)
        dist = _graded_dist(grp, scaled, target)
        good = np.nonzero(dist < delta)[0]
        if good.size == 0 or active.size == 0:
            continue
        for ci in good:
            if active.size == 0:
                break
            moved = translate_batch(tab, cands[ci], x[active], side="left")
            _, xprime = ck.reduce(moved)
            inside = np.all((xprime >= lo) & (xprime < hi), axis=1)
            hit = active[inside]
            first[hit] = n
            active = active[~inside]
        if active.size == 0:
            break
    return RecurrenceReport(
        coupling=coupling.name, g=tuple(float(v) for v in target),
        delta=float(delta), horizon=int(horizon), samples=samples,
        success_fraction=float((first > 0).mean()),
        first_depths=tuple(int(v) for v in first),
        seed=seed,
    )


# ------------------------------------------------------ arbitrary elements

_SCHEDULES = {
    "n": lambda n: int(n),
    "sqrt": lambda n: max(1, math.isqrt(int(n))),
    "log": lambda n: max(1, int(math.log2(n))),
}


def parse_schedule(token):
    """Integer-valued depth schedules: 'n', 'sqrt', 'log', or 'k*n'."""
    if callable(token):
        return token
    t = str(token).strip().lower()
    if t in _SCHEDULES:
        return _SCHEDULES[t]
    if t.endswith("n") and t[:-1].isdigit():
        k = int(t[:-1])
        return lambda n, _k=k: _k * int(n)
    raise StructuralError(f"unknown schedule {token!r}")


def arbitrary_element_experiment(coupling: CouplingSpec, word, n_list,
                                 samples: int, seed: int,
                                 eps: float = 0.2,
                                 workers: int = DEFAULT_WORKERS,
                                 abar_samples: int = 1 << 14) -> ConvergenceReport:
    """Fixed-order generator words with diverging exponent schedules.

    word is a list of (generator index, schedule); the cocycle at
    gamma_n = prod s_i^{a_i(n)} is compared against the product of
    correspondingly dilated generator images, after rescaling both by
    the largest exponent.
    """
    grp = coupling.ambient()
    d = grp.abelian_dim
    law = grp.law_group
    graded = grp.law_graded
    parsed = []
    for idx, sched in word:
        idx = int(idx)
        if not 0 <= idx < 2 * d:
            raise StructuralError(f"generator index {idx} out of range")
        parsed.append((idx, parse_schedule(sched)))
    deriv = build_phi(coupling, abar_samples, seed, workers)
    images = deriv.table.entries
    rows = []
    for i, n in enumerate(n_list):
        n = int(n)
        exps = [sched(n) for _, sched in parsed]
        big = max(exps)
        gam = law.identity()
        tgt = tuple(0.0 for _ in range(grp.dim))
        for (idx, _), e in zip(parsed, exps):
            j = idx if idx < d else idx - d
            base = coupling.gamma_lattice.basis[j]
            if idx >= d:
                base = law.inv(base)
            gam = law.mul(gam, law.pow(base, e))
            tgt = graded.mul(tgt, tuple(e * v for v in images[idx]))
        x = domain_samples(coupling, samples, seed, workers, _TAG_WORD, i)
        lam = _cocycle_coords_batch(coupling, gam, x)
        scaled = dilate_batch(grp.degrees, 1.0 / big, lam)
        tgt_scaled = np.asarray(
            [float(c) * (1.0 / big) ** deg for c, deg in zip(tgt, grp.degrees)]
        )
        dist = _graded_dist(grp, scaled, tgt_scaled)
        rows.append(ConvergenceRow(
            n=n, samples=samples,
            fraction_within_eps=float((dist < eps).mean()),
            median_proxy_dist=float(np.median(dist)),
            seed=seed,
        ))
    return ConvergenceReport(
        experiment="arbitrary-word", rows=tuple(rows), seed=seed, eps=eps,
        meta={"coupling": coupling.name,
              "word": ";".join(f"{idx}" for idx, _ in parsed)},
    )
