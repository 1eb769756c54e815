"""Vectorized kernels against the exact group law, across backends."""

from fractions import Fraction

import numpy as np
import pytest

from nilcone import available_backends, builtin_lattice, get_group, set_backend
from nilcone.geometry import quasi_norm_m
from nilcone.kernels import (
    active_backend,
    bch_batch,
    dilate_batch,
    fold_digits,
    law_table,
    quasi_norm_batch,
    reduce_batch,
    translate_batch,
)
from nilcone.wordmetric import digits_to_point, left_peel, right_peel

GROUPS = ("abelian2", "heisenberg3", "engel4", "heisenberg5", "free_nilpotent_2_3")

HAVE_NUMBA = "numba" in available_backends()

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not importable")


def dyadic_rows(rng, n, dim, span=4, denom=16):
    """Random points whose coordinates are exact in float64."""
    ints = rng.integers(-span * denom, span * denom + 1, size=(n, dim))
    return ints.astype(np.float64) / denom


def exact_mul_rows(law, x, y):
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        a = tuple(Fraction(v).limit_denominator(1 << 30) for v in x[i])
        b = tuple(Fraction(v).limit_denominator(1 << 30) for v in y[i])
        out[i] = [float(c) for c in law.mul(a, b)]
    return out


@pytest.mark.parametrize("name", GROUPS)
def test_bch_batch_matches_exact_law(name):
    grp = get_group(name)
    tab = law_table(grp.law_group)
    rng = np.random.default_rng(11)
    x = dyadic_rows(rng, 80, grp.dim)
    y = dyadic_rows(rng, 80, grp.dim)
    got = bch_batch(tab, x, y, backend="numpy")
    want = exact_mul_rows(grp.law_group, x, y)
    assert np.max(np.abs(got - want)) <= 1e-12


@pytest.mark.parametrize("name", GROUPS)
def test_graded_table_matches_exact_law(name):
    grp = get_group(name)
    tab = law_table(grp.law_graded)
    rng = np.random.default_rng(12)
    x = dyadic_rows(rng, 60, grp.dim)
    y = dyadic_rows(rng, 60, grp.dim)
    got = bch_batch(tab, x, y, backend="numpy")
    want = exact_mul_rows(grp.law_graded, x, y)
    assert np.max(np.abs(got - want)) <= 1e-12


@needs_numba
@pytest.mark.parametrize("name", GROUPS)
def test_backends_bitwise_identical_bch(name):
    grp = get_group(name)
    tab = law_table(grp.law_group)
    rng = np.random.default_rng(13)
    x = rng.normal(size=(200, grp.dim))
    y = rng.normal(size=(200, grp.dim))
    a = bch_batch(tab, x, y, backend="numpy")
    b = bch_batch(tab, x, y, backend="numba")
    assert a.tobytes() == b.tobytes()


@needs_numba
def test_backends_bitwise_identical_reduce():
    lat = builtin_lattice("heisenberg3")
    grp = get_group(lat.group)
    tab = law_table(grp.law_group)
    gen_logs, leads = lat.float_basis()
    rng = np.random.default_rng(14)
    omega = rng.normal(scale=5.0, size=(150, grp.dim))
    for side in ("right", "left"):
        for mode in ("floor", "round"):
            d1, r1 = reduce_batch(tab, gen_logs, leads, omega, side=side,
                                  mode=mode, backend="numpy")
            d2, r2 = reduce_batch(tab, gen_logs, leads, omega, side=side,
                                  mode=mode, backend="numba")
            assert np.array_equal(d1, d2)
            assert r1.tobytes() == r2.tobytes()


@needs_numba
def test_backends_bitwise_identical_translate_and_fold():
    lat = builtin_lattice("engel4")
    grp = get_group(lat.group)
    tab = law_table(grp.law_group)
    gen_logs, _ = lat.float_basis()
    rng = np.random.default_rng(15)
    g = rng.normal(size=grp.dim)
    x = rng.normal(size=(120, grp.dim))
    digits = rng.integers(-3, 4, size=(60, grp.dim)).astype(np.float64)
    for side in ("left", "right"):
        a = translate_batch(tab, g, x, side=side, backend="numpy")
        b = translate_batch(tab, g, x, side=side, backend="numba")
        assert a.tobytes() == b.tobytes()
    for order in ("asc", "desc"):
        a = fold_digits(tab, gen_logs, digits, order=order, backend="numpy")
        b = fold_digits(tab, gen_logs, digits, order=order, backend="numba")
        assert a.tobytes() == b.tobytes()


def test_set_backend_controls_default():
    prev = active_backend()
    try:
        set_backend("numpy")
        assert active_backend() == "numpy"
        if HAVE_NUMBA:
            set_backend("numba")
            assert active_backend() == "numba"
    finally:
        set_backend(prev)
    with pytest.raises(ValueError):
        set_backend("gpu")


@pytest.mark.parametrize("side", ["right", "left"])
@pytest.mark.parametrize("mode", ["floor", "round"])
def test_reduce_batch_matches_exact_peel(side, mode):
    lat = builtin_lattice("heisenberg3")
    grp = get_group(lat.group)
    tab = law_table(grp.law_group)
    gen_logs, leads = lat.float_basis()
    rng = np.random.default_rng(16)
    omega = dyadic_rows(rng, 50, grp.dim, span=3, denom=8)
    digits, rem = reduce_batch(tab, gen_logs, leads, omega, side=side,
                               mode=mode, backend="numpy")
    peel = right_peel if side == "right" else left_peel
    for i in range(omega.shape[0]):
        coords = tuple(Fraction(v).limit_denominator(1 << 20) for v in omega[i])
        d, r = peel(lat, coords, mode=mode)
        assert tuple(digits[i]) == d
        assert np.max(np.abs(rem[i] - [float(c) for c in r])) <= 1e-10


def test_fold_digits_matches_exact_word():
    lat = builtin_lattice("engel4")
    grp = get_group(lat.group)
    tab = law_table(grp.law_group)
    gen_logs, _ = lat.float_basis()
    rng = np.random.default_rng(17)
    digits = rng.integers(-4, 5, size=(40, grp.dim))
    for order in ("asc", "desc"):
        folded = fold_digits(tab, gen_logs, digits.astype(np.float64), order=order)
        for i in range(digits.shape[0]):
            want = digits_to_point(lat, tuple(int(c) for c in digits[i]), order=order)
            ref = np.asarray([float(c) for c in want.coords])
            assert np.max(np.abs(folded[i] - ref)) <= 1e-9


def test_fold_digits_sign_flips_exponents():
    lat = builtin_lattice("heisenberg3")
    grp = get_group(lat.group)
    tab = law_table(grp.law_group)
    gen_logs, _ = lat.float_basis()
    digits = np.asarray([[2.0, -1.0, 3.0]])
    plus = fold_digits(tab, gen_logs, digits, order="asc", sign=1)
    minus = fold_digits(tab, gen_logs, -digits, order="asc", sign=-1)
    assert plus.tobytes() == minus.tobytes()


@pytest.mark.parametrize("name", GROUPS)
def test_dilate_and_quasi_norm_batch_match_scalar(name):
    grp = get_group(name)
    degrees = np.asarray(grp.grad.degrees, dtype=np.float64)
    rng = np.random.default_rng(18)
    x = rng.normal(size=(30, grp.dim))
    for t in (0.5, 2.0, 3.0):
        got = dilate_batch(degrees, t, x)
        for i in range(x.shape[0]):
            want = [float(t) ** d * v for d, v in zip(grp.grad.degrees, x[i])]
            assert np.max(np.abs(got[i] - want)) <= 1e-12
    norms = quasi_norm_batch(degrees, x)
    for i in range(x.shape[0]):
        assert abs(norms[i] - quasi_norm_m(grp.grad, tuple(x[i]))) <= 1e-12


def test_translate_batch_matches_mul():
    grp = get_group("heisenberg5")
    law = grp.law_group
    tab = law_table(law)
    rng = np.random.default_rng(19)
    g = dyadic_rows(rng, 1, grp.dim)[0]
    x = dyadic_rows(rng, 25, grp.dim)
    left = translate_batch(tab, g, x, side="left")
    right = translate_batch(tab, g, x, side="right")
    gt = tuple(Fraction(v).limit_denominator(1 << 20) for v in g)
    for i in range(x.shape[0]):
        xt = tuple(Fraction(v).limit_denominator(1 << 20) for v in x[i])
        want_l = [float(c) for c in law.mul(gt, xt)]
        want_r = [float(c) for c in law.mul(xt, gt)]
        assert np.max(np.abs(left[i] - want_l)) <= 1e-12
        assert np.max(np.abs(right[i] - want_r)) <= 1e-12


def test_reduce_batch_rejects_bad_shape():
    lat = builtin_lattice("heisenberg3")
    grp = get_group(lat.group)
    tab = law_table(grp.law_group)
    gen_logs, leads = lat.float_basis()
    with pytest.raises(ValueError):
        reduce_batch(tab, gen_logs, leads, np.zeros(3))
