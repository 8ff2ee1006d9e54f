from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from topk_eigen.fixed import (FixedMode, FloatMode, QFormat, dot_fixed, fixed_add, fixed_mul, from_fixed,
                              parse_arith, rne_shift, to_fixed)

Q = QFormat(30)
in_range = st.floats(-1.999, 1.999, allow_nan=False)


def test_qformat():
    assert Q.total_bits == 32
    assert Q.max_value == pytest.approx(2 - 2 ** -30, abs=0)
    assert Q.min_raw * Q.resolution == -2.0
    for bad in (0, 31):
        with pytest.raises(ValueError):
            QFormat(bad)


def test_to_fixed_examples():
    assert to_fixed(0.0, Q) == 0
    assert to_fixed(0.5, Q) == 2 ** 29
    assert to_fixed(3.7, Q) == Q.max_raw
    assert to_fixed(-3.7, Q) == Q.min_raw


def test_round_half_even():
    q = QFormat(2)
    # 0.125 * 4 = 0.5 -> 0, 0.375 * 4 = 1.5 -> 2
    assert to_fixed(0.125, q) == 0 and to_fixed(0.375, q) == 2
    assert list(rne_shift(np.array([2, 6, -2, -6, 3]), 2)) == [0, 2, 0, -2, 1]


def test_mul_add_examples():
    h = to_fixed(0.5, Q)
    assert from_fixed(fixed_mul(h, h, Q), Q) == 0.25
    assert fixed_add(Q.max_raw, Q.max_raw, Q) == Q.max_raw
    assert fixed_add(Q.min_raw, Q.min_raw, Q) == Q.min_raw


@given(in_range, in_range)
def test_mul_error_and_commutativity(a, b):
    ra, rb = to_fixed(a, Q), to_fixed(b, Q)
    p = fixed_mul(ra, rb, Q)
    assert p == fixed_mul(rb, ra, Q)
    exact = Fraction(ra * rb, 2 ** 60)
    if abs(exact) < 2 - 2 ** -30:
        assert abs(Fraction(p, 2 ** 30) - exact) <= Fraction(1, 2 ** 31)
    assert fixed_add(ra, rb, Q) == fixed_add(rb, ra, Q)


@given(st.integers(-(2 ** 40), 2 ** 40), st.integers(1, 30))
def test_rne_shift_matches_fraction(p, f):
    got = int(rne_shift(np.array([p], dtype=np.int64), f)[0])
    assert got == round(Fraction(p, 2 ** f))  # Fraction rounding is half-even


def test_dot_examples():
    e = to_fixed(1.0, Q)
    x = np.array([0, e, 0])
    assert from_fixed(dot_fixed(x, x, Q), Q) == 1.0
    assert dot_fixed(np.array([e, 0, e, 0]), np.array([0, e, 0, e]), Q) == 0
    with pytest.raises(ValueError):
        dot_fixed(np.zeros(2, dtype=np.int64), np.zeros(3, dtype=np.int64), Q)


def test_dot_random_unit_vectors(rng):
    x, y = rng.normal(size=1000), rng.normal(size=1000)
    x /= np.linalg.norm(x)
    y /= np.linalg.norm(y)
    fm = FixedMode(Q)
    got = from_fixed(dot_fixed(fm.encode(x), fm.encode(y), Q), Q)
    assert abs(got - x @ y) <= 1e-6


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=50), st.lists(st.floats(-1, 1), min_size=1, max_size=50))
def test_dot_exact_single_rounding(xs, ys):
    n = min(len(xs), len(ys))
    fm = FixedMode(Q)
    rx, ry = fm.encode(xs[:n]), fm.encode(ys[:n])
    exact = sum(Fraction(int(a) * int(b), 2 ** 60) for a, b in zip(rx, ry))
    got = Fraction(dot_fixed(rx, ry, Q), 2 ** 30)
    if abs(exact) < 1.9:
        assert abs(got - exact) <= Fraction(1, 2 ** 31)
        # bound against the real-valued dot of the unquantized inputs
        real = sum(Fraction(a) * Fraction(b) for a, b in zip(xs[:n], ys[:n]))
        assert abs(float(got - real)) <= n * 2 ** -31 * 2 + 2 ** -31


def test_saturation_counter():
    fm = FixedMode(Q)
    fm.encode([0.5, 3.0, -5.0])
    assert fm.saturations == 2
    fm.add(np.array([Q.max_raw]), np.array([1]))
    assert fm.saturations == 3


def test_monotone_precision(rng):
    x = rng.uniform(-1, 1, 200)
    y = rng.uniform(-1, 1, 200) / 20
    errs = []
    for f in (16, 24, 30):
        fm = FixedMode(QFormat(f))
        errs.append(abs(fm.to_float(fm.dot(fm.encode(x), fm.encode(y))) - x @ y))
    assert errs[0] > errs[1] > errs[2]


def test_parse_arith():
    assert parse_arith("f64") == FloatMode(np.float64)
    assert parse_arith("f32").dtype == np.float32
    assert parse_arith("fixed").q.frac_bits == 30
    assert parse_arith("fixed:20").q.frac_bits == 20
    for bad in ("f16", "fixed:x", "fixed:40"):
        with pytest.raises(ValueError):
            parse_arith(bad)
