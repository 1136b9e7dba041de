import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shieldnn.interval import Interval, cos, sin

finite = st.floats(-50, 50, allow_nan=False)


def ival(a, b):
    lo, hi = min(a, b), max(a, b)
    return Interval(lo, hi)


def samples(iv, n=33):
    return np.linspace(float(iv.lo), float(iv.hi), n)


def encloses(iv, values):
    return bool(np.all(iv.lo <= values) and np.all(values <= iv.hi))


def test_basic_arithmetic():
    x1, x2, x3 = Interval(-1, 2), Interval(2, 6), Interval(-6, -2)
    assert encloses(x1 + x2, np.array([1, 8]))
    assert encloses(x1 * x2, np.array([-6, 12]))
    assert float((x1 * x2).lo) <= -6 and float((x1 * x2).hi) >= 12
    assert encloses(x2 ** 2, np.array([4, 36]))
    assert encloses(x1 ** 2, np.array([0.0, 4.0]))
    assert encloses(x3 / x2, np.array([-3, -1 / 3]))


def test_reciprocal_across_zero_is_unbounded():
    r = Interval(-1, 1).reciprocal()
    assert np.isinf(r.lo) and np.isinf(r.hi)


def test_lo_above_hi_rejected():
    with pytest.raises(ValueError):
        Interval(2, 1)


def test_point_is_exact():
    p = Interval.point(0.1)
    assert float(p.lo) == float(p.hi) == 0.1


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite)
def test_binary_ops_enclose(a, b, c, d):
    x, y = ival(a, b), ival(c, d)
    xs, ys = np.meshgrid(samples(x, 9), samples(y, 9))
    assert encloses(x + y, xs + ys)
    assert encloses(x - y, xs - ys)
    assert encloses(x * y, xs * ys)
    if float(y.lo) > 1e-6 or float(y.hi) < -1e-6:
        assert encloses(x / y, xs / ys)


@settings(max_examples=200, deadline=None)
@given(finite, st.floats(0, 8), st.integers(0, 5))
def test_power_encloses(a, w, n):
    x = Interval(a, a + w)
    assert encloses(x ** n, samples(x) ** n)


@settings(max_examples=300, deadline=None)
@given(st.floats(-20, 20), st.floats(0, 7))
def test_trig_encloses(a, w):
    x = Interval(a, a + w)
    xs = np.append(samples(x, 257), [a, a + w])
    # include interior extrema explicitly
    for k in range(-8, 9):
        for c in (k * math.pi, k * math.pi + math.pi / 2):
            if a <= c <= a + w:
                xs = np.append(xs, c)
    assert encloses(sin(x), np.sin(xs))
    assert encloses(cos(x), np.cos(xs))
    assert float(sin(x).lo) >= -1.0 - 1e-12 and float(sin(x).hi) <= 1.0 + 1e-12


def test_trig_dispatch_on_plain_values():
    assert sin(0.3) == math.sin(0.3)
    np.testing.assert_array_equal(cos(np.array([0.0, 1.0])), np.cos([0.0, 1.0]))


def test_array_priority_defers_to_interval():
    out = np.array([1.0, 2.0]) * Interval([0.0, 1.0], [1.0, 2.0])
    assert isinstance(out, Interval)
