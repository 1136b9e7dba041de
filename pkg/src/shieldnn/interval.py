"""Vectorised interval arithmetic with outward rounding.

An :class:`Interval` wraps two numpy arrays ``lo`` and ``hi`` of identical
shape, so a single object can carry the enclosures of many grid cells at once.
Every arithmetic result is widened by one ulp in each direction, and the
transcendental functions by a fixed absolute slack that dominates the error of
the platform ``sin``/``cos``. The enclosures are therefore valid for the real
numbers, not only for the floating point evaluation.

The module-level :func:`sin` and :func:`cos` dispatch on their argument, which
lets the closed-form expressions in :mod:`shieldnn.barrier` be evaluated on
floats, numpy arrays or intervals without change.
"""

from __future__ import annotations

import numpy as np

_INF = np.inf
# numpy's float64 sin/cos are accurate to a few ulp; |sin| <= 1 so a fixed
# absolute pad of 8 ulp(1) covers them.
_TRIG_PAD = 8 * np.finfo(float).eps
_TWO_PI = 2.0 * np.pi


def _down(x):
    return np.nextafter(x, -_INF)


def _up(x):
    return np.nextafter(x, _INF)


def _clean(lo, hi):
    # 0 * inf and inf - inf produce nan; an unknown bound is unbounded.
    lo = np.where(np.isnan(lo), -_INF, lo)
    hi = np.where(np.isnan(hi), _INF, hi)
    return lo, hi


class Interval:
    """Closed interval ``[lo, hi]`` (elementwise over numpy arrays)."""

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000  # make ndarray (op) Interval defer to us

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=float)
        hi = lo if hi is None else np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            raise ValueError("interval with lo > hi")
        self.lo = lo
        self.hi = hi

    @classmethod
    def point(cls, x) -> "Interval":
        """Degenerate interval; exact because ``x`` is already a float."""
        return cls(x, x)

    @classmethod
    def _raw(cls, lo, hi) -> "Interval":
        obj = cls.__new__(cls)
        lo, hi = _clean(lo, hi)
        obj.lo = lo
        obj.hi = hi
        return obj

    # -- inspection -----------------------------------------------------
    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self):
        return self.hi - self.lo

    def mag(self):
        """Upper bound on ``|x|`` over the interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, x) -> np.ndarray:
        return (self.lo <= x) & (x <= self.hi)

    def __repr__(self) -> str:
        if np.ndim(self.lo) == 0:
            return f"Interval({float(self.lo)!r}, {float(self.hi)!r})"
        return f"Interval(shape={np.shape(self.lo)})"

    def __getitem__(self, idx) -> "Interval":
        return Interval._raw(self.lo[idx], self.hi[idx])

    # -- arithmetic -----------------------------------------------------
    @staticmethod
    def _coerce(x) -> "Interval":
        if isinstance(x, Interval):
            return x
        return Interval.point(x)

    def __neg__(self) -> "Interval":
        return Interval._raw(-self.hi, -self.lo)

    def __pos__(self) -> "Interval":
        return self

    def __add__(self, other) -> "Interval":
        o = self._coerce(other)
        with np.errstate(invalid="ignore"):
            return Interval._raw(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "Interval":
        o = self._coerce(other)
        with np.errstate(invalid="ignore"):
            return Interval._raw(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other) -> "Interval":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Interval":
        o = self._coerce(other)
        with np.errstate(invalid="ignore"):
            p = np.stack([self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi])
        p = np.where(np.isnan(p), 0.0, p)  # 0 * inf inside a product bound
        return Interval._raw(_down(p.min(axis=0)), _up(p.max(axis=0)))

    __rmul__ = __mul__

    def reciprocal(self) -> "Interval":
        with np.errstate(divide="ignore", invalid="ignore"):
            straddles = (self.lo <= 0.0) & (self.hi >= 0.0)
            lo = np.where(straddles, -_INF, _down(1.0 / self.hi))
            hi = np.where(straddles, _INF, _up(1.0 / self.lo))
        return Interval._raw(lo, hi)

    def __truediv__(self, other) -> "Interval":
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other) -> "Interval":
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, n: int) -> "Interval":
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise TypeError("only non-negative integer powers are supported")
        if n == 0:
            return Interval._raw(np.ones_like(self.lo), np.ones_like(self.hi))
        if n == 1:
            return self
        a, b = self.lo**n, self.hi**n
        pad = lambda x, d: np.nextafter(np.nextafter(x, d), d)  # noqa: E731
        if n % 2:
            return Interval._raw(pad(a, -_INF), pad(b, _INF))
        straddles = (self.lo <= 0.0) & (self.hi >= 0.0)
        lo = np.where(straddles, 0.0, pad(np.minimum(a, b), -_INF))
        lo = np.maximum(lo, 0.0)
        return Interval._raw(lo, pad(np.maximum(a, b), _INF))

    # -- transcendental -------------------------------------------------
    def _hits(self, phase: float) -> np.ndarray:
        """True where the interval contains ``phase + 2 k pi`` for some k."""
        slack = 1e-12 * (1.0 + np.maximum(np.abs(self.lo), np.abs(self.hi)))
        k_lo = np.ceil((self.lo - slack - phase) / _TWO_PI)
        k_hi = np.floor((self.hi + slack - phase) / _TWO_PI)
        return k_lo <= k_hi

    def _trig(self, fn, peak: float, trough: float) -> "Interval":
        a, b = fn(self.lo), fn(self.hi)
        lo = np.minimum(a, b) - _TRIG_PAD
        hi = np.maximum(a, b) + _TRIG_PAD
        lo = np.where(self._hits(trough), -1.0, lo)
        hi = np.where(self._hits(peak), 1.0, hi)
        wide = ~np.isfinite(self.width) | (self.width >= _TWO_PI)
        lo = np.where(wide, -1.0, np.maximum(lo, -1.0))
        hi = np.where(wide, 1.0, np.minimum(hi, 1.0))
        return Interval._raw(lo, hi)

    def sin(self) -> "Interval":
        return self._trig(np.sin, 0.5 * np.pi, -0.5 * np.pi)

    def cos(self) -> "Interval":
        return self._trig(np.cos, 0.0, np.pi)


def sin(x):
    """``sin`` for floats, arrays and intervals."""
    return x.sin() if isinstance(x, Interval) else np.sin(x)


def cos(x):
    """``cos`` for floats, arrays and intervals."""
    return x.cos() if isinstance(x, Interval) else np.cos(x)


def is_interval(*xs) -> bool:
    return any(isinstance(x, Interval) for x in xs)


def lift(x):
    """Turn a float parameter into a point interval (used in interval mode)."""
    return Interval.point(x)
