"""Candidate barrier family, class-K gain and the on-barrier Lie derivative.

Notation used in this module (all functions of the orientation ``xi`` and
steering slip ``beta``)::

    rho(xi)  = 1 / r_min(xi) = (sigma cos(xi/2) + 1 - sigma) / r_bar
    k        = sigma / (2 r_bar),   m = k / l_r
    L(xi, b) = k sin(xi/2) rho sin(xi-b) + m sin(xi/2) sin(b) + rho^2 cos(xi-b)

``L`` is the Lie derivative of ``h`` evaluated at ``r = r_min(xi)`` divided by
the speed ``v`` (its sign does not depend on ``v > 0``). It is a sum of
products ``F(xi) * G(xi - beta)`` and ``F(xi) * H(beta)``, so every mixed
partial follows from the Leibniz rule applied to explicit derivative tables of
the factors; :func:`lie_partial` implements that closed form up to third order.
All evaluators accept floats, numpy arrays or :class:`~shieldnn.interval.Interval`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DegenerateSlopeError, DomainError
from .interval import cos, is_interval, lift, sin
from .kbm import RelState, VehicleParams

DEGENERATE_SLOPE_TOL = 1e-12


def k_min_value(r_bar: float, sigma: float) -> float:
    return max(1.0, 1.0 / r_bar) * (sigma / (2.0 * r_bar) + 2.0)


@dataclass(frozen=True)
class BarrierParams:
    """Safety radius ``r_bar``, shape parameter ``sigma`` and class-K gain ``K``.

    ``K`` defaults to the smallest gain for which the Lie derivative plus
    ``alpha(h)`` is monotone in ``r``.
    """

    r_bar: float
    sigma: float
    K: float | None = None

    def __post_init__(self):
        if not self.r_bar > 0:
            raise DomainError("r_bar must be positive")
        if not 0.0 < self.sigma < 1.0:
            raise DomainError("sigma must lie in (0, 1)")
        kmin = k_min_value(self.r_bar, self.sigma)
        if self.K is None:
            object.__setattr__(self, "K", kmin)
        elif self.K < kmin:
            raise DomainError(f"K = {self.K} is below the monotonicity bound {kmin}")

    def to_dict(self) -> dict:
        return {"r_bar": self.r_bar, "sigma": self.sigma, "k": self.K}

    @classmethod
    def from_dict(cls, d: dict) -> "BarrierParams":
        unknown = set(d) - {"r_bar", "sigma", "k"}
        if unknown:
            raise DomainError(f"unknown barrier keys: {sorted(unknown)}")
        k = d.get("k")
        return cls(float(d["r_bar"]), float(d["sigma"]), None if k is None else float(k))


@dataclass(frozen=True)
class LieContext:
    vehicle: VehicleParams
    barrier: BarrierParams
    _consts: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = self.barrier
        k = b.sigma / (2.0 * b.r_bar)
        object.__setattr__(self, "_consts", (b.sigma, b.r_bar, self.vehicle.l_r, k))

    @property
    def beta_max(self) -> float:
        return self.vehicle.beta_max

    def to_dict(self) -> dict:
        return {"vehicle": self.vehicle.to_dict(), "barrier": self.barrier.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "LieContext":
        return cls(VehicleParams.from_dict(d["vehicle"]), BarrierParams.from_dict(d["barrier"]))


def reference_context() -> LieContext:
    """Vehicle with l_f = l_r = 2 m, 45 deg steering, 20 m/s; r_bar = 4 m, sigma = 0.48."""
    return LieContext(VehicleParams(2.0, 2.0, math.pi / 4, 20.0), BarrierParams(4.0, 0.48))


# ---------------------------------------------------------------------------
# barrier, r_min, class-K
# ---------------------------------------------------------------------------

def h(state: RelState, ctx: LieContext) -> float:
    b = ctx.barrier
    return (b.sigma * math.cos(state.xi / 2) + 1 - b.sigma) / b.r_bar - 1.0 / state.r


def h_arrays(r, xi, ctx: LieContext):
    b = ctx.barrier
    return (b.sigma * np.cos(xi / 2) + 1 - b.sigma) / b.r_bar - 1.0 / r


def r_min(xi, ctx: LieContext):
    """Radius of the zero level set of ``h`` at orientation ``xi``."""
    b = ctx.barrier
    return b.r_bar / (b.sigma * np.cos(np.asarray(xi) / 2) + 1 - b.sigma)


def alpha(x, ctx: LieContext):
    return ctx.barrier.K * ctx.vehicle.v_max * x


def k_min(ctx: LieContext) -> float:
    return k_min_value(ctx.barrier.r_bar, ctx.barrier.sigma)


def lie_general(state: RelState, beta: float, ctx: LieContext) -> float:
    """grad h . f at an arbitrary state (no class-K term)."""
    return float(lie_general_arrays(state.r, state.xi, state.v, beta, ctx))


def lie_general_arrays(r, xi, v, beta, ctx: LieContext):
    sigma, r_bar, l_r, k = ctx._consts
    s = np.sin(xi / 2)
    d = xi - beta
    return v * (k / r * s * np.sin(d) + k / l_r * s * np.sin(beta) + np.cos(d) / r**2)


def lie_plus_alpha(state: RelState, beta: float, ctx: LieContext) -> float:
    return lie_general(state, beta, ctx) + alpha(h(state, ctx), ctx)


def lie_plus_alpha_arrays(r, xi, v, beta, ctx: LieContext):
    return lie_general_arrays(r, xi, v, beta, ctx) + alpha(h_arrays(r, xi, ctx), ctx)


# ---------------------------------------------------------------------------
# on-barrier Lie derivative and its partials
# ---------------------------------------------------------------------------

def _cycle(f0, f1, n):
    # n-th derivative of sin-like (f0=sin, f1=cos) functions: f, f', -f, -f'
    n %= 4
    return (f0, f1, -f0, -f1)[n]


def _factor_tables(xi, ctx: LieContext, order: int, enclose: bool):
    """Derivatives up to ``order`` of the xi-only factors phi = s*rho and psi = rho^2."""
    sigma, r_bar, l_r, k = ctx._consts
    if enclose:
        sigma, r_bar, l_r = lift(sigma), lift(r_bar), lift(l_r)
        k = sigma / (2.0 * r_bar)
    s, c = sin(xi / 2), cos(xi / 2)
    # half-angle sine: s, c/2, -s/4, -c/8
    sd = [s, c / 2, -s / 4, -c / 8]
    rho = (sigma * c + 1 - sigma) / r_bar
    rd = [rho, -k * s, -k * c / 2, k * s / 4]
    phi = [sum(comb(n, j) * sd[n - j] * rd[j] for j in range(n + 1)) for n in range(order + 1)]
    psi = [sum(comb(n, j) * rd[n - j] * rd[j] for j in range(n + 1)) for n in range(order + 1)]
    m = k / l_r
    return k, m, sd, phi, psi


def lie_partial(xi, beta, ctx: LieContext, d_xi: int = 0, d_beta: int = 0):
    """``d^(d_xi+d_beta) L / dxi^d_xi dbeta^d_beta`` of the v-normalised on-barrier Lie derivative.

    Total order is limited to 3.
    """
    if d_xi < 0 or d_beta < 0 or d_xi + d_beta > 3:
        raise ValueError("partial derivative order must be between 0 and 3")
    k, m, sd, phi, psi = _factor_tables(xi, ctx, d_xi, is_interval(xi, beta))
    u = xi - beta
    su, cu = sin(u), cos(u)
    sign_b = -1.0 if d_beta % 2 else 1.0
    total = 0.0
    for j in range(d_xi + 1):
        n = d_xi - j + d_beta
        w = comb(d_xi, j) * sign_b
        # d^n sin(u) and d^n cos(u) (cos(u) = sin(u + pi/2))
        total = total + w * (k * phi[j] * _cycle(su, cu, n) + psi[j] * _cycle(cu, -su, n))
    sb, cb = sin(beta), cos(beta)
    total = total + m * sd[d_xi] * _cycle(sb, cb, d_beta)
    return total


def lie_on_barrier(xi, beta, v, ctx: LieContext):
    """Lie derivative of ``h`` at ``(r_min(xi), xi, v)``; ``alpha(h)`` vanishes there."""
    return v * lie_partial(xi, beta, ctx)


def lie_d_xi(xi, beta, ctx):
    return lie_partial(xi, beta, ctx, 1, 0)


def lie_d_beta(xi, beta, ctx):
    return lie_partial(xi, beta, ctx, 0, 1)


def lie_d2_xi(xi, beta, ctx):
    return lie_partial(xi, beta, ctx, 2, 0)


def lie_d2_beta(xi, beta, ctx):
    return lie_partial(xi, beta, ctx, 0, 2)


def lie_d2_xibeta(xi, beta, ctx):
    return lie_partial(xi, beta, ctx, 1, 1)


# ---------------------------------------------------------------------------
# implicit boundary slopes
# ---------------------------------------------------------------------------

def _check_denominator(lb):
    if is_interval(lb):
        return
    if np.any(np.abs(lb) < DEGENERATE_SLOPE_TOL):
        raise DegenerateSlopeError("dL/dbeta vanishes; boundary slope undefined")


def gamma_prime(xi, beta, ctx):
    """Slope of the zero contour of ``L`` through ``(xi, beta)``."""
    lx = lie_partial(xi, beta, ctx, 1, 0)
    lb = lie_partial(xi, beta, ctx, 0, 1)
    _check_denominator(lb)
    return -lx / lb


def _curvature_numerator(p):
    lx, lb, lxx, lxb, lbb = p["x"], p["b"], p["xx"], p["xb"], p["bb"]
    return lxx * lb**2 - 2.0 * lx * lb * lxb + lx**2 * lbb


def _partials(xi, beta, ctx, names):
    orders = {"x": (1, 0), "b": (0, 1), "xx": (2, 0), "xb": (1, 1), "bb": (0, 2),
              "xxx": (3, 0), "xxb": (2, 1), "xbb": (1, 2), "bbb": (0, 3)}
    return {n: lie_partial(xi, beta, ctx, *orders[n]) for n in names}


def gamma_second(xi, beta, ctx):
    """Second derivative of the implicit boundary through ``(xi, beta)``.

    Equals ``d/dxi gamma' + (d/dbeta gamma') gamma'``, which simplifies to
    ``-(Lxx Lb^2 - 2 Lx Lb Lxb + Lx^2 Lbb) / Lb^3``.
    """
    p = _partials(xi, beta, ctx, ("x", "b", "xx", "xb", "bb"))
    _check_denominator(p["b"])
    return -_curvature_numerator(p) / p["b"] ** 3


def gamma_second_grad(xi, beta, ctx):
    """Gradient ``(d/dxi, d/dbeta)`` of :func:`gamma_second`."""
    p = _partials(xi, beta, ctx, ("x", "b", "xx", "xb", "bb", "xxx", "xxb", "xbb", "bbb"))
    lx, lb, lxx, lxb, lbb = p["x"], p["b"], p["xx"], p["xb"], p["bb"]
    n = _curvature_numerator(p)
    n_x = (p["xxx"] * lb**2 - 2.0 * lx * lxb**2 - 2.0 * lx * lb * p["xxb"]
           + 2.0 * lx * lxx * lbb + lx**2 * p["xbb"])
    n_b = (p["xxb"] * lb**2 + 2.0 * lxx * lb * lbb - 2.0 * lb * lxb**2
           - 2.0 * lx * lb * p["xbb"] + lx**2 * p["bbb"])
    lb4 = lb**4
    g_x = -(n_x * lb - 3.0 * n * lxb) / lb4
    g_b = -(n_b * lb - 3.0 * n * lbb) / lb4
    return g_x, g_b
