"""Kinematic bicycle model in obstacle-relative coordinates.

State is ``(r, xi, v)``: distance to the obstacle centre, orientation of the
vehicle relative to the line of sight (``xi = 0`` points straight away from the
obstacle, ``xi = +-pi`` straight at it) and speed. Control is ``(a, beta)``
where ``beta`` is the slip angle at the centre of mass, a bijective function of
the front-wheel steering angle.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, SingularityError

_ROUNDTRIP_SLACK = 1e-12


def wrap_angle(x):
    """Wrap to ``[-pi, pi)``. Works on floats and arrays."""
    if np.ndim(x):
        return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi
    return (x + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the vehicle; ``beta_max`` is derived."""

    l_f: float
    l_r: float
    delta_f_max: float
    v_max: float
    beta_max: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.l_r > 0 and self.l_f > 0):
            raise DomainError("wheelbase lengths must be positive")
        if self.l_f != self.l_r:
            raise DomainError(f"l_f must equal l_r (got {self.l_f} and {self.l_r})")
        if not 0.0 < self.delta_f_max < math.pi / 2:
            raise DomainError("delta_f_max must lie in (0, pi/2)")
        if not self.v_max > 0:
            raise DomainError("v_max must be positive")
        ratio = self.l_r / (self.l_f + self.l_r)
        object.__setattr__(self, "beta_max", math.atan(ratio * math.tan(self.delta_f_max)))

    @property
    def ratio(self) -> float:
        return self.l_r / (self.l_f + self.l_r)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("beta_max")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleParams":
        keys = {"l_f", "l_r", "delta_f_max", "v_max"}
        unknown = set(d) - keys
        if unknown:
            raise DomainError(f"unknown vehicle keys: {sorted(unknown)}")
        missing = keys - set(d)
        if missing:
            raise DomainError(f"missing vehicle keys: {sorted(missing)}")
        return cls(**{k: float(d[k]) for k in keys})


@dataclass(frozen=True)
class RelState:
    r: float
    xi: float
    v: float

    def __post_init__(self):
        if not self.r > 0:
            raise SingularityError(f"r must be positive, got {self.r}")
        if not -math.pi <= self.xi <= math.pi:
            raise DomainError(f"xi must lie in [-pi, pi], got {self.xi}")
        if self.v < 0:
            raise DomainError(f"speed must be non-negative, got {self.v}")

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.xi, self.v])


@dataclass(frozen=True)
class Control:
    a: float
    beta: float

    def check(self, params: VehicleParams) -> "Control":
        if abs(self.beta) > params.beta_max + _ROUNDTRIP_SLACK:
            raise DomainError(f"|beta| = {abs(self.beta)} exceeds beta_max = {params.beta_max}")
        return self


def beta_from_delta(delta_f, params: VehicleParams):
    """Slip angle for a front-wheel steering angle."""
    if np.any(np.abs(delta_f) > params.delta_f_max + _ROUNDTRIP_SLACK):
        raise DomainError("steering angle outside [-delta_f_max, delta_f_max]")
    return np.arctan(params.ratio * np.tan(delta_f))


def delta_from_beta(beta, params: VehicleParams):
    """Inverse of :func:`beta_from_delta`."""
    if np.any(np.abs(beta) > params.beta_max + _ROUNDTRIP_SLACK):
        raise DomainError("beta outside [-beta_max, beta_max]")
    return np.arctan(np.tan(beta) / params.ratio)


def dynamics(state: RelState, control: Control, params: VehicleParams) -> np.ndarray:
    """Time derivative ``(r_dot, xi_dot, v_dot)``."""
    if state.r <= 0:
        raise SingularityError("r <= 0")
    return _rhs(state.r, state.xi, state.v, control.a, control.beta, params.l_r)


def _rhs(r, xi, v, a, beta, l_r):
    d = xi - beta
    r_dot = v * np.cos(d)
    xi_dot = -(v / r) * np.sin(d) - (v / l_r) * np.sin(beta)
    v_dot = a + 0.0 * v
    return np.array([r_dot, xi_dot, v_dot])


def rk4_arrays(r, xi, v, a, beta, l_r, dt):
    """One classical RK4 step on (possibly vectorised) raw state arrays.

    No wrapping or clamping happens here; returns the new ``(r, xi, v)`` and a
    boolean flag (array) that is True where some stage saw ``r <= 0``.
    """
    bad = r <= 0
    k1 = _rhs(r, xi, v, a, beta, l_r)
    r2 = r + 0.5 * dt * k1[0]
    bad = bad | (r2 <= 0)
    k2 = _rhs(r2, xi + 0.5 * dt * k1[1], v + 0.5 * dt * k1[2], a, beta, l_r)
    r3 = r + 0.5 * dt * k2[0]
    bad = bad | (r3 <= 0)
    k3 = _rhs(r3, xi + 0.5 * dt * k2[1], v + 0.5 * dt * k2[2], a, beta, l_r)
    r4 = r + dt * k3[0]
    bad = bad | (r4 <= 0)
    k4 = _rhs(r4, xi + dt * k3[1], v + dt * k3[2], a, beta, l_r)
    inc = (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0)
    r_new = r + inc[0]
    bad = bad | (r_new <= 0)
    return r_new, xi + inc[1], v + inc[2], bad


def integrate_step(state: RelState, control: Control, params: VehicleParams, dt: float) -> RelState:
    """Advance one RK4 step with the control held constant.

    ``xi`` is re-wrapped to ``[-pi, pi)`` and ``v`` clamped to ``[0, v_max]``
    afterwards.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        r, xi, v, bad = rk4_arrays(state.r, state.xi, state.v, control.a, control.beta, params.l_r, dt)
    if bad or not np.isfinite(r):
        raise SingularityError("trajectory reached r <= 0 during the step")
    return RelState(float(r), float(wrap_angle(float(xi))), float(min(max(v, 0.0), params.v_max)))
