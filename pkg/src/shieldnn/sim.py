"""Closed-loop simulation of the relative KBM with an optional safety filter.

Episodes are integrated in lock-step as numpy batches (one RK4 step for every
live episode at once); a single episode is simply a batch of one, so results
do not depend on how a campaign is split.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .barrier import LieContext, h_arrays, r_min
from .errors import ConfigurationError, DomainError
from .kbm import RelState, rk4_arrays, wrap_angle
from .synthesis import FilterNetwork

TRAJECTORY_HEADER = ("t", "r", "xi", "v", "a", "beta_in", "beta_out", "intervened")
EPISODE_HEADER = ("seed", "controller", "filter_on", "min_r", "min_h", "collided", "interventions", "steps")


# ---------------------------------------------------------------------------
# controllers
# ---------------------------------------------------------------------------

class Controller:
    """Batch controller: maps state arrays to ``(a, beta)`` arrays."""

    name = "controller"

    def reset(self, seeds) -> None:
        pass

    def __call__(self, r, xi, v, step: int):
        raise NotImplementedError


class Adversarial(Controller):
    """Turn toward the obstacle as hard as allowed at full throttle."""

    name = "adversarial"

    def __init__(self, beta_max, gain=4.0, throttle=2.0):
        self.beta_max, self.gain, self.throttle = beta_max, gain, throttle

    def __call__(self, r, xi, v, step):
        beta = np.clip(self.gain * wrap_angle(xi - np.pi), -self.beta_max, self.beta_max)
        return np.full_like(r, self.throttle), beta


class Waypoint(Controller):
    """Hold a target orientation ``xi_target`` and cruise speed."""

    name = "waypoint"

    def __init__(self, beta_max, xi_target=0.0, gain=2.0, v_target=None, kv=1.0):
        self.beta_max, self.xi_target, self.gain = beta_max, xi_target, gain
        self.v_target, self.kv = v_target, kv

    def __call__(self, r, xi, v, step):
        beta = np.clip(self.gain * wrap_angle(xi - self.xi_target), -self.beta_max, self.beta_max)
        a = np.zeros_like(r) if self.v_target is None else self.kv * (self.v_target - v)
        return a, beta


class RandomSteer(Controller):
    """Uniform admissible steering and acceleration, redrawn every ``hold`` steps."""

    name = "random"

    def __init__(self, beta_max, hold=500, a_max=2.0):
        if hold < 1:
            raise ConfigurationError("hold must be at least one step")
        self.beta_max, self.hold, self.a_max = beta_max, int(hold), a_max
        self._rngs: list[np.random.Generator] = []

    def reset(self, seeds):
        self._rngs = [np.random.default_rng(np.random.SeedSequence([int(s), 1])) for s in seeds]
        self._a = np.zeros(len(seeds))
        self._b = np.zeros(len(seeds))

    def __call__(self, r, xi, v, step):
        if step % self.hold == 0:
            draws = np.array([g.uniform(-1.0, 1.0, 2) for g in self._rngs]).reshape(-1, 2)
            self._a = self.a_max * draws[:, 0]
            self._b = self.beta_max * draws[:, 1]
        return self._a.copy(), self._b.copy()


class Idle(Controller):
    name = "idle"

    def __init__(self, beta_max=0.0):
        pass

    def __call__(self, r, xi, v, step):
        return np.zeros_like(r), np.zeros_like(r)


CONTROLLERS = {c.name: c for c in (Adversarial, Waypoint, RandomSteer, Idle)}


def make_controller(spec: dict, beta_max: float) -> Controller:
    """Build a controller from ``{"kind": name, **params}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in CONTROLLERS:
        raise ConfigurationError(f"unknown controller {kind!r}; choose from {sorted(CONTROLLERS)}")
    try:
        return CONTROLLERS[kind](beta_max, **spec)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for controller {kind!r}: {exc}") from None


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeConfig:
    initial_state: RelState
    controller: dict
    filter_on: bool = True
    dt: float = 1e-3
    t_max: float = 60.0
    r_escape: float | None = None   # default 20 r_bar
    start_margin: float = 0.0
    record_every: int = 0           # 0: no trajectory

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if self.start_margin < 0:
            raise DomainError("start_margin must be non-negative")

    def validate(self, ctx: LieContext) -> None:
        s = self.initial_state
        if h_arrays(s.r, s.xi, ctx) < self.start_margin:
            raise DomainError("initial state lies outside the safe start set h >= start_margin")
        if s.v > ctx.vehicle.v_max:
            raise DomainError("initial speed exceeds v_max")


@dataclass
class EpisodeResult:
    seed: int
    controller: str
    filter_on: bool
    min_r: float
    min_h: float
    collided: bool
    interventions: int
    steps: int
    final_state: tuple
    trajectory: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in EPISODE_HEADER}


def _simulate(r, xi, v, seeds, controller: Controller, filt: FilterNetwork | None, ctx: LieContext,
              dt, t_max, r_escape, record_every=0):
    """Lock-step RK4 over a batch of episodes. Returns per-episode metric arrays."""
    n = len(r)
    l_r, v_max, r_bar = ctx.vehicle.l_r, ctx.vehicle.v_max, ctx.barrier.r_bar
    floor = 0.1 * r_bar
    r, xi, v = (np.array(x, dtype=float) for x in (r, xi, v))
    live = np.ones(n, dtype=bool)
    min_r = r.copy()
    min_h = h_arrays(r, xi, ctx)
    interventions = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    collided = min_r <= r_bar
    controller.reset(seeds)
    n_steps = int(math.ceil(t_max / dt - 1e-9))
    traj = []
    for k in range(n_steps):
        a, beta_in = controller(r, xi, v, k)
        if filt is not None:
            beta = filt.clamp(xi, beta_in)
            hit = beta != beta_in
        else:
            beta, hit = beta_in, np.zeros(n, dtype=bool)
        if record_every and k % record_every == 0:
            traj.append(np.stack([np.full(n, k * dt), r, xi, v, a, beta_in, beta, hit], axis=1))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1, xi1, v1, bad = rk4_arrays(r, xi, v, a, beta, l_r, dt)
        bad |= ~np.isfinite(r1)
        r = np.where(live, r1, r)
        xi = np.where(live, wrap_angle(xi1), xi)
        v = np.where(live, np.clip(v1, 0.0, v_max), v)
        interventions += live & hit
        steps += live
        crashed = live & (bad | (r <= floor))
        r = np.where(crashed & bad, 0.0, r)
        min_r = np.where(live, np.minimum(min_r, r), min_r)
        with np.errstate(divide="ignore"):
            min_h = np.where(live, np.minimum(min_h, h_arrays(r, xi, ctx)), min_h)
        collided |= live & (r <= r_bar)
        live &= ~(crashed | (r >= r_escape))
        if not live.any():
            break
    if record_every:
        traj.append(np.stack([steps * dt, r, xi, v, a, beta_in, beta, np.zeros(n)], axis=1))
    trajectories = np.stack(traj, axis=1) if traj else None
    return dict(min_r=min_r, min_h=min_h, collided=collided, interventions=interventions, steps=steps,
                final=(r, xi, v), trajectories=trajectories)


def _results(out, seeds, controller, filter_on):
    r, xi, v = out["final"]
    res = []
    for i, s in enumerate(seeds):
        traj = None if out["trajectories"] is None else out["trajectories"][i]
        res.append(EpisodeResult(int(s), controller.name, bool(filter_on), float(out["min_r"][i]),
                                 float(out["min_h"][i]), bool(out["collided"][i]),
                                 int(out["interventions"][i]), int(out["steps"][i]),
                                 (float(r[i]), float(xi[i]), float(v[i])), traj))
    return res


def run_episode(cfg: EpisodeConfig, filt: FilterNetwork | None, ctx: LieContext, seed: int = 0) -> EpisodeResult:
    """Run one episode. ``filt`` is required when ``cfg.filter_on``."""
    cfg.validate(ctx)
    if cfg.filter_on and filt is None:
        raise ConfigurationError("filter_on requires a filter")
    ctrl = make_controller(cfg.controller, ctx.beta_max)
    s = cfg.initial_state
    r_escape = cfg.r_escape if cfg.r_escape is not None else 20.0 * ctx.barrier.r_bar
    out = _simulate([s.r], [s.xi], [s.v], [seed], ctrl, filt if cfg.filter_on else None, ctx,
                    cfg.dt, cfg.t_max, r_escape, cfg.record_every)
    return _results(out, [seed], ctrl, cfg.filter_on)[0]


# ---------------------------------------------------------------------------
# campaigns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CampaignTemplate:
    """Everything in an episode except its initial state, which is drawn per seed."""

    controller: dict
    filter_on: bool = True
    dt: float = 1e-3
    t_max: float = 60.0
    r_escape: float | None = None
    start_margin: float = 0.0
    r_init_max: float | None = None   # default 3 r_bar
    hist_bins: int = 40

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignTemplate":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"unknown campaign keys: {sorted(unknown)}")
        return cls(**d)


def sample_initial_state(rng: np.random.Generator, ctx: LieContext, start_margin: float = 0.0,
                         r_max: float | None = None) -> RelState:
    """Draw ``(r, xi, v)`` uniformly with ``h >= start_margin`` and ``0 < v <= v_max``."""
    b = ctx.barrier
    r_max = 3.0 * b.r_bar if r_max is None else r_max
    xi = rng.uniform(-math.pi, math.pi)
    rho = 1.0 / float(r_min(xi, ctx)) - start_margin
    if rho <= 0:
        raise DomainError("start_margin leaves no admissible radius")
    r_lo = 1.0 / rho
    if r_lo >= r_max:
        raise DomainError("r_init_max is inside the start set boundary")
    r = rng.uniform(r_lo, r_max)
    v = ctx.vehicle.v_max * (1.0 - rng.uniform(0.0, 1.0))
    return RelState(r, xi, v)


@dataclass
class CampaignSummary:
    template: CampaignTemplate
    episodes: list[EpisodeResult]
    histogram: dict
    reference_radii: dict

    @property
    def n(self) -> int:
        return len(self.episodes)

    @property
    def collisions(self) -> int:
        return sum(e.collided for e in self.episodes)

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.n if self.n else 0.0

    def to_dict(self) -> dict:
        iv = np.array([e.interventions for e in self.episodes])
        steps = np.array([e.steps for e in self.episodes])
        return {
            "template": self.template.to_dict(),
            "episodes": self.n,
            "collisions": self.collisions,
            "collision_rate": self.collision_rate,
            "min_r": min((e.min_r for e in self.episodes), default=None),
            "min_h": min((e.min_h for e in self.episodes), default=None),
            "interventions": {
                "total": int(iv.sum()),
                "episodes_with_any": int((iv > 0).sum()),
                "fraction_of_steps": float(iv.sum() / max(int(steps.sum()), 1)),
            },
            "histogram": self.histogram,
            "reference_radii": self.reference_radii,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=EPISODE_HEADER, lineterminator="\n")
            w.writeheader()
            for e in self.episodes:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in e.row().items()})


def run_campaign(n: int, template: CampaignTemplate, seeds, filt: FilterNetwork | None,
                 ctx: LieContext) -> CampaignSummary:
    """Run ``n`` independent seeded episodes in one batch.

    ``seeds`` is either an integer base (episode ``i`` uses ``base + i``) or an
    explicit sequence of length ``n``.
    """
    if isinstance(seeds, (int, np.integer)):
        seeds = [int(seeds) + i for i in range(n)]
    seeds = [int(s) for s in seeds]
    if len(seeds) != n:
        raise ConfigurationError("need exactly one seed per episode")
    if template.filter_on and filt is None:
        raise ConfigurationError("filter_on requires a filter")
    if filt is not None and filt.ctx != ctx:
        raise ConfigurationError("filter was built for different vehicle or barrier parameters")
    states = [sample_initial_state(np.random.default_rng(np.random.SeedSequence([s, 0])), ctx,
                                   template.start_margin, template.r_init_max) for s in seeds]
    ctrl = make_controller(template.controller, ctx.beta_max)
    r_escape = template.r_escape if template.r_escape is not None else 20.0 * ctx.barrier.r_bar
    out = _simulate([s.r for s in states], [s.xi for s in states], [s.v for s in states], seeds, ctrl,
                    filt if template.filter_on else None, ctx, template.dt, template.t_max, r_escape)
    episodes = _results(out, seeds, ctrl, template.filter_on)
    r_bar = ctx.barrier.r_bar
    hi = template.r_init_max if template.r_init_max is not None else 3.0 * r_bar
    counts, edges = np.histogram(np.clip(out["min_r"], 0.0, hi), bins=template.hist_bins, range=(0.0, hi))
    histogram = {"edges": edges.tolist(), "counts": counts.tolist()}
    refs = {"r_bar": r_bar, "design_radius": float(r_min(math.pi, ctx))}
    return CampaignSummary(template, episodes, histogram, refs)


def write_trajectory(result: EpisodeResult, path) -> None:
    if result.trajectory is None:
        raise ConfigurationError("episode was run without trajectory recording")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for row in result.trajectory:
            w.writerow([repr(float(x)) for x in row[:-1]] + [int(row[-1])])


__all__ = ["EpisodeConfig", "EpisodeResult", "CampaignTemplate", "CampaignSummary", "Controller",
           "Adversarial", "Waypoint", "RandomSteer", "Idle", "make_controller", "run_episode",
           "run_campaign", "sample_initial_state", "write_trajectory"]
