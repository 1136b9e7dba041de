"""Filter synthesis from a verified certificate.

Pipeline: trace the lower boundary ``l`` of the on-barrier safe steering set by
bisection, lay tangent lines at equally spaced samples (concavity puts every
tangent above ``l``), take their pointwise minimum ``g``, clip it at
``-beta_max`` to obtain the fallback steering ``lower(xi)``, mirror it into
``upper(xi) = -lower(-xi)``, and check ``lower <= upper`` exactly on the union
of breakpoints. The result can be exported as an affine/ReLU network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import __version__
from ._io import check_seal, expect_schema, seal
from .barrier import BarrierParams, LieContext, gamma_prime, lie_partial
from .errors import ConfigurationError, IntegrityError, SynthesisError, TraceError
from .kbm import VehicleParams
from .verifier import VerificationCertificate

FILTER_SCHEMA = "shieldnn.filter/1"

DEFAULT_N_SAMPLES = 512
DEFAULT_K_TANGENTS = 32
DEFAULT_TRACE_TOL = 1e-9
MAX_TANGENTS = 512


# ---------------------------------------------------------------------------
# boundary tracing
# ---------------------------------------------------------------------------

def solve_boundary(ctx: LieContext, xi, tol: float = 1e-13, max_iter: int = 80):
    """Vectorised bisection for ``L(xi, beta) = 0`` over ``beta in [-beta_max, beta_max]``.

    Assumes ``L`` increases in ``beta`` (certified on ``[xi0, pi]``). Columns
    without a sign change return ``-beta_max`` if already safe at the bottom,
    ``nan`` if unsafe at the top.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    bm = ctx.beta_max
    lo = np.full_like(xi, -bm)
    hi = np.full_like(xi, bm)
    f_lo = lie_partial(xi, lo, ctx)
    f_hi = lie_partial(xi, hi, ctx)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        neg = lie_partial(xi, mid, ctx) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    root = 0.5 * (lo + hi)
    root = np.where(f_lo >= 0, -bm, root)
    return np.where(f_hi < 0, np.nan, root)


def safe_interval(ctx: LieContext, xi0: float, xi):
    """Oracle for the on-barrier safe steering interval ``[lo(xi), hi(xi)]``.

    Uses the certified structure: the lower boundary lives on ``[xi0, pi]``, the
    upper boundary is its mirror image on ``[-pi, -xi0]``.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    bm = ctx.beta_max
    lo = np.full_like(xi, -bm)
    hi = np.full_like(xi, bm)
    right = xi >= xi0
    left = xi <= -xi0
    if right.any():
        lo[right] = np.maximum(-bm, solve_boundary(ctx, xi[right]))
    if left.any():
        hi[left] = np.minimum(bm, -solve_boundary(ctx, -xi[left]))
    return lo, hi


@dataclass(frozen=True)
class BoundaryTrace:
    xi0: float
    xi: np.ndarray
    value: np.ndarray
    slope: np.ndarray
    trace_tol: float

    def __len__(self):
        return len(self.xi)


def trace_boundary(cert: VerificationCertificate, n_samples: int = DEFAULT_N_SAMPLES,
                   trace_tol: float = DEFAULT_TRACE_TOL) -> BoundaryTrace:
    """Sample ``l`` on a uniform grid over ``[xi0, pi]`` and attach its slope."""
    if not cert.verified:
        raise TraceError("boundary tracing needs a Verified certificate")
    if n_samples < 2:
        raise ConfigurationError("n_samples must be at least 2")
    ctx = cert.ctx
    bm = ctx.beta_max
    if cert.xi0 >= math.pi:
        raise TraceError("certificate has no boundary crossing; every steering angle is safe")
    xs = np.linspace(cert.xi0, math.pi, n_samples)
    xs[-1] = math.pi
    vals = solve_boundary(ctx, xs)
    vals[0] = -bm
    vals[-1] = cert.beta0_pi
    if np.any(np.isnan(vals)):
        raise TraceError("boundary bisection lost its bracket; contradicts the certificate")
    resid = np.abs(lie_partial(xs, vals, ctx))
    if np.any(resid > trace_tol):
        i = int(np.argmax(resid))
        raise TraceError(f"boundary residual {resid[i]:.3e} at xi = {xs[i]:.6f} exceeds {trace_tol}")
    slopes = gamma_prime(xs, vals, ctx)
    return BoundaryTrace(cert.xi0, xs, vals, slopes, trace_tol)


# ---------------------------------------------------------------------------
# piecewise-linear functions
# ---------------------------------------------------------------------------

class Combiner(str, Enum):
    MIN_OF_LINES = "MinOfLines"
    MAX_OF_LINES = "MaxOfLines"
    EXPLICIT = "Explicit"


@dataclass(frozen=True)
class PwlFunction:
    """Continuous piecewise-linear function on ``[-pi, pi]``.

    ``xs``/``ys`` are the breakpoints (including both ends). For the line
    combiners ``slopes``/``intercepts`` define the function and the breakpoints
    are derived; evaluation then uses the lines directly.
    """

    xs: np.ndarray
    ys: np.ndarray
    combiner: Combiner
    slopes: np.ndarray | None = None
    intercepts: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.xs) <= 0):
            raise ConfigurationError("breakpoints must be strictly increasing")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.combiner is Combiner.EXPLICIT:
            return np.interp(x, self.xs, self.ys)
        vals = np.multiply.outer(x, self.slopes) + self.intercepts
        return vals.min(axis=-1) if self.combiner is Combiner.MIN_OF_LINES else vals.max(axis=-1)


def _min_envelope_breaks(slopes, intercepts, lo=-math.pi, hi=math.pi):
    """Kinks of ``min_i(slopes[i] x + intercepts[i])`` on ``[lo, hi]``."""
    x = lo
    vals = slopes * x + intercepts
    cur = min(range(len(slopes)), key=lambda i: (vals[i], slopes[i]))
    xs = [lo]
    while True:
        # the active line can only be overtaken by lines with a smaller slope
        ds = slopes[cur] - slopes
        with np.errstate(divide="ignore", invalid="ignore"):
            cross = np.where(ds > 0, (intercepts - intercepts[cur]) / ds, np.inf)
        cross = np.where(cross > x, cross, np.inf)
        nxt = float(cross.min())
        if not nxt < hi:
            break
        cands = np.flatnonzero(cross == nxt)
        cur = int(cands[np.argmin(slopes[cands])])
        x = nxt
        xs.append(x)
    xs.append(hi)
    return np.array(xs)


def min_of_lines(slopes, intercepts) -> PwlFunction:
    slopes = np.asarray(slopes, dtype=float)
    intercepts = np.asarray(intercepts, dtype=float)
    xs = _min_envelope_breaks(slopes, intercepts)
    ys = (np.multiply.outer(xs, slopes) + intercepts).min(axis=1)
    return PwlFunction(xs, ys, Combiner.MIN_OF_LINES, slopes, intercepts)


def build_tangent_pwl(trace: BoundaryTrace, k_tangents: int = DEFAULT_K_TANGENTS) -> PwlFunction:
    """Minimum of ``k_tangents`` tangent lines to the traced boundary."""
    if k_tangents < 2:
        raise ConfigurationError("need at least two tangent lines")
    if k_tangents > len(trace):
        raise ConfigurationError("more tangents than boundary samples")
    idx = np.unique(np.round(np.linspace(0, len(trace) - 1, k_tangents)).astype(int))
    s = trace.slope[idx]
    b = trace.value[idx] - s * trace.xi[idx]
    return min_of_lines(s, b)


def _clip_below(g: PwlFunction, floor: float) -> PwlFunction:
    """Breakpoints of ``max(floor, g)`` for a continuous PWL ``g``."""
    xs, ys = [g.xs[0]], [max(floor, g.ys[0])]
    for x0, y0, x1, y1 in zip(g.xs[:-1], g.ys[:-1], g.xs[1:], g.ys[1:]):
        if (y0 - floor) * (y1 - floor) < 0:
            xc = x0 + (floor - y0) * (x1 - x0) / (y1 - y0)
            if x0 < xc < x1:
                xs.append(xc)
                ys.append(floor)
        xs.append(x1)
        ys.append(max(floor, y1))
    return PwlFunction(np.array(xs), np.array(ys), Combiner.EXPLICIT)


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterNetwork:
    """Fallback steering bounds ``lower(xi) <= upper(xi)`` and their clamp.

    ``lower(xi) = max(-beta_max, min_i(slope_i xi + intercept_i))`` and
    ``upper(xi) = -lower(-xi)``.
    """

    ctx: LieContext
    slopes: np.ndarray
    intercepts: np.ndarray
    lower_pwl: PwlFunction
    upper_pwl: PwlFunction
    margin: float
    provenance: str = ""

    @property
    def beta_max(self) -> float:
        return self.ctx.beta_max

    def lower(self, xi):
        xi = np.asarray(xi, dtype=float)
        g = (np.multiply.outer(xi, self.slopes) + self.intercepts).min(axis=-1)
        return np.maximum(-self.beta_max, g)

    def upper(self, xi):
        return -self.lower(-np.asarray(xi, dtype=float))

    def nn0(self, xi):
        return self.lower(xi)

    def clamp(self, xi, beta):
        """``min(upper(xi), max(lower(xi), beta))``; returns ``beta`` itself when safe."""
        return np.minimum(self.upper(xi), np.maximum(self.lower(xi), beta))

    # -- persistence ----------------------------------------------------
    def payload(self, relu: "ReluNetwork | None" = None) -> dict:
        relu = relu or export_relu(self)
        return seal({
            "schema": FILTER_SCHEMA,
            "version": __version__,
            "vehicle": self.ctx.vehicle.to_dict(),
            "barrier": self.ctx.barrier.to_dict(),
            "beta_max": self.beta_max,
            "tangent_lines": [[float(s), float(b)] for s, b in zip(self.slopes, self.intercepts)],
            "breakpoints": {
                "lower": [[float(x), float(y)] for x, y in zip(self.lower_pwl.xs, self.lower_pwl.ys)],
                "upper": [[float(x), float(y)] for x, y in zip(self.upper_pwl.xs, self.upper_pwl.ys)],
            },
            "relu_layers": relu.to_list(),
            "margin": self.margin,
            "provenance": self.provenance,
        })

    @classmethod
    def from_payload(cls, d: dict, strict: bool = True) -> "FilterNetwork":
        expect_schema(d, FILTER_SCHEMA)
        if strict:
            check_seal(d)
        ctx = LieContext(VehicleParams.from_dict(d["vehicle"]), BarrierParams.from_dict(d["barrier"]))
        lines = np.asarray(d["tangent_lines"], dtype=float)
        filt = assemble_filter(min_of_lines(lines[:, 0], lines[:, 1]), ctx, provenance=d.get("provenance", ""))
        if not math.isclose(filt.margin, d["margin"], rel_tol=1e-9, abs_tol=1e-12):
            raise IntegrityError("stored margin does not match the tangent lines")
        return filt


def assemble_filter(g: PwlFunction, ctx: LieContext, provenance: str = "") -> FilterNetwork:
    """Clip and mirror ``g`` into a filter and certify ``lower <= upper`` on ``[-pi, pi]``.

    The gap ``upper - lower`` is piecewise linear with kinks only at the union
    of both functions' breakpoints, so its minimum over the circle is its
    minimum over that finite set.
    """
    if g.combiner is not Combiner.MIN_OF_LINES:
        raise ConfigurationError("assemble_filter expects a MinOfLines function")
    bm = ctx.beta_max
    lower_pwl = _clip_below(g, -bm)
    upper_pwl = PwlFunction(-lower_pwl.xs[::-1], -lower_pwl.ys[::-1], Combiner.EXPLICIT)
    filt = FilterNetwork(ctx, g.slopes, g.intercepts, lower_pwl, upper_pwl, math.nan, provenance)
    pts = np.union1d(lower_pwl.xs, upper_pwl.xs)
    gap = filt.upper(pts) - filt.lower(pts)
    margin = float(gap.min())
    filt = FilterNetwork(ctx, g.slopes, g.intercepts, lower_pwl, upper_pwl, margin, provenance)
    if not margin > 0:
        raise SynthesisError(f"fallback bounds cross (margin {margin:.3e}); tangent approximation too coarse")
    return filt


def synthesize(cert: VerificationCertificate, k_tangents: int = DEFAULT_K_TANGENTS,
               n_samples: int = DEFAULT_N_SAMPLES, max_tangents: int = MAX_TANGENTS) -> FilterNetwork:
    """Trace, fit tangents and assemble, doubling the tangent count on failure."""
    if k_tangents < 2:
        raise ConfigurationError("need at least two tangent lines")
    trace = trace_boundary(cert, max(n_samples, min(max_tangents, 2 * k_tangents)))
    provenance = cert.content_hash
    k = k_tangents
    while True:
        try:
            return assemble_filter(build_tangent_pwl(trace, min(k, len(trace))), cert.ctx, provenance)
        except SynthesisError:
            if k >= max_tangents or k >= len(trace):
                raise
            k *= 2


# ---------------------------------------------------------------------------
# ReLU export
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReluLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray
    relu: bool


@dataclass(frozen=True)
class ReluNetwork:
    """Feed-forward affine/ReLU network mapping ``(xi, beta)`` to filtered ``beta``."""

    layers: tuple[ReluLayer, ...]

    def __call__(self, xi, beta):
        x = np.stack([np.atleast_1d(xi), np.atleast_1d(beta)], axis=-1).astype(float)
        for layer in self.layers:
            x = x @ layer.weight.T + layer.bias
            if layer.relu:
                x = np.maximum(x, 0.0)
        out = x[..., 0]
        return out if np.ndim(xi) or np.ndim(beta) else float(out[0])

    def to_list(self) -> list:
        return [{"weight": l.weight.tolist(), "bias": l.bias.tolist(),
                 "activation": "relu" if l.relu else "none"} for l in self.layers]

    @classmethod
    def from_list(cls, layers: list) -> "ReluNetwork":
        return cls(tuple(ReluLayer(np.asarray(l["weight"], float), np.asarray(l["bias"], float),
                                   l["activation"] == "relu") for l in layers))


class _Builder:
    """Tracks named quantities as affine functions of the current layer output."""

    def __init__(self, n_inputs: int):
        self.dim = n_inputs
        self.layers: list[ReluLayer] = []

    def stage(self, values, ops):
        """One hidden ReLU layer.

        ``values``: list of (row, offset) affine forms over the current output.
        ``ops``: list of ("carry", i) | ("min", i, j) | ("max", i, j).
        Returns the new affine forms, one per op.
        """
        rows, offs, recipes = [], [], []

        def neuron(row, off):
            rows.append(row)
            offs.append(off)
            return len(rows) - 1

        for op in ops:
            a_row, a_off = values[op[1]]
            if not a_row.any():
                recipes.append(("const", a_off))
                continue
            pos = neuron(a_row, a_off)
            neg = neuron(-a_row, -a_off)
            if op[0] == "carry":
                recipes.append(("lin", [(pos, 1.0), (neg, -1.0)]))
                continue
            b_row, b_off = values[op[2]]
            if op[0] == "min":   # a - relu(a - b)
                d = neuron(a_row - b_row, a_off - b_off)
                recipes.append(("lin", [(pos, 1.0), (neg, -1.0), (d, -1.0)]))
            else:                # a + relu(b - a)
                d = neuron(b_row - a_row, b_off - a_off)
                recipes.append(("lin", [(pos, 1.0), (neg, -1.0), (d, 1.0)]))
        self.layers.append(ReluLayer(np.array(rows), np.array(offs), True))
        self.dim = len(rows)
        out = []
        for kind, data in recipes:
            row = np.zeros(self.dim)
            if kind == "const":
                out.append((row, data))
                continue
            for idx, w in data:
                row[idx] += w
            out.append((row, 0.0))
        return out

    def finish(self, value):
        row, off = value
        self.layers.append(ReluLayer(row[None, :], np.array([off]), False))
        return ReluNetwork(tuple(self.layers))


def _reduce(group, kind):
    """Pair up indices in ``group`` for one reduction stage."""
    ops = []
    for i in range(0, len(group) - 1, 2):
        ops.append((kind, group[i], group[i + 1]))
    if len(group) % 2:
        ops.append(("carry", group[-1]))
    return ops


def export_relu(filt: FilterNetwork) -> ReluNetwork:
    """Encode ``(xi, beta) -> min(upper(xi), max(lower(xi), beta))`` with affine and ReLU layers.

    Uses ``min(a, b) = a - relu(a - b)``, ``max(a, b) = a + relu(b - a)`` and
    carries values through ReLU layers as ``relu(x) - relu(-x)``.
    """
    bm = filt.beta_max
    b = _Builder(2)
    xi_row, beta_row = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    low = [(s * xi_row, c) for s, c in zip(filt.slopes, filt.intercepts)]
    up = [(s * xi_row, -c) for s, c in zip(filt.slopes, filt.intercepts)]
    values = low + up + [(beta_row, 0.0)]
    g_low = list(range(len(low)))
    g_up = list(range(len(low), len(low) + len(up)))
    g_beta = [len(values) - 1]
    while len(g_low) > 1 or len(g_up) > 1:
        ops_low = _reduce(g_low, "min")
        ops_up = _reduce(g_up, "max")
        ops = ops_low + ops_up + [("carry", g_beta[0])]
        values = b.stage(values, ops)
        g_low = list(range(len(ops_low)))
        g_up = list(range(len(ops_low), len(ops_low) + len(ops_up)))
        g_beta = [len(values) - 1]
    # clip: lower = max(g, -bm), upper = min(-g(-xi), bm)
    values = values + [(np.zeros(b.dim), -bm), (np.zeros(b.dim), bm)]
    n = len(values)
    values = b.stage(values, [("max", g_low[0], n - 2), ("min", g_up[0], n - 1), ("carry", g_beta[0])])
    # t = max(lower, beta); keep upper
    values = b.stage(values, [("max", 0, 2), ("carry", 1)])
    # out = min(upper, t)
    values = b.stage(values, [("min", 1, 0)])
    return b.finish(values[0])
