"""Sound sign certification of smooth functions on rectangles.

``certify_min`` proves ``sign * f > margin`` over a closed rectangle (or a
segment, when one side is degenerate) with a mean-value argument per cell:

    sign * f(p) >= sign * f(c) - |df/dxi|_cell * r_xi - |df/dbeta|_cell * r_beta

for every ``p`` in a cell with centre ``c`` and half-widths ``r_xi, r_beta``.
The value at the centre and the gradient magnitudes over the whole cell are
both enclosed with interval arithmetic, so a certified verdict holds for the
real-valued function. Cells that cannot be decided are split in two along each
non-degenerate axis until ``max_depth``; a cell whose centre is provably of the
wrong sign produces a refutation with that centre as witness.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import BracketError, ConfigurationError
from .interval import Interval


class Verdict(str, Enum):
    CERTIFIED = "Certified"
    REFUTED = "Refuted"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class CertTarget:
    """Function, its gradient, a rectangle and the sign to establish.

    ``f(xi, beta)`` and ``grad(xi, beta) -> (df/dxi, df/dbeta)`` must accept
    numpy arrays and :class:`Interval` objects.
    """

    f: Callable
    grad: Callable
    xi: tuple[float, float]
    beta: tuple[float, float]
    sign: int = 1
    name: str = ""

    def __post_init__(self):
        (x0, x1), (b0, b1) = self.xi, self.beta
        if not (x0 <= x1 and b0 <= b1):
            raise ConfigurationError("rectangle bounds out of order")
        if x0 == x1 and b0 == b1:
            raise ConfigurationError("rectangle may be degenerate in one direction only")
        if self.sign not in (1, -1):
            raise ConfigurationError("sign must be +1 or -1")


@dataclass(frozen=True)
class CertifyConfig:
    initial_grid: float = 0.05
    max_depth: int = 12
    margin: float = 0.0
    mode: str = "local"  # "local" | "global"
    threads: int = 1
    max_cells: int = 5_000_000

    def __post_init__(self):
        if not self.initial_grid > 0:
            raise ConfigurationError("initial_grid must be positive")
        if self.max_depth < 0:
            raise ConfigurationError("max_depth must be non-negative")
        if self.mode not in ("local", "global"):
            raise ConfigurationError(f"unknown refinement mode {self.mode!r}")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")

    def to_dict(self) -> dict:
        return {"initial_grid": self.initial_grid, "max_depth": self.max_depth,
                "margin": self.margin, "mode": self.mode}


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SHIELDNN_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class CertResult:
    verdict: Verdict
    cells_checked: int = 0
    finest_grid: float = 0.0
    refinement_depth: int = 0
    witness: tuple[float, float] | None = None
    note: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "witness": None if self.witness is None else [float(w) for w in self.witness],
            "cells_checked": int(self.cells_checked),
            "finest_grid": float(self.finest_grid),
            "refinement_depth": int(self.refinement_depth),
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CertResult":
        w = d.get("witness")
        return cls(Verdict(d["verdict"]), d["cells_checked"], d["finest_grid"],
                   d["refinement_depth"], None if w is None else tuple(w), d.get("note", ""))


def point_check(f: Callable, xi: float, beta: float, sign: int, name: str = "") -> CertResult:
    """Certify or refute the sign of ``f`` at a single point (interval-enclosed)."""
    val = sign * f(Interval.point(np.array([xi])), Interval.point(np.array([beta])))
    if val.lo[0] > 0:
        return CertResult(Verdict.CERTIFIED, 1, 0.0, 0, note=name)
    if val.hi[0] < 0:
        return CertResult(Verdict.REFUTED, 1, 0.0, 0, witness=(xi, beta), note=name)
    return CertResult(Verdict.INCONCLUSIVE, 1, 0.0, 0, witness=(xi, beta), note=name)


# ---------------------------------------------------------------------------
# cell evaluation
# ---------------------------------------------------------------------------

@dataclass
class _Cells:
    x0: np.ndarray
    x1: np.ndarray
    b0: np.ndarray
    b1: np.ndarray

    def __len__(self):
        return len(self.x0)

    def take(self, mask) -> "_Cells":
        return _Cells(self.x0[mask], self.x1[mask], self.b0[mask], self.b1[mask])


def _initial_cells(target: CertTarget, grid: float) -> _Cells:
    (xl, xh), (bl, bh) = target.xi, target.beta

    def edges(lo, hi):
        if lo == hi:
            return np.array([lo, hi])
        n = max(1, math.ceil((hi - lo) / grid))
        e = np.linspace(lo, hi, n + 1)
        e[0], e[-1] = lo, hi
        return e

    ex, eb = edges(xl, xh), edges(bl, bh)
    # canonical order: xi-major
    X0, B0 = np.meshgrid(ex[:-1], eb[:-1], indexing="ij")
    X1, B1 = np.meshgrid(ex[1:], eb[1:], indexing="ij")
    return _Cells(X0.ravel(), X1.ravel(), B0.ravel(), B1.ravel())


def _split(cells: _Cells) -> _Cells:
    xm = 0.5 * (cells.x0 + cells.x1)
    bm = 0.5 * (cells.b0 + cells.b1)
    split_x = cells.x1 > cells.x0
    split_b = cells.b1 > cells.b0
    parts = []
    for xs in ((cells.x0, xm), (xm, cells.x1)):
        for bs in ((cells.b0, bm), (bm, cells.b1)):
            parts.append((xs, bs))
    # Children of cell i stay contiguous: interleave per cell.
    x0 = np.stack([p[0][0] for p in parts], axis=1)
    x1 = np.stack([p[0][1] for p in parts], axis=1)
    b0 = np.stack([p[1][0] for p in parts], axis=1)
    b1 = np.stack([p[1][1] for p in parts], axis=1)
    # children 0..3 = (lo,lo), (lo,hi), (hi,lo), (hi,hi); on a degenerate axis
    # both halves coincide, so drop the duplicates
    keep = np.ones((len(cells), 4), dtype=bool)
    keep[~split_b, 1] = False
    keep[~split_b, 3] = False
    keep[~split_x, 2] = False
    keep[~split_x, 3] = False
    return _Cells(x0[keep], x1[keep], b0[keep], b1[keep])


def _evaluate(target: CertTarget, cells: _Cells, margin: float):
    """Return (certified, refuted, slack, centre_xi, centre_beta) arrays."""
    cx = 0.5 * (cells.x0 + cells.x1)
    cb = 0.5 * (cells.b0 + cells.b1)
    rx = np.nextafter(np.maximum(cx - cells.x0, cells.x1 - cx), np.inf)
    rb = np.nextafter(np.maximum(cb - cells.b0, cells.b1 - cb), np.inf)
    with np.errstate(all="ignore"):
        centre = target.sign * target.f(Interval.point(cx), Interval.point(cb))
        gx, gb = target.grad(Interval(cells.x0, cells.x1), Interval(cells.b0, cells.b1))
        gx, gb = Interval._coerce(gx), Interval._coerce(gb)
        bx = np.where(cells.x1 > cells.x0, gx.mag() * rx, 0.0)
        bb = np.where(cells.b1 > cells.b0, gb.mag() * rb, 0.0)
        # round the bound up; inf/nan gradients disqualify the cell
        bound = np.nextafter(np.nextafter(bx + bb, np.inf), np.inf)
        bound = np.where(np.isnan(bound), np.inf, bound)
        slack = centre.lo - bound
    certified = slack > margin
    refuted = centre.hi < 0
    return certified, refuted, slack, cx, cb


def _evaluate_parallel(target, cells: _Cells, margin, threads):
    n = len(cells)
    if threads <= 1 or n < 4096:
        return _evaluate(target, cells, margin)
    chunks = np.array_split(np.arange(n), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: _evaluate(target, cells.take(idx), margin), chunks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(5))


def _cell_width(cells: _Cells) -> float:
    w = np.maximum(cells.x1 - cells.x0, cells.b1 - cells.b0)
    return float(w.min()) if len(w) else 0.0


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def certify_min(target: CertTarget, config: CertifyConfig | None = None) -> CertResult:
    """Certify ``target.sign * f > config.margin`` on the target rectangle."""
    config = config or CertifyConfig()
    if not callable(target.f) or not callable(target.grad):
        raise ConfigurationError("target function and gradient must be callable")
    if config.mode == "global":
        return _certify_global(target, config)
    return _certify_local(target, config)


def _certify_local(target: CertTarget, config: CertifyConfig) -> CertResult:
    cells = _initial_cells(target, config.initial_grid)
    checked = 0
    finest = _cell_width(cells)
    depth = 0
    while True:
        try:
            certified, refuted, _, cx, cb = _evaluate_parallel(target, cells, config.margin, config.threads)
        except (TypeError, AttributeError) as exc:
            raise ConfigurationError(f"target is not interval-evaluable: {exc}") from exc
        checked += len(cells)
        finest = min(finest, _cell_width(cells))
        if refuted.any():
            i = int(np.flatnonzero(refuted)[0])
            return CertResult(Verdict.REFUTED, checked, finest, depth,
                              witness=(float(cx[i]), float(cb[i])), note=target.name)
        pending = cells.take(~certified)
        if len(pending) == 0:
            return CertResult(Verdict.CERTIFIED, checked, finest, depth, note=target.name)
        if depth >= config.max_depth or checked + 4 * len(pending) > config.max_cells:
            i = int(np.flatnonzero(~certified)[0])
            return CertResult(Verdict.INCONCLUSIVE, checked, finest, depth,
                              witness=(float(cx[i]), float(cb[i])), note=target.name)
        cells = _split(pending)
        depth += 1


def _certify_global(target: CertTarget, config: CertifyConfig) -> CertResult:
    """Uniform grid shrunk tenfold and rescanned from scratch on any undecided cell."""
    grid = config.initial_grid
    checked = 0
    for depth in range(config.max_depth + 1):
        cells = _initial_cells(target, grid)
        if checked + len(cells) > config.max_cells:
            return CertResult(Verdict.INCONCLUSIVE, checked, grid * 10, depth - 1, note=target.name)
        certified, refuted, _, cx, cb = _evaluate_parallel(target, cells, config.margin, config.threads)
        checked += len(cells)
        if refuted.any():
            i = int(np.flatnonzero(refuted)[0])
            return CertResult(Verdict.REFUTED, checked, _cell_width(cells), depth,
                              witness=(float(cx[i]), float(cb[i])), note=target.name)
        if certified.all():
            return CertResult(Verdict.CERTIFIED, checked, _cell_width(cells), depth, note=target.name)
        grid /= 10.0
    return CertResult(Verdict.INCONCLUSIVE, checked, grid * 10, config.max_depth, note=target.name)


def bisect_root(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10,
                max_iter: int = 200) -> float:
    """Root of a continuous scalar function bracketed by ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}] (f = {flo}, {fhi})")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
