"""Certify that a barrier candidate yields a well-structured safe steering set.

On the barrier (``r = r_min(xi)``) the admissible steering set at orientation
``xi`` is ``{beta : L(xi, beta) >= 0}``. The checks below establish, with
:func:`~shieldnn.certify.certify_min`, that this set is the clipped interval
``[max(-beta_max, l(xi)), min(beta_max, u(xi))]`` with ``u(xi) = -l(-xi)`` and
``l`` concave on ``[xi0, pi]``:

``P1a``   ``L(., -beta_max) > 0`` on ``[-pi, xi0 - eps]``
``P1b``   ``L(xi0 - eps, -beta_max) > 0`` and ``L(pi, -beta_max) < 0``
``P1c``   ``d2L/dxi2 (., -beta_max) > 0`` on ``[xi0 - eps, pi]`` (convex, so one root)
``P2i``   ``dL/dxi (xi0, -beta_max) < 0``
``P2ii``  ``dL/dbeta > 0`` on ``[xi0 - eps, pi] x [-beta_max, beta_max]``
``P2iii`` ``L(pi, .) < 0`` on ``[-beta_max, beta0 - eps]`` and ``L(pi, beta_max) > 0``
``P2iv``  ``L > 0`` on ``[-xi0 + eps, xi0 - eps] x [-beta_max, beta_max]``
``P3``    ``gamma'' < 0`` on ``[xi0, pi] x [-beta_max, beta_max]``

``P2ii`` makes ``L`` strictly increasing in ``beta`` on each column of the
right-hand strip, so ``l`` is a well-defined function there; on the collar
``[xi0 - eps, xi0]`` it also carries the positivity of ``P1`` upward. ``P2iv``
rules out boundary points in the central band. Everything on the left half
follows from the symmetry ``L(-xi, -beta) = L(xi, beta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from . import __version__
from ._io import check_seal, expect_schema, seal
from .barrier import LieContext, gamma_second, gamma_second_grad, lie_partial
from .certify import (
    CertifyConfig,
    CertResult,
    CertTarget,
    Verdict,
    bisect_root,
    certify_min,
    point_check,
)
from .errors import BracketError, IntegrityError

CERT_SCHEMA = "shieldnn.certificate/1"
PROPERTY_IDS = ("P1a", "P1b", "P1c", "P2i", "P2ii", "P2iii", "P2iv", "P3")


class Status(str, Enum):
    VERIFIED = "Verified"
    FAILED = "Failed"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class VerifierConfig:
    certify: CertifyConfig = field(default_factory=CertifyConfig)
    epsilon: float = 1e-3
    root_tol: float = 1e-10

    def to_dict(self) -> dict:
        return {"certify": self.certify.to_dict(), "epsilon": self.epsilon, "root_tol": self.root_tol}

    @classmethod
    def from_dict(cls, d: dict) -> "VerifierConfig":
        return cls(CertifyConfig(**d["certify"]), d["epsilon"], d["root_tol"])


@dataclass(frozen=True)
class Precheck:
    condition_i: bool
    condition_ii: bool
    condition_ii_lhs: float
    sigma_bound: float
    sigma_lower_bound: float | None

    @property
    def analytic_guarantee(self) -> bool:
        return self.condition_i and self.condition_ii

    def to_dict(self) -> dict:
        return {
            "analytic_guarantee": self.analytic_guarantee,
            "condition_i": self.condition_i,
            "condition_ii": self.condition_ii,
            "condition_ii_lhs": self.condition_ii_lhs,
            "sigma_bound": self.sigma_bound,
            "sigma_lower_bound": self.sigma_lower_bound,
        }


def analytic_conditions(l_r: float, r_bar: float, sigma: float, beta_max: float) -> Precheck:
    """Sufficient conditions under which a barrier is guaranteed without search."""
    cond_i = beta_max <= math.pi / 2
    s1 = math.sin(math.pi / 4 + beta_max / 2)
    s2 = math.sin(beta_max)
    lhs = (sigma * (1 - sigma) * l_r + sigma * r_bar) / l_r * s1 * s2
    bound = 2.0 * (l_r / r_bar) / (s2 * s1) if s1 * s2 > 0 else math.inf
    return Precheck(cond_i, lhs >= 2.0, lhs, bound, bound if 0.0 < bound < 1.0 else None)


def existence_precheck(ctx: LieContext) -> Precheck:
    return analytic_conditions(ctx.vehicle.l_r, ctx.barrier.r_bar, ctx.barrier.sigma, ctx.beta_max)


# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

def _L(ctx, dx=0, db=0):
    return lambda x, b: lie_partial(x, b, ctx, dx, db)


def _grad(ctx, dx=0, db=0):
    return lambda x, b: (lie_partial(x, b, ctx, dx + 1, db), lie_partial(x, b, ctx, dx, db + 1))


def _target(ctx, dx, db, xi, beta, sign, name):
    return CertTarget(_L(ctx, dx, db), _grad(ctx, dx, db), xi, beta, sign, name)


def _vacuous(name: str, why: str) -> CertResult:
    return CertResult(Verdict.CERTIFIED, 0, 0.0, 0, note=f"{name}: vacuous ({why})")


def _both(a: CertResult, b: CertResult, name: str) -> CertResult:
    for r in (a, b):
        if not r.certified:
            return CertResult(r.verdict, a.cells_checked + b.cells_checked, 0.0, 0, r.witness, name)
    return CertResult(Verdict.CERTIFIED, a.cells_checked + b.cells_checked, 0.0, 0, note=name)


def _lower_edge(ctx):
    bm = ctx.beta_max
    return lambda x: float(lie_partial(x, -bm, ctx))


def verify_property1(ctx: LieContext, cfg: VerifierConfig | None = None):
    """Locate the unique crossing ``xi0`` of the boundary with ``beta = -beta_max``."""
    cfg = cfg or VerifierConfig()
    bm, eps, cc = ctx.beta_max, cfg.epsilon, cfg.certify
    edge = _lower_edge(ctx)
    results: dict[str, CertResult] = {}
    if edge(math.pi) >= 0:
        # no crossing: the whole lower edge must be safe
        xi0 = math.pi
        results["P1a"] = certify_min(_target(ctx, 0, 0, (-math.pi, math.pi), (-bm, -bm), 1, "P1a"), cc)
        results["P1b"] = _vacuous("P1b", "no crossing")
        results["P1c"] = _vacuous("P1c", "no crossing")
        return xi0, results
    try:
        xi0 = bisect_root(edge, -math.pi, math.pi, cfg.root_tol)
    except BracketError as exc:
        results["P1a"] = CertResult(Verdict.REFUTED, 1, 0.0, 0, (-math.pi, -bm), f"P1a: {exc}")
        return math.nan, results
    left = xi0 - eps
    if left > -math.pi:
        results["P1a"] = certify_min(_target(ctx, 0, 0, (-math.pi, left), (-bm, -bm), 1, "P1a"), cc)
    else:
        results["P1a"] = _vacuous("P1a", "crossing within eps of -pi")
    f = _L(ctx)
    results["P1b"] = _both(point_check(f, max(left, -math.pi), -bm, 1),
                           point_check(f, math.pi, -bm, -1), "P1b")
    results["P1c"] = certify_min(
        _target(ctx, 2, 0, (max(left, -math.pi), math.pi), (-bm, -bm), 1, "P1c"), cc)
    return xi0, results


def verify_property2(ctx: LieContext, xi0: float, cfg: VerifierConfig | None = None):
    """Show the right-hand boundary is the graph of a function and the centre band is safe."""
    cfg = cfg or VerifierConfig()
    bm, eps, cc = ctx.beta_max, cfg.epsilon, cfg.certify
    results: dict[str, CertResult] = {}
    if xi0 >= math.pi:
        for k in ("P2i", "P2ii", "P2iii"):
            results[k] = _vacuous(k, "no crossing")
        results["P2iv"] = certify_min(
            _target(ctx, 0, 0, (-math.pi, math.pi), (-bm, bm), 1, "P2iv"), cc)
        return -bm, results

    results["P2i"] = point_check(_L(ctx, 1, 0), xi0, -bm, -1, "P2i")
    strip = (max(xi0 - eps, -math.pi), math.pi)
    results["P2ii"] = certify_min(_target(ctx, 0, 1, strip, (-bm, bm), 1, "P2ii"), cc)

    edge = lambda b: float(lie_partial(math.pi, b, ctx))  # noqa: E731
    try:
        beta0 = bisect_root(edge, -bm, bm, cfg.root_tol)
    except BracketError as exc:
        results["P2iii"] = CertResult(Verdict.REFUTED, 1, 0.0, 0, (math.pi, bm), f"P2iii: {exc}")
        return math.nan, results
    top = point_check(_L(ctx), math.pi, bm, 1)
    if beta0 - eps > -bm:
        below = certify_min(_target(ctx, 0, 0, (math.pi, math.pi), (-bm, beta0 - eps), -1, "P2iii"), cc)
    else:
        below = point_check(_L(ctx), math.pi, -bm, -1)
    results["P2iii"] = _both(below, top, "P2iii")

    lo, hi = -xi0 + eps, xi0 - eps
    if hi > lo:
        results["P2iv"] = certify_min(_target(ctx, 0, 0, (lo, hi), (-bm, bm), 1, "P2iv"), cc)
    else:
        results["P2iv"] = _vacuous("P2iv", "band narrower than the exclusion collar")
    return beta0, results


def verify_property3(ctx: LieContext, xi0: float, cfg: VerifierConfig | None = None):
    """Concavity of the lower boundary on ``[xi0, pi]``."""
    cfg = cfg or VerifierConfig()
    if xi0 >= math.pi:
        return {"P3": _vacuous("P3", "no crossing")}
    bm = ctx.beta_max
    target = CertTarget(lambda x, b: gamma_second(x, b, ctx), lambda x, b: gamma_second_grad(x, b, ctx),
                        (xi0, math.pi), (-bm, bm), -1, "P3")
    return {"P3": certify_min(target, cfg.certify)}


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------

@dataclass
class VerificationCertificate:
    ctx: LieContext
    xi0: float
    beta0_pi: float
    epsilon: float
    property_results: dict[str, CertResult]
    status: Status
    failed_property: str | None = None
    precheck: Precheck | None = None
    config: VerifierConfig | None = None

    @property
    def verified(self) -> bool:
        return self.status is Status.VERIFIED

    def payload(self) -> dict:
        return seal({
            "schema": CERT_SCHEMA,
            "tool_version": __version__,
            "ctx": self.ctx.to_dict(),
            "xi0": self.xi0,
            "beta0_pi": self.beta0_pi,
            "epsilon": self.epsilon,
            "status": self.status.value,
            "failed_property": self.failed_property,
            "properties": {k: v.to_dict() for k, v in self.property_results.items()},
            "precheck": None if self.precheck is None else self.precheck.to_dict(),
            "config": None if self.config is None else self.config.to_dict(),
        })

    @property
    def content_hash(self) -> str:
        return self.payload()["content_hash"]

    @classmethod
    def from_payload(cls, d: dict, strict: bool = True) -> "VerificationCertificate":
        expect_schema(d, CERT_SCHEMA)
        if strict:
            check_seal(d)
        ctx = LieContext.from_dict(d["ctx"])
        results = {k: CertResult.from_dict(v) for k, v in d["properties"].items()}
        status = Status(d["status"])
        if status is Status.VERIFIED and not all(r.certified for r in results.values()):
            raise IntegrityError("certificate claims Verified but contains non-certified checks")
        cfg = None if d.get("config") is None else VerifierConfig.from_dict(d["config"])
        pre = existence_precheck(ctx) if d.get("precheck") else None
        return cls(ctx, d["xi0"], d["beta0_pi"], d["epsilon"], results, status, d.get("failed_property"), pre, cfg)


def _status_of(results: dict[str, CertResult]):
    for pid, r in results.items():
        if r.verdict is Verdict.REFUTED:
            return Status.FAILED, pid
        if r.verdict is Verdict.INCONCLUSIVE:
            return Status.INCONCLUSIVE, pid
    return Status.VERIFIED, None


def verify(ctx: LieContext, cfg: VerifierConfig | None = None) -> VerificationCertificate:
    """Run the existence pre-check and properties 1 to 3 in order."""
    cfg = cfg or VerifierConfig()
    pre = existence_precheck(ctx)
    results: dict[str, CertResult] = {}
    beta0 = math.nan

    def done(xi0):
        status, failed = _status_of(results)
        return VerificationCertificate(ctx, xi0, beta0, cfg.epsilon, results, status, failed, pre, cfg)

    xi0, r1 = verify_property1(ctx, cfg)
    results.update(r1)
    if _status_of(results)[0] is not Status.VERIFIED:
        return done(xi0)
    beta0, r2 = verify_property2(ctx, xi0, cfg)
    results.update(r2)
    if _status_of(results)[0] is not Status.VERIFIED:
        return done(xi0)
    results.update(verify_property3(ctx, xi0, cfg))
    return done(xi0)
