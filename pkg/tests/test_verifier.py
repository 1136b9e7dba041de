import math

import pytest

from conftest import make_ctx
from oracles import xi0_brentq
from shieldnn._io import canonical_json
from shieldnn.barrier import lie_partial
from shieldnn.certify import Verdict
from shieldnn.errors import IntegrityError
from shieldnn.verifier import (
    PROPERTY_IDS,
    Status,
    VerificationCertificate,
    analytic_conditions,
    existence_precheck,
    verify,
    verify_property1,
    verify_property2,
)


def L(ctx):
    return lambda x, b: float(lie_partial(x, b, ctx))


def test_reference_config_verified(cert):
    assert cert.status is Status.VERIFIED
    assert tuple(cert.property_results) == PROPERTY_IDS
    assert all(r.certified for r in cert.property_results.values())


def test_xi0_matches_brentq_oracle(ctx, cert):
    assert cert.xi0 == pytest.approx(xi0_brentq(ctx, L(ctx)), abs=1e-9)
    assert 0 < cert.xi0 < math.pi


def test_beta0_is_edge_root(ctx, cert):
    assert abs(lie_partial(math.pi, cert.beta0_pi, ctx)) < 1e-10
    assert -ctx.beta_max < cert.beta0_pi < ctx.beta_max


def test_lower_edge_signs(ctx, cert):
    bm = ctx.beta_max
    assert lie_partial(cert.xi0 - 0.01, -bm, ctx) > 0
    assert lie_partial(math.pi, -bm, ctx) < 0


def test_precheck_reference_vehicle(ctx):
    pre = existence_precheck(ctx)
    assert pre.condition_i
    assert not pre.condition_ii
    assert pre.sigma_bound == pytest.approx(2.63, abs=5e-3)
    assert pre.sigma_lower_bound is None
    assert not pre.analytic_guarantee


def test_precheck_condition_i_failure():
    pre = analytic_conditions(2.0, 4.0, 0.48, 1.7)
    assert not pre.condition_i and not pre.analytic_guarantee


def test_precheck_suggests_sigma():
    pre = analytic_conditions(0.5, 20.0, 0.5, math.atan(0.5))
    assert pre.sigma_lower_bound is not None and 0 < pre.sigma_lower_bound < 1


def test_high_sigma_fails_at_concavity():
    c = verify(make_ctx(sigma=0.999))
    assert c.status is Status.FAILED and c.failed_property == "P3"
    assert c.property_results["P3"].witness is not None


def test_late_failure_keeps_earlier_results():
    c = verify(make_ctx(sigma=0.999))
    assert set(c.property_results) == set(PROPERTY_IDS)
    assert c.property_results["P3"].verdict is Verdict.REFUTED


def test_property_stages_individually(ctx, cert):
    xi0, r1 = verify_property1(ctx)
    assert xi0 == cert.xi0 and all(r.certified for r in r1.values())
    beta0, r2 = verify_property2(ctx, xi0)
    assert beta0 == cert.beta0_pi and all(r.certified for r in r2.values())


def test_certificate_roundtrip_and_determinism(ctx, cert):
    payload = cert.payload()
    again = verify(ctx).payload()
    assert canonical_json(payload) == canonical_json(again)
    back = VerificationCertificate.from_payload(payload)
    assert back.verified and back.xi0 == cert.xi0 and back.ctx == ctx
    assert back.payload() == payload


def test_tampered_certificate_rejected(cert):
    payload = cert.payload()
    payload["xi0"] = 1.0
    with pytest.raises(IntegrityError):
        VerificationCertificate.from_payload(payload)
    VerificationCertificate.from_payload(payload, strict=False)


def test_forged_status_rejected(ctx):
    payload = verify(make_ctx(sigma=0.999)).payload()
    payload["status"] = "Verified"
    with pytest.raises(IntegrityError):
        VerificationCertificate.from_payload(payload, strict=False)


@pytest.mark.parametrize("sigma,status,failed", [
    (0.3, Status.FAILED, "P1a"),
    (0.6, Status.VERIFIED, None),
    (0.8, Status.VERIFIED, None),
    (0.9, Status.FAILED, "P3"),
])
def test_sigma_sweep(sigma, status, failed):
    c = verify(make_ctx(sigma=sigma))
    assert (c.status, c.failed_property) == (status, failed)
    if failed:
        res = c.property_results[failed]
        assert res.verdict is Verdict.REFUTED and res.witness is not None


def test_global_refinement_mode(ctx):
    from shieldnn.certify import CertifyConfig
    from shieldnn.verifier import VerifierConfig
    c = verify(ctx, VerifierConfig(CertifyConfig(mode="global")))
    assert c.verified
