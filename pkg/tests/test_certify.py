import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shieldnn.certify import (
    CertifyConfig,
    CertResult,
    CertTarget,
    Verdict,
    bisect_root,
    certify_min,
    default_threads,
    point_check,
)
from shieldnn.errors import BracketError, ConfigurationError
from shieldnn.interval import cos, sin


def quad_target(c, a, b, x0, b0, box=((-1.0, 1.0), (-1.0, 1.0))):
    f = lambda x, y: c + a * (x - x0) ** 2 + b * (y - b0) ** 2  # noqa: E731
    g = lambda x, y: (2 * a * (x - x0), 2 * b * (y - b0))  # noqa: E731
    return CertTarget(f, g, *box)


def dense_min(target, n):
    xs = np.linspace(*target.xi, n)
    bs = np.linspace(*target.beta, n)
    X, B = np.meshgrid(xs, bs)
    return float(np.min(target.sign * target.f(X, B)))


def test_constant_is_certified_immediately():
    t = CertTarget(lambda x, y: 1.0 + 0 * x, lambda x, y: (0 * x, 0 * y), (0, 1), (0, 1))
    r = certify_min(t)
    assert r.verdict is Verdict.CERTIFIED and r.refinement_depth == 0


def test_sine_refuted_with_witness():
    t = CertTarget(lambda x, y: sin(x), lambda x, y: (cos(x), 0 * y), (-math.pi, math.pi), (0, 0))
    r = certify_min(t)
    assert r.verdict is Verdict.REFUTED
    assert math.sin(r.witness[0]) < 0


@pytest.mark.parametrize("mode", ["local", "global"])
def test_cosine_certified(mode):
    t = CertTarget(lambda x, y: cos(x), lambda x, y: (-sin(x), 0 * y), (-1, 1), (0, 0))
    assert certify_min(t, CertifyConfig(mode=mode)).certified


def test_zero_minimum_is_not_certified():
    # minimum exactly at the margin: strict positivity cannot be shown
    r = certify_min(quad_target(0.0, 1.0, 1.0, 0.3, -0.2), CertifyConfig(max_depth=6))
    assert r.verdict in (Verdict.INCONCLUSIVE, Verdict.REFUTED)


def test_tight_minimum_needs_refinement():
    r = certify_min(quad_target(1e-3, 1.0, 1.0, 0.3, -0.2))
    assert r.certified and r.refinement_depth > 0


def test_sign_and_margin():
    t = quad_target(0.5, 1.0, 1.0, 0.0, 0.0)
    neg = CertTarget(lambda x, y: -t.f(x, y), lambda x, y: tuple(-g for g in t.grad(x, y)),
                     t.xi, t.beta, sign=-1)
    assert certify_min(neg).certified
    assert certify_min(t, CertifyConfig(margin=0.4)).certified
    assert not certify_min(t, CertifyConfig(margin=0.6, max_depth=4)).certified


def test_parallel_matches_serial():
    t = quad_target(0.01, 1.0, 2.0, 0.1, 0.2)
    cfg = CertifyConfig(initial_grid=0.01)
    a = certify_min(t, cfg)
    b = certify_min(t, CertifyConfig(initial_grid=0.01, threads=4))
    assert a == b


def test_config_validation():
    with pytest.raises(ConfigurationError):
        CertifyConfig(initial_grid=0)
    with pytest.raises(ConfigurationError):
        CertifyConfig(mode="adaptive")
    with pytest.raises(ConfigurationError):
        CertTarget(lambda x, y: x, lambda x, y: (x, y), (1, 0), (0, 1))
    with pytest.raises(ConfigurationError):
        CertTarget(lambda x, y: x, lambda x, y: (x, y), (0, 1), (0, 1), sign=2)


def test_non_interval_target_is_configuration_error():
    t = CertTarget(lambda x, y: math.sin(x), lambda x, y: (1.0, 0.0), (0, 1), (0, 1))
    with pytest.raises(ConfigurationError):
        certify_min(t)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("SHIELDNN_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("SHIELDNN_THREADS", "junk")
    assert default_threads() == 1


def test_point_check():
    f = lambda x, y: x - y  # noqa: E731
    assert point_check(f, 1.0, 0.5, 1).certified
    assert point_check(f, 0.5, 1.0, 1).verdict is Verdict.REFUTED
    assert point_check(f, 0.5, 0.5, 1).verdict is Verdict.INCONCLUSIVE


def test_result_roundtrip():
    r = CertResult(Verdict.REFUTED, 10, 0.01, 2, (0.1, 0.2), "x")
    assert CertResult.from_dict(r.to_dict()) == r


def test_bisect_root():
    assert bisect_root(math.cos, 0.0, 3.0) == pytest.approx(math.pi / 2, abs=1e-10)
    with pytest.raises(BracketError):
        bisect_root(math.cos, 0.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.2, 0.3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_verdicts_are_sound(c, a, b, x0, b0):
    t = quad_target(c, a, b, x0, b0)
    r = certify_min(t, CertifyConfig(max_depth=8))
    if r.verdict is Verdict.CERTIFIED:
        assert c > 0 and dense_min(t, 401) > 0
    if r.verdict is Verdict.REFUTED:
        assert t.sign * t.f(*r.witness) < 0


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.05, 0.05), st.floats(-1, 1), st.floats(-1, 1))
def test_refinement_is_monotone(c, x0, b0):
    t = quad_target(c, 1.0, 1.0, x0, b0)
    verdicts = [certify_min(t, CertifyConfig(initial_grid=g, max_depth=6)).verdict for g in (0.2, 0.05, 0.01)]
    for coarse, fine in zip(verdicts, verdicts[1:]):
        if coarse is Verdict.CERTIFIED:
            assert fine is Verdict.CERTIFIED
