import math

import numpy as np
import pytest

from conftest import make_ctx
from oracles import boundary_brentq
from shieldnn.barrier import gamma_prime, gamma_second, lie_partial
from shieldnn.errors import ConfigurationError, IntegrityError, SynthesisError, TraceError
from shieldnn.synthesis import (
    Combiner,
    FilterNetwork,
    PwlFunction,
    ReluNetwork,
    assemble_filter,
    build_tangent_pwl,
    export_relu,
    min_of_lines,
    safe_interval,
    synthesize,
    trace_boundary,
)
from shieldnn.verifier import verify


@pytest.fixture(scope="module")
def trace(cert):
    return trace_boundary(cert)


def L(ctx):
    return lambda x, b: float(lie_partial(x, b, ctx))


def test_trace_endpoints_and_residual(ctx, cert, trace):
    assert trace.xi[0] == cert.xi0 and trace.xi[-1] == math.pi
    assert trace.value[0] == -ctx.beta_max and trace.value[-1] == cert.beta0_pi
    assert np.all(np.abs(lie_partial(trace.xi, trace.value, ctx)) <= trace.trace_tol)


def test_trace_matches_brentq(ctx, trace):
    f = L(ctx)
    for i in range(1, len(trace) - 1, 37):
        assert trace.value[i] == pytest.approx(boundary_brentq(ctx, f, trace.xi[i]), abs=1e-12)


def test_trace_slopes_match_finite_differences(trace):
    fd = np.gradient(trace.value, trace.xi)
    np.testing.assert_allclose(trace.slope[1:-1], fd[1:-1], atol=1e-4)


def test_trace_curvature_matches_second_difference(ctx, trace):
    x, y = trace.xi, trace.value
    dx = x[1] - x[0]
    d2 = (y[2:] - 2 * y[1:-1] + y[:-2]) / dx**2
    np.testing.assert_allclose(gamma_second(x[1:-1], y[1:-1], ctx), d2, atol=1e-3)
    assert np.all(gamma_second(x, y, ctx) < 0)


def test_trace_needs_verified_certificate():
    bad = verify(make_ctx(sigma=0.999))
    with pytest.raises(TraceError):
        trace_boundary(bad)


def test_min_of_lines_breakpoints():
    g = min_of_lines([1.0, 0.0, -1.0], [0.0, -0.5, 0.0])
    np.testing.assert_allclose(g.xs, [-math.pi, -0.5, 0.5, math.pi])
    np.testing.assert_allclose(g.ys, [-math.pi, -0.5, -0.5, -math.pi])
    xs = np.linspace(-math.pi, math.pi, 2001)
    np.testing.assert_allclose(np.interp(xs, g.xs, g.ys), g(xs), atol=1e-14)


def test_inactive_line_adds_no_breakpoint():
    g = min_of_lines([1.0, 0.0, -1.0], [0.0, 0.5, 0.0])
    np.testing.assert_allclose(g.xs, [-math.pi, 0.0, math.pi])


def test_pwl_rejects_unsorted_breakpoints():
    with pytest.raises(ConfigurationError):
        PwlFunction(np.array([0.0, 0.0]), np.array([1.0, 2.0]), Combiner.EXPLICIT)


def test_tangents_lie_above_boundary(trace):
    g = build_tangent_pwl(trace, 32)
    assert np.all(g(trace.xi) >= trace.value - 1e-12)


def test_tangent_gap_shrinks_quadratically(trace):
    gaps = [np.max(build_tangent_pwl(trace, k)(trace.xi) - trace.value) for k in (8, 16, 32)]
    assert 3.0 < gaps[0] / gaps[1] < 5.5
    assert 3.0 < gaps[1] / gaps[2] < 5.5


def test_too_few_tangents(trace, cert):
    with pytest.raises(ConfigurationError):
        build_tangent_pwl(trace, 1)
    with pytest.raises(ConfigurationError):
        synthesize(cert, k_tangents=1)


def test_filter_margin_and_bounds(ctx, filt):
    assert filt.margin > 0
    xs = np.linspace(-math.pi, math.pi, 4001)
    lo, hi = filt.lower(xs), filt.upper(xs)
    assert np.all(lo <= hi)
    assert np.all(lo >= -ctx.beta_max) and np.all(hi <= ctx.beta_max)
    np.testing.assert_array_equal(filt.upper(xs), -filt.lower(-xs))
    assert filt.lower(0.0) == -ctx.beta_max and filt.upper(0.0) == ctx.beta_max


def test_margin_is_dense_minimum(filt):
    xs = np.linspace(-math.pi, math.pi, 200001)
    dense = np.min(filt.upper(xs) - filt.lower(xs))
    assert filt.margin <= dense + 1e-12
    assert dense - filt.margin < 1e-4


def test_explicit_breakpoints_agree_with_lines(filt):
    xs = np.random.default_rng(0).uniform(-math.pi, math.pi, 10000)
    np.testing.assert_allclose(filt.lower_pwl(xs), filt.lower(xs), atol=1e-12)
    np.testing.assert_allclose(filt.upper_pwl(xs), filt.upper(xs), atol=1e-12)


def test_sandwich_against_oracle(ctx, cert, filt):
    xs = np.linspace(-math.pi, math.pi, 3001)
    lo, hi = safe_interval(ctx, cert.xi0, xs)
    assert np.all(filt.lower(xs) >= lo - 1e-9)
    assert np.all(filt.upper(xs) <= hi + 1e-9)


def test_crossing_bounds_raise(ctx):
    # a line sitting above beta_max everywhere forces lower > upper
    with pytest.raises(SynthesisError):
        assemble_filter(min_of_lines([0.0, 0.1], [0.6, 0.9]), ctx)


def test_retry_increases_tangents(cert, monkeypatch):
    import shieldnn.synthesis as syn
    calls = []
    real = syn.assemble_filter

    def flaky(g, ctx, provenance=""):
        calls.append(len(g.slopes))
        if len(g.slopes) < 8:
            raise SynthesisError("coarse")
        return real(g, ctx, provenance)

    monkeypatch.setattr(syn, "assemble_filter", flaky)
    out = syn.synthesize(cert, k_tangents=2)
    assert calls == [2, 4, 8] and len(out.slopes) == 8


def test_relu_equivalence(ctx, filt):
    net = export_relu(filt)
    rng = np.random.default_rng(2)
    xi = rng.uniform(-math.pi, math.pi, 10000)
    beta = rng.uniform(-ctx.beta_max, ctx.beta_max, 10000)
    np.testing.assert_allclose(net(xi, beta), filt.clamp(xi, beta), atol=1e-9)
    assert all(l.relu for l in net.layers[:-1]) and not net.layers[-1].relu
    assert net.layers[-1].weight.shape[0] == 1 and net.layers[0].weight.shape[1] == 2
    again = ReluNetwork.from_list(net.to_list())
    np.testing.assert_array_equal(again(xi, beta), net(xi, beta))


def test_relu_scalar_call(filt):
    net = export_relu(filt)
    assert isinstance(net(0.1, 0.2), float)


def test_filter_payload_roundtrip(cert, filt):
    payload = filt.payload()
    assert payload["provenance"] == cert.content_hash
    back = FilterNetwork.from_payload(payload)
    assert back.margin == filt.margin and back.ctx == filt.ctx
    payload["margin"] = 1.0
    with pytest.raises(IntegrityError):
        FilterNetwork.from_payload(payload)
    with pytest.raises(IntegrityError):
        FilterNetwork.from_payload(payload, strict=False)


def test_gamma_prime_slope_sign_near_xi0(ctx, cert):
    assert gamma_prime(cert.xi0, -ctx.beta_max, ctx) > 0
