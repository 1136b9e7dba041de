import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_ctx
from shieldnn._io import write_json
from shieldnn.barrier import lie_on_barrier, lie_plus_alpha_arrays, r_min
from shieldnn.errors import DomainError, IntegrityError
from shieldnn.filter_runtime import apply_filter, apply_filter_delta, filter_arrays, is_in_R, load_filter
from shieldnn.kbm import Control, RelState, beta_from_delta
from shieldnn.synthesis import synthesize
from shieldnn.verifier import verify

BM = math.atan(0.5)


def test_pass_through_at_zero(filt):
    for beta in np.linspace(-BM, BM, 9):
        ctrl, dec = apply_filter(filt, RelState(5.0, 0.0, 3.0), Control(1.5, beta))
        assert ctrl.beta == beta and ctrl.a == 1.5
        assert not dec.intervened and dec.active_bound is None


def test_facing_obstacle_overrides_to_lower(filt):
    ctrl, dec = apply_filter(filt, RelState(8.0, math.pi, 3.0), Control(0.0, -BM))
    assert dec.intervened and dec.active_bound == "lower"
    assert ctrl.beta == float(filt.lower(math.pi)) and ctrl.beta > 0


def test_upper_bound_active(filt):
    _, dec = apply_filter(filt, RelState(8.0, -math.pi, 3.0), Control(0.0, BM))
    assert dec.intervened and dec.active_bound == "upper"


def test_inadmissible_command_rejected(filt):
    with pytest.raises(DomainError):
        apply_filter(filt, RelState(8.0, 0.0, 3.0), Control(0.0, 1.0))


@settings(max_examples=300, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-BM, BM))
def test_mirror_idempotence_projection(filt, xi, beta):
    s, ms = RelState(6.0, xi, 2.0), RelState(6.0, -xi, 2.0)
    out, dec = apply_filter(filt, s, Control(0.0, beta))
    mout, _ = apply_filter(filt, ms, Control(0.0, -beta))
    assert mout.beta == pytest.approx(-out.beta, abs=1e-15)
    again, dec2 = apply_filter(filt, s, out)
    assert again.beta == out.beta and not dec2.intervened
    lo, hi = float(filt.lower(xi)), float(filt.upper(xi))
    assert lo <= out.beta <= hi
    assert out.beta == min(max(beta, lo), hi)
    assert dec.intervened == (out.beta != beta)


def test_override_is_safe_on_barrier(ctx, filt):
    xs = np.linspace(-math.pi, math.pi, 4096)
    assert np.all(lie_on_barrier(xs, filt.lower(xs), 1.0, ctx) >= -1e-6)
    assert np.all(lie_on_barrier(xs, filt.upper(xs), 1.0, ctx) >= -1e-6)


def test_is_in_R_examples(ctx, filt):
    xi = 2.5
    s = RelState(float(r_min(xi, ctx)), xi, 4.0)
    assert is_in_R(s, Control(0.0, float(filt.lower(xi)) + 1e-9), ctx)
    for beta in np.linspace(-BM, BM, 7):
        assert is_in_R(RelState(400.0, 0.0, 20.0), Control(0.0, beta), ctx)
    assert is_in_R(RelState(9.0, math.pi, 0.0), Control(0.0, -BM), ctx)
    assert not is_in_R(RelState(float(r_min(math.pi, ctx)), math.pi, 4.0), Control(0.0, -BM), ctx)


def test_filtered_control_safe_off_barrier(ctx, filt):
    rng = np.random.default_rng(4)
    n = 10000
    xi = rng.uniform(-math.pi, math.pi, n)
    r = r_min(xi, ctx) * (1.0 + rng.exponential(0.3, n))
    v = ctx.vehicle.v_max * (1.0 - rng.uniform(0, 1, n))
    beta, _ = filter_arrays(filt, xi, rng.uniform(-BM, BM, n))
    assert np.all(lie_plus_alpha_arrays(r, xi, v, beta, ctx) >= -1e-6)


def test_delta_wrapper(ctx, filt):
    a, d, dec = apply_filter_delta(filt, RelState(6.0, 0.0, 3.0), 0.5, 0.3)
    assert (a, d, dec.intervened) == (0.5, 0.3, False)
    a, d, dec = apply_filter_delta(filt, RelState(8.0, math.pi, 3.0), 0.5, -math.pi / 4)
    assert dec.intervened
    assert float(beta_from_delta(d, ctx.vehicle)) == pytest.approx(dec.output_beta, abs=1e-12)


def test_load_filter_checks_provenance(tmp_path, cert, filt):
    path = tmp_path / "f.json"
    write_json(path, filt.payload())
    assert load_filter(path, cert).margin == filt.margin
    other = verify(make_ctx(sigma=0.6))
    with pytest.raises(IntegrityError):
        load_filter(path, other)
    forged = synthesize(other).payload()
    forged["provenance"] = cert.content_hash
    write_json(path, forged)
    with pytest.raises(IntegrityError):
        load_filter(path)
