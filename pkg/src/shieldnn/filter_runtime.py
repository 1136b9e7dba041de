"""Run-time safety filter: clamp a commanded steering into the fallback band."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import read_json
from .barrier import LieContext, lie_plus_alpha
from .errors import IntegrityError
from .kbm import Control, RelState, beta_from_delta, delta_from_beta
from .synthesis import FilterNetwork
from .verifier import VerificationCertificate


@dataclass(frozen=True)
class FilterDecision:
    input_beta: float
    output_beta: float
    intervened: bool
    active_bound: str | None  # "lower", "upper" or None


def apply_filter(filt: FilterNetwork, state: RelState, control: Control) -> tuple[Control, FilterDecision]:
    """Return the filtered control and a record of what happened.

    Commands already inside ``[lower(xi), upper(xi)]`` are returned bit-for-bit;
    acceleration always passes through.
    """
    control.check(filt.ctx.vehicle)
    lo = float(filt.lower(state.xi))
    hi = float(filt.upper(state.xi))
    beta = control.beta
    if beta < lo:
        out, bound = lo, "lower"
    elif beta > hi:
        out, bound = hi, "upper"
    else:
        out, bound = beta, None
    return Control(control.a, out), FilterDecision(beta, out, bound is not None, bound)


def apply_filter_delta(filt: FilterNetwork, state: RelState, a: float, delta_f: float):
    """Same as :func:`apply_filter` for a front-wheel steering command."""
    vehicle = filt.ctx.vehicle
    beta = float(beta_from_delta(delta_f, vehicle))
    ctrl, dec = apply_filter(filt, state, Control(a, beta))
    delta_out = delta_f if not dec.intervened else float(delta_from_beta(ctrl.beta, vehicle))
    return a, delta_out, dec


def is_in_R(state: RelState, control: Control, ctx: LieContext) -> bool:
    """Whether the control keeps ``dh/dt + alpha(h) >= 0`` at ``state``."""
    return lie_plus_alpha(state, control.beta, ctx) >= 0.0


def load_filter(path, certificate: VerificationCertificate | None = None, strict: bool = True) -> FilterNetwork:
    """Load a filter artifact, checking its seal and, if given, its certificate link."""
    payload = read_json(Path(path))
    filt = FilterNetwork.from_payload(payload, strict=strict)
    if certificate is not None:
        if filt.provenance != certificate.content_hash:
            raise IntegrityError("filter was not synthesised from the supplied certificate")
        if filt.ctx != certificate.ctx:
            raise IntegrityError("filter and certificate disagree on vehicle or barrier parameters")
    return filt


def filter_arrays(filt: FilterNetwork, xi, beta):
    """Vectorised clamp; returns the output steering and an intervention mask."""
    xi = np.asarray(xi, dtype=float)
    beta = np.asarray(beta, dtype=float)
    out = filt.clamp(xi, beta)
    return out, out != beta


__all__ = ["FilterDecision", "apply_filter", "apply_filter_delta", "is_in_R", "load_filter",
           "filter_arrays"]
