"""Command-line front end: ``shieldnn {precheck,verify,synthesize,region,simulate}``.

Exit codes: 0 success, 1 domain failure (refuted, inconclusive, margin or
parameter mismatch), 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import canonical_json, content_hash, read_json, write_json
from .barrier import lie_partial
from .certify import default_threads
from .config import ToolConfig
from .errors import ConfigurationError, DomainError, IntegrityError, ShieldError, SynthesisError, TraceError
from .filter_runtime import load_filter
from .sim import run_campaign
from .synthesis import export_relu, synthesize, trace_boundary
from .verifier import VerificationCertificate, existence_precheck, verify

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


def _load_config(path) -> ToolConfig:
    try:
        return ToolConfig.from_dict(read_json(path))
    except (OSError, json.JSONDecodeError) as exc:
        raise _Usage(f"cannot read config {path}: {exc}") from None
    except ConfigurationError as exc:
        raise _Usage(f"malformed config {path}: {exc}") from None


def _load_cert(path, strict=True) -> VerificationCertificate:
    try:
        return VerificationCertificate.from_payload(read_json(path), strict=strict)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise _Usage(f"cannot read certificate {path}: {exc}") from None


def _threads(args) -> int:
    return args.threads if args.threads else default_threads()


def _file_hash(path) -> str:
    return content_hash({"bytes": Path(path).read_text()})


# ---------------------------------------------------------------------------

def cmd_precheck(args) -> int:
    cfg = _load_config(args.config)
    pre = existence_precheck(cfg.ctx)
    print(f"condition (i)  beta_max <= pi/2: {'holds' if pre.condition_i else 'FAILS'}")
    print(f"condition (ii) lhs = {pre.condition_ii_lhs:.4f} >= 2: {'holds' if pre.condition_ii else 'fails'}")
    if pre.analytic_guarantee:
        print("analytic guarantee holds")
    elif pre.sigma_lower_bound is None:
        print(f"no analytic guarantee (bound {pre.sigma_bound:.2f} > 1); proceed to sound verification")
    else:
        print(f"no analytic guarantee; sigma >= {pre.sigma_lower_bound:.4f} would satisfy the sufficient bound")
    if args.json:
        print(canonical_json(pre.to_dict()), end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    cert = verify(cfg.ctx, cfg.certify.verifier_config(_threads(args)))
    try:
        write_json(args.out, cert.payload())
    except OSError as exc:
        raise _Usage(f"cannot write {args.out}: {exc}") from None
    for pid, res in cert.property_results.items():
        extra = f" witness={res.witness}" if res.witness is not None else ""
        print(f"{pid:6s} {res.verdict.value:12s} cells={res.cells_checked} depth={res.refinement_depth}{extra}")
    print(f"status: {cert.status.value}" + (f" ({cert.failed_property})" if cert.failed_property else ""))
    if cert.verified:
        print(f"xi0 = {cert.xi0:.10f}  beta0(pi) = {cert.beta0_pi:.10f}")
    return EXIT_OK if cert.verified else EXIT_DOMAIN


def cmd_synthesize(args) -> int:
    if args.k_tangents is not None and args.k_tangents < 2:
        raise _Usage("k_tangents must be at least 2")
    try:
        cert = _load_cert(args.cert, strict=not args.no_strict)
    except IntegrityError as exc:
        print(f"refusing certificate: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if not cert.verified:
        print(f"certificate status is {cert.status.value}; nothing to synthesise", file=sys.stderr)
        return EXIT_DOMAIN
    k = args.k_tangents or 32
    try:
        filt = synthesize(cert, k_tangents=k)
    except (SynthesisError, TraceError) as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        write_json(args.out, filt.payload(export_relu(filt)))
    except OSError as exc:
        raise _Usage(f"cannot write {args.out}: {exc}") from None
    print(f"tangents={len(filt.slopes)} margin={filt.margin:.6g} provenance={filt.provenance}")
    return EXIT_OK


def cmd_region(args) -> int:
    if args.cert:
        cert = _load_cert(args.cert)
    elif args.config:
        cfg = _load_config(args.config)
        cert = verify(cfg.ctx, cfg.certify.verifier_config(_threads(args)))
    else:
        raise _Usage("region needs --config or --cert")
    ctx = cert.ctx
    n = args.grid
    if n < 2:
        raise _Usage("grid must be at least 2")
    bm = ctx.beta_max
    xs = np.linspace(-math.pi, math.pi, n)
    bs = np.linspace(-bm, bm, n)
    X, B = np.meshgrid(xs, bs, indexing="ij")
    L = lie_partial(X, B, ctx)
    out = Path(args.out)
    try:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("xi", "beta", "lie", "safe"))
            for x, b, l in zip(X.ravel(), B.ravel(), L.ravel()):
                w.writerow((repr(float(x)), repr(float(b)), repr(float(l)), int(l >= 0)))
        if cert.verified:
            trace = trace_boundary(cert, args.samples)
            bpath = out.with_name(out.stem + "_boundary.csv")
            with open(bpath, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("curve", "xi", "beta"))
                for x, b in zip(trace.xi, trace.value):
                    w.writerow(("lower", repr(float(x)), repr(float(b))))
                for x, b in zip(trace.xi[::-1], trace.value[::-1]):
                    w.writerow(("upper", repr(float(-x)), repr(float(-b))))
            print(f"boundary written to {bpath}")
    except OSError as exc:
        raise _Usage(f"cannot write region output: {exc}") from None
    print(f"status: {cert.status.value}; xi0 = {cert.xi0:.6f}; grid {n}x{n} written to {out}")
    return EXIT_OK if cert.verified else EXIT_DOMAIN


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    ctx = cfg.ctx
    sim = cfg.sim
    filt = None
    if args.filter:
        try:
            filt = load_filter(args.filter)
        except OSError as exc:
            raise _Usage(f"cannot read filter {args.filter}: {exc}") from None
        except IntegrityError as exc:
            print(f"refusing filter: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        if filt.ctx != ctx:
            print("filter was built for different vehicle or barrier parameters", file=sys.stderr)
            return EXIT_DOMAIN
    modes = {"on": [True], "off": [False], "both": [True, False]}[args.mode]
    if True in modes and filt is None:
        raise _Usage("filter mode 'on' needs --filter")
    n = args.episodes if args.episodes is not None else sim.episodes
    seed = args.seed if args.seed is not None else sim.seed
    if args.controller:
        sim = type(sim)(**{**sim.__dict__, "controller": {"kind": args.controller}})
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _Usage(f"cannot create {outdir}: {exc}") from None
    summary = {"schema": "shieldnn.campaign/1", "tool_version": __version__,
               "config_hash": content_hash(cfg.to_dict()),
               "filter_hash": _file_hash(args.filter) if args.filter else None,
               "seed": seed, "campaigns": {}}
    for on in modes:
        tag = "filter_on" if on else "filter_off"
        try:
            camp = run_campaign(n, sim.template(on), seed, filt, ctx)
        except (ConfigurationError, DomainError) as exc:
            raise _Usage(str(exc)) from None
        camp.write_csv(outdir / f"episodes_{tag}.csv")
        summary["campaigns"][tag] = camp.to_dict()
        print(f"{tag}: {camp.collisions}/{camp.n} collisions (rate {camp.collision_rate:.4f}), "
              f"min_r = {min(e.min_r for e in camp.episodes):.4f}")
    write_json(outdir / "summary.json", summary)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shieldnn", description="Barrier-certified steering filter for the KBM.")
    p.add_argument("--version", action="version", version=f"shieldnn {__version__}")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: $SHIELDNN_THREADS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("precheck", help="analytic sufficient conditions")
    s.add_argument("--config", required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_precheck)

    s = sub.add_parser("verify", help="soundly verify the barrier and write a certificate")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("synthesize", help="build the filter from a Verified certificate")
    s.add_argument("--cert", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--k-tangents", dest="k_tangents", type=int, default=None)
    s.add_argument("--no-strict", action="store_true", help="skip the certificate hash check")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("region", help="sign field of the on-barrier Lie derivative and traced boundary")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--config")
    g.add_argument("--cert")
    s.add_argument("--out", required=True)
    s.add_argument("--grid", type=int, default=101)
    s.add_argument("--samples", type=int, default=512)
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("simulate", help="closed-loop campaign")
    s.add_argument("--config", required=True)
    s.add_argument("--filter")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--mode", choices=("on", "off", "both"), default="on")
    s.add_argument("--episodes", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--controller", choices=("adversarial", "random", "waypoint", "idle"))
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ShieldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
