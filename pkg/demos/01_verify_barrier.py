"""
Certifying the barrier for the reference vehicle
================================================

A 4 m wheelbase car (2 m to each axle) with 45 degree steering and a 20 m/s
top speed, kept outside a 4 m disc by the barrier with shape parameter 0.48.
"""

import math

import numpy as np

from shieldnn.barrier import lie_partial, reference_context
from shieldnn.verifier import existence_precheck, verify

ctx = reference_context()
print("beta_max =", round(ctx.beta_max, 4))
print("class-K gain K =", ctx.barrier.K)

# The closed-form sufficient test is far too conservative here
pre = existence_precheck(ctx)
print("analytic guarantee:", pre.analytic_guarantee, " sigma bound:", round(pre.sigma_bound, 3))

# so run the sound branch-and-bound checks instead
cert = verify(ctx)
for pid, res in cert.property_results.items():
    print(f"  {pid:6s} {res.verdict.value:10s} cells={res.cells_checked}")
print("status:", cert.status.value)
print("xi0 =", cert.xi0, " boundary root at xi = pi:", cert.beta0_pi)

# A coarse picture of the safe steering set on the barrier
xs = np.linspace(-math.pi, math.pi, 61)
bs = np.linspace(-ctx.beta_max, ctx.beta_max, 15)
safe = lie_partial(xs[None, :], bs[:, None], ctx) >= 0
for row, b in zip(safe[::-1], bs[::-1]):
    print(f"{b:+.2f} " + "".join("." if s else "#" for s in row))
print("      xi from -pi (left) to pi (right); '#' = unsafe steering")

# A stiffer barrier breaks concavity of the boundary
from shieldnn.barrier import BarrierParams, LieContext

stiff = verify(LieContext(ctx.vehicle, BarrierParams(4.0, 0.999)))
print("sigma = 0.999:", stiff.status.value, "at", stiff.failed_property,
      "witness", stiff.property_results[stiff.failed_property].witness)
