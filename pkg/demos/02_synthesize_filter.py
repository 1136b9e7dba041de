"""
From certificate to filter network
==================================

Tangent lines to the traced lower boundary give a min-of-affine fallback
steering law; mirroring it gives the upper bound, and the clamp between
them is exported as a small ReLU network.
"""

import math

import numpy as np

from shieldnn.barrier import lie_on_barrier, reference_context
from shieldnn.synthesis import build_tangent_pwl, export_relu, synthesize, trace_boundary
from shieldnn.verifier import verify

ctx = reference_context()
cert = verify(ctx)

trace = trace_boundary(cert, n_samples=512)
print("boundary from", trace.value[0], "to", trace.value[-1])

# tangent error falls roughly fourfold each time the tangent count doubles
for k in (4, 8, 16, 32, 64):
    g = build_tangent_pwl(trace, k)
    print(f"k = {k:3d}  max gap above boundary = {np.max(g(trace.xi) - trace.value):.2e}")

filt = synthesize(cert, k_tangents=32)
print("certified margin between bounds:", filt.margin)

xs = np.linspace(-math.pi, math.pi, 9)
print(np.c_[xs, filt.lower(xs), filt.upper(xs)].round(4))

# the fallback is itself safe on the barrier
grid = np.linspace(-math.pi, math.pi, 4096)
print("min on-barrier Lie derivative at lower bound:", lie_on_barrier(grid, filt.lower(grid), 1.0, ctx).min())

net = export_relu(filt)
print("ReLU layer widths:", [layer.weight.shape[0] for layer in net.layers])
rng = np.random.default_rng(0)
xi = rng.uniform(-math.pi, math.pi, 5)
beta = rng.uniform(-ctx.beta_max, ctx.beta_max, 5)
print(np.c_[xi, beta, net(xi, beta), filt.clamp(xi, beta)].round(4))
