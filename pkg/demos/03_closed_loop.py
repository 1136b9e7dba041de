"""
Closed-loop runs against an obstacle-seeking controller
=======================================================

The adversarial controller steers straight for the obstacle at full
throttle. Without the filter nearly every run ends inside the safety
radius; with it none do.
"""

import math

import numpy as np

from shieldnn.barrier import reference_context
from shieldnn.kbm import RelState
from shieldnn.sim import CampaignTemplate, EpisodeConfig, run_campaign, run_episode
from shieldnn.synthesis import synthesize
from shieldnn.verifier import verify

ctx = reference_context()
filt = synthesize(verify(ctx))

# One episode, recorded every 0.1 s
cfg = EpisodeConfig(RelState(12.0, 2.0, 15.0), {"kind": "adversarial"}, t_max=6.0, record_every=100)
ep = run_episode(cfg, filt, ctx)
print("min distance", round(ep.min_r, 3), " interventions", ep.interventions)
print(" t     r      xi    beta_in beta_out")
for t, r, xi, v, a, b_in, b_out, hit in ep.trajectory[::6]:
    print(f"{t:4.1f} {r:6.2f} {xi:6.2f} {b_in:7.3f} {b_out:7.3f}")

# Campaigns (shortened horizon to keep the demo quick)
for on in (False, True):
    s = run_campaign(200, CampaignTemplate({"kind": "adversarial"}, filter_on=on, t_max=20.0), 0,
                     filt if on else None, ctx)
    d = s.to_dict()
    print(f"filter {'ON ' if on else 'OFF'}: collision rate {d['collision_rate']:.3f}, min r {d['min_r']:.3f}")
    counts = np.array(d["histogram"]["counts"])
    edges = np.array(d["histogram"]["edges"])
    for lo, c in zip(edges[::4], np.add.reduceat(counts, np.arange(0, len(counts), 4))):
        print(f"   r >= {lo:5.2f}: {'*' * int(math.ceil(c / 4))}")
