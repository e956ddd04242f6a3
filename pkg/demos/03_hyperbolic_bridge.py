"""Brownian bridges in the half-space model and how far they stray.

A bridge from x to a point y at distance s stays close to the geodesic
segment between them: the probability that it leaves a fixed tube decays in
s.  On the product H^2 x H^2 the same experiment shows no decay, since each
factor wanders independently of the diagonal.
"""

import numpy as np

from hypbridge import bridge as B
from hypbridge.estimators import proportion

n, a = 2000, 0.25
print(f"bridges on H^2, P[sup f >= {a}] with f = half squared distance to the geodesic")
for s in (2.0, 4.0, 8.0):
    spec = B.BridgeSpec.standard(2, s, step=1e-3)
    sup = B.bridge_sup_f(spec, seed=int(s), n_paths=n)
    line, seg = proportion(sup["line"] >= a), proportion(sup["segment"] >= a)
    print(f"  s={s:g}: line {line.mean:.3f}+-{line.stderr:.3f}  segment {seg.mean:.3f}+-{seg.stderr:.3f}")

# one path, sampled coarsely: the last two times are 1 - end_cut and 1
path = B.simulate_hyp_bridge(B.BridgeSpec.standard(2, 3.0, step=1e-2), seed=7)
z = path.values[0]
print("\none bridge to (0, e^3):")
for i in np.linspace(0, len(z) - 1, 6).astype(int):
    print(f"  t={path.times[i]:.3f}  z=({z[i, 0]: .4f}, {z[i, 1]:.4f})")

print(f"\nbidisk, P[sup dist to the diagonal > 0.5]")
for s in (2.0, 4.0, 8.0):
    r = B.bidisk_sup_dist(s, 1e-3, seed=int(s), n_paths=1000)
    e = proportion(r["sup"] > 0.5)
    print(f"  s={s:g}: {e.mean:.3f}+-{e.stderr:.3f}")
