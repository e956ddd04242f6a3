"""Heat kernel on hyperbolic space.

Walks through the normalized kernel h^d, the descent relation that links
dimensions d and d + 2, and how the radial drift (t/rho) grad log p_t
approaches 1 far from the source.
"""

import numpy as np

from hypbridge import kernels as K

# p_t(rho) for a few dimensions: the decay is Gaussian in rho with an extra
# exponential rate (d - 1)/2 from the volume growth
rhos = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0])
print("rho      " + "  ".join(f"{r:>10g}" for r in rhos))
for d in (2, 3):
    print(f"p_1, d={d} " + "  ".join(f"{v:10.4e}" for v in K.heat_kernel(d, 1.0, rhos)))

# descent: -(1/sinh rho) d/drho h^d is proportional to h^{d+2}
t, rho, eps = 0.5, np.linspace(1.0, 6.0, 6), 1e-5
for d in (1, 2):
    dh = (np.exp(K.log_h(d, t, rho + eps)) - np.exp(K.log_h(d, t, rho - eps))) / (2 * eps)
    ratio = -dh / np.sinh(rho) / np.exp(K.log_h(d + 2, t, rho))
    print(f"\ndescent ratio d={d} -> d={d + 2}:", np.array2string(ratio, precision=8))

# the bridge drift: (t/rho) grad log p_t(rho) -> 1, more slowly in higher d
print("\n(t/rho) grad log p_t at t = 0.25")
for d in (2, 3, 5):
    vals = [0.25 / r * K.grad_log_heat(d, 1.0, 0.25, r) for r in (1.0, 5.0, 20.0, 60.0)]
    print(f"  d={d}: " + "  ".join(f"{v:.5f}" for v in vals))

# two-sided envelope K^{-1} p* <= p <= K p* on rho in [1, 40]
grid = np.linspace(1.0, 40.0, 391)
env = K.fit_envelope(3, [0.25, 1.0], grid)
print(f"\nenvelope for d=3: K={env.K:.4f}, k1=k2={env.k1:.4f}")
