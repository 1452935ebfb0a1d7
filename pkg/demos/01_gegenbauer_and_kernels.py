"""Gegenbauer polynomials and the inner-layer kernel, step by step.

The inner activation is the degree-2 Gegenbauer polynomial Q_2 applied to
<v, x> for random sphere weights v.  Averaging over many neurons turns the
dot products into a kernel whose Gegenbauer series we know in closed form,
and the empirical kernel concentrates on it at the usual 1/sqrt(m2) rate.

Run:  python3 demos/01_gegenbauer_and_kernels.py
"""

import numpy as np

from quadfeat.network import ActivationSpec
from quadfeat.reconstruction import kernel_pair
from quadfeat.sphere import (gegenbauer, harmonic_dim, linearize_product,
                             sample_sphere)

d = 16

print(f"=== Gegenbauer polynomials on [-{d}, {d}] (d = {d}) ===")
print("Endpoint normalization Q_k(d) = 1:")
for k in range(5):
    print(f"  Q_{k}({d}) = {gegenbauer(k, d, float(d)):.12f}")

print("\nQ_2 against its explicit form (t^2 - d) / (d(d-1)):")
t = np.array([-16.0, -4.0, 0.0, 4.0, 16.0])
explicit = (t * t - d) / (d * (d - 1))
for ti, qi, ei in zip(t, gegenbauer(2, d, t), explicit):
    print(f"  t = {ti:6.1f}:  recursive {qi: .8f}   explicit {ei: .8f}")

print("\nProduct linearization Q_2 * Q_2 = sum_k c_k Q_degree(k):")
table = linearize_product(2, 2, d)
for k, coeff in sorted(table.coefficients.items()):
    print(f"  degree {table.degree(k)}: coefficient {float(coeff):.6f}")
print(f"  coefficients sum to "
      f"{sum(float(c) for c in table.coefficients.values()):.12f}")

print(f"\n=== Kernel concentration (B(d,2) = {harmonic_dim(d, 2)}) ===")
spec = ActivationSpec(d=d)
X = sample_sphere(d, 20, seed=1)
pairs = [(X[2 * i], X[2 * i + 1]) for i in range(10)]
V_full = sample_sphere(d, 1 << 14, seed=2)
print("The analytic infinite-width kernel is c_2^2 Q_2(<x,x'>) / B(d,2);")
print("the worst deviation over 10 fixed pairs halves per 4x more neurons:")
for m2 in (1 << 10, 1 << 12, 1 << 14):
    dev = max(kernel_pair(V_full[:m2], x, xp, spec).deviation
              for x, xp in pairs)
    print(f"  m2 = {m2:6d}:  max |K_m2 - K0| = {dev:.6f}")
