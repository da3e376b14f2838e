"""How the core energy of a circular loop grows as the core radius shrinks.

The total splits into a logarithmic part, ``|b|^2 L |log eps| / 4pi``, and a
finite remainder. For a unit ring the remainder settles on ``(log 8 - 2) / 2``.
"""
import numpy as np

from dislocflow import curves
from dislocflow.energy import core_energy

ring = curves.circle(1.0, 64)
b = np.array([0.0, 0.0, 1.0])

print(f"{'eps':>8} {'total':>12} {'log part':>12} {'remainder':>12}")
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    e = core_energy(ring, b, eps, method="surface")
    print(f"{eps:8.0e} {e.total:12.6f} {e.asymptote:12.6f} {e.renormalized:12.8f}")
print(f"ring constant (log 8 - 2) / 2 = {0.5 * (np.log(8) - 2):.8f}")

# Doubling the loop at twice the core radius doubles the energy exactly.
big = curves.circle(2.0, 64)
print("scaling check:", core_energy(big, b, 2e-3, method="surface").total
      / core_energy(ring, b, 1e-3, method="surface").total)
