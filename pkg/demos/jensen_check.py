"""Numerical Jensen formula: circle means of a potential equal N(r)."""

import numpy as np

from subharm import Measure
from subharm.measure import generic_origin_shift, verify_generic_origin
from subharm.metrics import circle_mean, integrated_counting, l1_disk_error, monte_carlo_l1

rng = np.random.default_rng(5)
r = np.exp(rng.uniform(-1, 3, 20))
m = Measure(r * np.exp(2j * np.pi * rng.random(20)), rng.uniform(0.2, 2, 20))

print("  r        circle mean      N(r)             residual")
for R in (0.3, 1.7, 6.1, 25.0):
    cm, N = circle_mean(m, R), integrated_counting(m, R)
    print(f"  {R:<8g} {cm:<16.12f} {N:<16.12f} {cm - N:.1e}")

value, bound = l1_disk_error(m, None, 10.0)
mc, se = monte_carlo_l1(m, None, 10.0, samples=200_000)
print(f"\nL1 on |z|<10: quadrature {value:.4f} (+-{bound:.1e}), Monte Carlo {mc:.4f} (+-{se:.1e})")

# integers on a line: no shift along the axis is generic
line = Measure(np.arange(1, 21), np.ones(20))
z = generic_origin_shift(line, 1.0, seed=0)
print(f"\ngeneric origin for 1..20: {z:.6f}, verified {verify_generic_origin(line, z)['ok']}")
