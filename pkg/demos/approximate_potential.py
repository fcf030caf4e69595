"""Approximate the potential of a random measure by log|f| for a finite zero set.

Prints the zero count by origin and the L1 disk error normalized by
``R^2 log psi(R)``.
"""

import collections
import warnings

import numpy as np

from subharm import Measure
from subharm.decomposition import SlowlyVarying
from subharm.metrics import counting_function, error_report
from subharm.potential import approximate

rng = np.random.default_rng(3)
n = 150
radii = np.exp(rng.uniform(0.5, 6, n))
m = Measure(radii * np.exp(2j * np.pi * rng.random(n)), rng.uniform(0.1, 1.5, n))
psi = SlowlyVarying.log_e()

with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    a = approximate(m, psi, seed=0)
print(f"mass {m.total_mass():.2f} -> {a.zeros.count} zeros")
tally = collections.Counter()
for tag, k in zip(a.zeros.tags, a.zeros.multiplicities):
    tally[tag] += int(k)
for tag, k in sorted(tally.items()):
    print(f"  {tag:<13s}{k}")

grid = np.geomspace(2, 2000, 200)
gap = counting_function(m, grid) - counting_function(a.zeros, grid)
print(f"max |n(r, mu) - n(r, f)| = {np.max(np.abs(gap)):.2f}")

rep = error_report(m, a.zeros, psi, [8.0, 32.0, 128.0])
for R, I, q in zip(rep.radii, rep.I, rep.ratio):
    print(f"  R={R:<6g} I(R)={I:<12.4g} I/(R^2 log psi)={q:.4f}")
