"""Split a measure into even annulus parts and a sparse remainder.

The even parts are later atomized in pairs; the remainder is grouped into
mass-5 blocks that become zeros of multiplicity five.
"""

import math

import numpy as np

from subharm import Measure
from subharm.decomposition import (
    SlowlyVarying,
    annular_split,
    heavy_tail_schedule,
    verify_decomposition,
    verify_schedule,
)

rng = np.random.default_rng(1)
r = [2.0]
while r[-1] < math.exp(30):
    r.append(r[-1] * rng.uniform(1.0, 1.14))
r = np.array(r)
m = Measure(r * np.exp(2j * np.pi * rng.random(r.size)), rng.uniform(0.4, 1.6, r.size))
psi = SlowlyVarying.log_e()

d = annular_split(m, psi)
print(f"{len(m)} atoms of total mass {m.total_mass():.2f} in {len(d.mu1)} annuli")
print("  k   R_k          mass mu1   sparse mass")
for k in range(min(8, len(d.mu1))):
    print(f"  {k + 1:<3d} {d.R[k]:<12.4g} {d.mu1[k].total_mass():<10.2f} {d.sparse_mass(k):.3f}")
print(f"checks: {verify_decomposition(d, m).all_pass}")

s = heavy_tail_schedule(d.mu2, psi)
ok, _ = verify_schedule(s, psi, upto=d.R[-2])
print(f"\n{len(s.pieces)} mass-5 blocks, block radii {np.round(s.r, 2).tolist()}")
print(f"T_n+1 between Psi_1(T_n) and Psi_6(T_n): {ok}")
