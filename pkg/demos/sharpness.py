"""Half-unit masses on a sparse sequence cannot be approximated better.

With the best possible zero set the counting gap oscillates between 0 and
1/2, and the L1 error keeps pace with ``R^2 log psi(R)``.
"""

import warnings

import numpy as np

from subharm.counterexample import UPhiSpec, best_rounding, build_u_phi, counting_gap_scan, sharpness_ratio
from subharm.decomposition import SlowlyVarying

psi = SlowlyVarying.log_e()
spec = UPhiSpec(psi, max_radius=2.0 ** 12 * 1e6)
u, f = build_u_phi(spec), best_rounding(spec)
print(f"{len(u)} half masses, {f.count} zeros")

for alpha in (0.0, 0.3):
    gap = counting_gap_scan(u, f, alpha, np.geomspace(1, 1e9, 100))
    print(f"\nalpha={alpha}: gap takes values {sorted(set(np.round(gap.gap, 6).tolist()))} ({gap.pattern})")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = sharpness_ratio(u, f, alpha, psi, [2.0 ** k for k in range(4, 13, 2)])
    for R, I, q in zip(rep.radii, rep.I, rep.ratio):
        print(f"  R=2^{int(np.log2(R)):<3d} I/R^2={I / R**2:<8.4f} I/(R^2 log psi)={q:.4f}")
