"""Cut a random mass-20 measure into mass-2 rectangles and atomize each piece.

Run with ``python3 demos/partition_and_atomize.py``.
"""

import numpy as np

from subharm import Measure
from subharm.atomize import atomize_pair, check_pair
from subharm.partition import LogRectangle, partition_with_stats, verify_partition

rng = np.random.default_rng(0)
n = 60
w = rng.uniform(0.1, 1.0, n)
w *= 20 / w.sum()
rect = LogRectangle(0.0, 2.0, 0.0, 2 * np.pi)
nu = Measure(rng.uniform(0, 2, n) + 1j * rng.uniform(0, 2 * np.pi, n), w)

pieces, stats = partition_with_stats(rect, nu)
rep = verify_partition(pieces, rect, nu)
print(f"{len(pieces)} pieces, {stats.cuts} cuts, depth {stats.max_depth}")
print(f"all partition properties hold: {rep.all_pass}")

# Each piece becomes two unit atoms with the same first and second moments.
print("\n  piece   omega1                 omega2                 d       moment err")
for i, p in enumerate(pieces):
    pair = atomize_pair(p)
    chk = check_pair(pair)
    print(f"  {i:5d}   {pair.omega1:.4f}   {pair.omega2:.4f}   {pair.d:.4f}  {chk.moment_error:.1e}")
