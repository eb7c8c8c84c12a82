# coding: utf-8

# # How much noise can the two-basis protocol tolerate?
#
# For an isotropic channel with no correlated errors (p11 = 0) the two-way
# distillation stops working at D_2CC(d). No protocol at all can go past
# D_th(d) = (d-1)/(2d). This script tabulates both for prime d and looks at
# the gap between them.

import numpy as np

from quditkd.gf_algebra import is_prime
from quditkd.isotropic import d_2cc, d_th, delta_gap, threshold_table

# ## The table

primes = [d for d in range(2, 60) if is_prime(d)]
rows = threshold_table(primes)
print(f"{'d':>3} {'D_th':>8} {'D_2CC':>8} {'delta':>8}")
for row in rows:
    print(f"{row.d:>3} {row.d_th:8.4f} {row.d_2cc:8.4f} {row.delta:8.4f}")

# Qubits give the familiar 20% next to the 25% ceiling.

print(d_2cc(2), d_th(2))

# ## Where is the gap widest?
#
# The gap formula also makes sense for non-integer d, so a fine grid finds
# its peak. Among primes, d = 5 wins.

grid = np.arange(2.0, 50.0, 0.01)
gap = np.array([delta_gap(x) for x in grid])
print("continuous peak near d =", round(float(grid[gap.argmax()]), 2))
print("best prime:", max(primes, key=delta_gap))

# ## Large d
#
# D_2CC approaches 1/2 - 1/(4 sqrt(d)) and the gap times 4 sqrt(d) tends to 1.

for d in (101, 1009, 10007, 10**6 + 3):
    print(d, d_2cc(d) - (0.5 - 0.25 / np.sqrt(d)), delta_gap(d) * 4 * np.sqrt(d), d_th(d) - d_2cc(d))
