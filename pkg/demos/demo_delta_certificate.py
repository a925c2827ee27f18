"""The degree-dependent backoff margin, its extremal polynomial, and its
limits.

A degree-N polynomial that is nonpositive at the N+1 uniform samples of
[0, 1] can still rise above zero in between.  The margin Delta(N) measures
the worst such excursion for the polynomial that is hardest to pin down
with samples alone, and the conditioned constraint rows back every
interior sample off by Delta * P(0).

The second half of the demo shows why that backoff is a heuristic rather
than a proof for degree >= 2: a feasible polynomial can overshoot by more
than the margin.
"""

import numpy as np

from flatpoly import compute_delta, delta_table, sample_matrix

print("N, margin")
for N, value in delta_table().items():
    print(f"{N:2d}  {value:.6f}")

N = 6
w = np.linalg.solve(sample_matrix(N), np.ones(N))
coef = np.r_[-1.0, w]
s = np.linspace(0.0, 1.0, 200_001)
vals = np.polynomial.polynomial.polyval(s, coef)
print(f"\nextremal polynomial for N={N}: -1 "
      + " ".join(f"{c:+.3f} s^{j + 1}" for j, c in enumerate(w)))
samples = np.polynomial.polynomial.polyval(np.arange(N + 1) / N, coef)
print(f"values at the 7 samples: {np.round(samples, 12)}")
print(f"supremum on [0, 1]:      {vals.max():.6f}")
print(f"compute_delta({N}):       {compute_delta(N):.6f}")

# The backoff is tight but not sufficient: this quadratic satisfies both
# shifted sample conditions for N=2 yet rises to +0.21 between samples.
coef2 = np.array([-1.0, 11.0, -25.0])
d2 = compute_delta(2)
p0, ph, p1 = np.polynomial.polynomial.polyval([0.0, 0.5, 1.0], coef2)
print(f"\ncounterexample P(s) = -1 + 11 s - 25 s^2 (N=2, margin {d2}):")
print(f"  P(0)   = {p0:+.3f}  (row: P(0) <= 0           -> ok)")
print(f"  P(1/2) = {ph:+.3f}  (row: P(1/2) - d P(0) <= 0 -> "
      f"{ph - d2 * p0:+.3f} <= 0, ok)")
print(f"  P(1)   = {p1:+.3f}  (row: P(1) - d P(0) <= 0   -> "
      f"{p1 - d2 * p0:+.3f} <= 0, ok)")
smax = np.polynomial.polynomial.polyval(s, coef2).max()
print(f"  but max P on [0, 1] = {smax:+.3f} > 0")
print("planner margins (see Scenario.current_margin) exist to absorb "
      "exactly this kind of between-sample excursion.")
