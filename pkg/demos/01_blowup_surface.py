"""Blowup times of the cubic offset map.

For every hodograph point u the velocity gradient of x = u t + f(u) blows up
at the real roots t of det(t I + df/du). In two dimensions the sign of the
discriminant of that quadratic splits the u-plane into points with two
blowup times, points with none, and the curve where the two merge.
"""

import numpy as np

from hodovort import maps
from hodovort.surface import branch_times, domain_labels, double_root_locus, find_catastrophe

m = maps.cubic()

# blowup times at a single point, with multiplicities
bs = branch_times(m, [2.0, 1.0])
print("roots at u = (2, 1):", bs.roots)

# coarse classification of the square [-3, 3]^2
axes = [(-3.0, 3.0, 61), (-3.0, 3.0, 61)]
U, disc, labels = domain_labels(m, axes)
for lab in ("D+", "D-", "D0"):
    print(f"{lab}: {np.count_nonzero(labels == lab)} of {labels.size} points")

# the merge curve: every point on it carries a double blowup time
locus = double_root_locus(m)
print(f"double-root curve: {len(locus)} points, e.g. u = {np.round(locus[0].u, 4)}, t = {locus[0].t_b:.4f}")

# earliest positive blowup time over the domain
res = find_catastrophe(m)
print(f"gradient catastrophe at t_c = {res.t_c:.6f}, u_c = {np.round(res.u_c, 5)}")
