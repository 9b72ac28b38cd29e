"""Breaking of a Gaussian-shaped initial velocity.

The offset map of the Gaussian data is multivalued, so it comes as a list of
pieces, one per sign combination of the square roots. The catastrophe is the
earliest blowup over all pieces; near it the vorticity of the breaking
parcel has a simple pole in time.
"""

import numpy as np

from hodovort import maps
from hodovort.field import solve_grid
from hodovort.surface import find_catastrophe
from hodovort.vorticity import laurent_fit

pieces = maps.gaussian_branches()
res = find_catastrophe(pieces)
for label, t in sorted(res.branch_minima.items()):
    print(f"earliest blowup on piece {label}: {t:.6f}")
print(f"catastrophe: t_c = {res.t_c:.6f}, u_c = {np.round(res.u_c, 6)}, x_c = {np.round(res.x_c, 6)}")

m = next(p for p in pieces if p.branch_label == res.branch_id)
fit = laurent_fit(m, res.u_c, res.t_c)
terms = ", ".join(f"c[{k}] = {v:.6g}" for k, v in sorted(fit.coefficients.items()))
print("vorticity ~ c[-1]/(t_c - t) + c[0] + c[1](t_c - t):", terms)

# just before breaking, the steepest cells around x_c are masked
t = 0.999 * res.t_c
grid = solve_grid(pieces, [(0.66, 0.86, 101), (0.67, 0.87, 101)], t)
print(f"local grid at t = 0.999 t_c: {np.count_nonzero(grid.mask)} masked of {grid.mask.size}")
