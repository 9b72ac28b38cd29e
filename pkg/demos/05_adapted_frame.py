"""Separating the singular derivative from the bounded ones.

At a blowup point M has a null direction. Expressing the velocity gradient
in the basis of right and left null vectors plus their complements puts all
of the divergence into a single entry.
"""

import numpy as np

from hodovort import maps
from hodovort.frame import adapted_frame, fold_coefficient, frame_gradient
from hodovort.surface import branch_times

m = maps.cubic()
u = np.array([2.0, 1.0])
t_b = branch_times(m, u).times[0]
fr = adapted_frame(m, u, t_b)
print("right null vector:", np.round(fr.R[0], 6))
print("left null vector: ", np.round(fr.L[0], 6))
print(f"completeness defect {fr.completeness_defect():.1e}, fold coefficient {fold_coefficient(m, u, t_b):.4f}")

for dt in (1e-2, 1e-3, 1e-4):
    G = np.linalg.inv((t_b - dt) * np.eye(2) + m.jac(u))
    F = frame_gradient(fr, G)
    print(f"t_b - t = {dt:.0e}: singular entry {F[0, 0]: .3e}, others {np.max(np.abs(F.ravel()[1:])):.3e}")
