"""How fast the vorticity diverges.

At fixed u the vorticity grows like |t - t_b|^(-m) where m is the
multiplicity of the blowup time. At fixed t_b it grows like
eps^(-m/(m+1)) in the distance eps from the blowup point. Both rates are
recovered here as log-log slopes on the cubic map.
"""

import numpy as np

from hodovort import maps
from hodovort.frame import fit_spatial_exponent, gamma_points, is_generic_point
from hodovort.surface import branch_times, double_root_locus
from hodovort.vorticity import fit_temporal_exponent

m = maps.cubic()

u = np.array([2.0, 1.0])
for t_b in branch_times(m, u).times:
    print(f"simple root t_b = {t_b:.4f}: temporal slope {fit_temporal_exponent(m, u, t_b).slope:.4f}")

p = double_root_locus(m)[10]
print(f"double root t_b = {p.t_b:.4f}: temporal slope {fit_temporal_exponent(m, p.u, p.t_b).slope:.4f}")

J = -np.eye(3) + np.diag([1.0, 1.0], 1)
fit = fit_temporal_exponent(maps.constant_jacobian(J), [0.0, 0.0, 0.0], 1.0)
print(f"triple root of a Jordan block: temporal slope {fit.slope:.4f}")

rng = np.random.default_rng(0)
pts = [(u, t) for u, t, _ in gamma_points(m, 100, rng) if is_generic_point(m, u, t)][:3]
for u, t in pts:
    sf = fit_spatial_exponent(m, u, t)
    print(f"fold point u = {np.round(u, 3)}: spatial slope {sf.slopes['vorticity']:.4f}, "
          f"bounded block {sf.slopes['bounded']:.4f}")
