"""Offset maps from harmonic potentials never blow up.

For f = (dW/du2, dW/du1) with W harmonic the characteristic quadratic has a
negative discriminant wherever the Hessian of W is nonzero, so no real
blowup time exists.
"""

import numpy as np

from hodovort import maps
from hodovort.errors import NoBlowupError
from hodovort.surface import discriminant_2d, find_catastrophe

rng = np.random.default_rng(1)
U = rng.uniform(-2, 2, (10_000, 2))
for preset in ("cubic", "exp", "quartic"):
    m = maps.builtin("harmonic", W=preset)
    disc = np.asarray(discriminant_2d(m, U))
    try:
        find_catastrophe(m)
        verdict = "catastrophe found"
    except NoBlowupError:
        verdict = "no blowup"
    print(f"W = {preset}: largest discriminant {np.max(disc):.2e}; search says {verdict}")
