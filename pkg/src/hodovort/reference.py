"""Reference values for the built-in examples, used by ``--check`` and the tests."""

CUBIC_CATASTROPHE_T = 1.62019
CUBIC_CATASTROPHE_U = (1.59562, 1.17844)

GAUSSIAN_CATASTROPHE_T = 0.642593
GAUSSIAN_CATASTROPHE_U = (0.803494, 0.584021)
GAUSSIAN_CATASTROPHE_X = (0.759774, 0.77468)
GAUSSIAN_BRANCH_MINIMA = {"++": 0.642593, "+-": 1.16582, "-+": 0.673088}
GAUSSIAN_LAURENT = {-1: 0.270466, 0: -0.0747002, 1: 0.0206315}

TOL_TIME = 1e-3
TOL_LAURENT = {-1: 1e-2, 0: 1e-2, 1: 5e-2}
TOL_TEMPORAL = {1: 0.03, 2: 0.05, 3: 0.1}
TOL_SPATIAL = 0.05
TOL_BOUNDED = -0.05


def cubic_quartic(u1, u2):
    """Double-root locus of the cubic map in integer-coefficient form."""
    return 4 * u1 ** 4 + 28 * u1 ** 2 * u2 ** 2 + u2 ** 4 - 72
