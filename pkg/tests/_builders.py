"""Plant constructors shared by several test modules."""

import numpy as np

from qobs.model import make_canonical_theta
from qobs.realizability import pr_plant_from_coupling


def collinear_plant(a1, a2, b1, b2, d1, d2):
    """Two-mode plant whose noise coupling has identical rows.

    ``B' = [[b1, b2], [b1, b2]]`` and ``B'' = [[d1, d2], [d1, d2]]``; the drift is
    ``A = [[a1, a2], [a2 + 2 a1, -a1]]``, realizable through ``A = 2 J R``.
    """
    R = np.array([[-(a2 + 2 * a1) / 2, a1 / 2], [a1 / 2, a2 / 2]])
    B = np.array([[b1, b2, d1, d2], [b1, b2, d1, d2]], dtype=float)
    return pr_plant_from_coupling(make_canonical_theta(2), B, 2, R=R)


def collinear_equilibrium(a1, a2, d1, d2):
    """``p * ones(2, 2)``, the Riccati equilibrium with ``p1 = p2 = p4``."""
    p = -(d1**2 + d2**2) / (2 * (a1 + a2))
    return p * np.ones((2, 2))
