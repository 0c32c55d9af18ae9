"""Quadrature rules on the reference tetrahedron and on edges.

Tet rules are stored as barycentric points with weights summing to one;
multiply the weighted sum by the tet volume to integrate. Degrees 3 and up
come from the Grundmann-Moeller simplex family, whose member of index s is
exact for polynomials of degree 2 s + 1. The index-1 member is the familiar
five point rule with the negative centroid weight.
"""

import math
from functools import lru_cache

import numpy as np

# Four point rule, exact through degree 2.
_D2_A = (5.0 + 3.0 * math.sqrt(5.0)) / 20.0
_D2_B = (5.0 - math.sqrt(5.0)) / 20.0
_DEGREE2_POINTS = np.array([
    (_D2_A, _D2_B, _D2_B, _D2_B),
    (_D2_B, _D2_A, _D2_B, _D2_B),
    (_D2_B, _D2_B, _D2_A, _D2_B),
    (_D2_B, _D2_B, _D2_B, _D2_A),
])
_DEGREE2_WEIGHTS = np.full(4, 0.25)


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def grundmann_moeller(index):
    """Simplex rule of degree 2 * index + 1 in barycentric form."""
    s = int(index)
    n = 3
    d = 2 * s + 1
    points = []
    weights = []
    for i in range(s + 1):
        denom = d + n - 2 * i
        coeff = (-1.0) ** i * 2.0 ** (-2 * s) * float(denom) ** d \
            / (math.factorial(i) * math.factorial(d + n - i))
        for beta in _compositions(s - i, n + 1):
            points.append([(2 * b + 1) / denom for b in beta])
            weights.append(coeff)
    weights = np.array(weights)
    # raw weights sum to the reference simplex volume 1/n!; rescale to 1
    weights /= weights.sum()
    return np.array(points), weights


@lru_cache(maxsize=None)
def tet_rule(degree):
    """Barycentric (points, weights) pair exact for the requested degree."""
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if degree <= 1:
        return np.full((1, 4), 0.25), np.ones(1)
    if degree == 2:
        return _DEGREE2_POINTS.copy(), _DEGREE2_WEIGHTS.copy()
    index = (degree - 1 + 1) // 2  # smallest s with 2 s + 1 >= degree
    return grundmann_moeller(index)


# Two point Gauss rule on [0, 1], exact through degree 3.
EDGE_GAUSS2 = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
