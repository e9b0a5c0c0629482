"""Quadrature on the reference triangle ``(0,0), (1,0), (0,1)`` and on ``[0, 1]``.

Triangle weights are normalised to sum to one, so an integral over a physical
triangle ``K`` is ``|K| * sum(w * f(x_q))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class TriangleRule:
    points: np.ndarray  # (n, 2) reference coordinates
    weights: np.ndarray  # (n,), sum to 1
    degree: int


# symmetric 6-point rule, exact for total degree 4
_D4_A = 0.445948490915965
_D4_WA = 0.223381589678011
_D4_B = 0.091576213509771
_D4_WB = 0.109951743655322


def _symmetric_degree4() -> TriangleRule:
    bary = []
    for a in (_D4_A, _D4_B):
        c = 1.0 - 2.0 * a
        bary += [(c, a, a), (a, c, a), (a, a, c)]
    bary = np.array(bary)
    points = bary[:, 1:]  # (lambda_1, lambda_2) are the reference x, y
    weights = np.array([_D4_WA] * 3 + [_D4_WB] * 3)
    return TriangleRule(points, weights / weights.sum(), 4)


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def collapsed_rule(degree: int) -> TriangleRule:
    """Tensor Gauss rule mapped onto the triangle, exact for total ``degree``."""
    n = max(1, int(np.ceil((degree + 2) / 2)))
    a, wa = gauss_legendre_01(n)
    b, wb = gauss_legendre_01(n)
    A, Bv = np.meshgrid(a, b, indexing="ij")
    W = np.outer(wa, wb) * (1.0 - Bv)
    points = np.column_stack([(A * (1.0 - Bv)).ravel(), Bv.ravel()])
    weights = 2.0 * W.ravel()
    return TriangleRule(points, weights, degree)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Quadrature exact for polynomials of total degree ``degree``."""
    if degree <= 4:
        rule = _symmetric_degree4()
        return TriangleRule(rule.points, rule.weights, degree)
    return collapsed_rule(degree)


@lru_cache(maxsize=None)
def edge_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on ``[0, 1]`` exact for ``degree``."""
    return gauss_legendre_01(max(1, (degree + 2) // 2))
