"""
quadrature.py

Symmetric positive-weight triangle rules in barycentric coordinates. Weights sum to one,
so an integral over a cell is area * sum(w_q f(x_q)).

Author: Nathan Swanson
"""

from dataclasses import dataclass
from functools import cache
from itertools import permutations

import numpy as np

from gpe_multigrid.errors import AssemblyError

MAX_DEGREE = 6


@dataclass(frozen=True, eq=False)
class QuadRule:
    points: np.ndarray  # (nq, 3) barycentric
    weights: np.ndarray  # (nq,)
    exact_degree: int

    @property
    def n_points(self) -> int:
        return self.weights.size


def _orbit(a: float, b: float, c: float) -> list[tuple[float, float, float]]:
    return sorted(set(permutations((a, b, c))), reverse=True)


def _symmetric(groups: list[tuple[tuple[float, float, float], float]]) -> tuple[np.ndarray, np.ndarray]:
    points, weights = [], []
    for coords, weight in groups:
        orbit = _orbit(*coords)
        points += orbit
        weights += [weight] * len(orbit)
    return np.array(points), np.array(weights)


def _s21(a: float) -> tuple[float, float, float]:
    return (a, a, 1.0 - 2.0 * a)


_THIRD = 1.0 / 3.0

_RULES = {
    1: ([((_THIRD, _THIRD, _THIRD), 1.0)], 1),
    2: ([((0.5, 0.5, 0.0), _THIRD)], 2),
    4: (
        [
            (_s21(0.44594849091596488631832925388305), 0.22338158967801146569500700843312),
            (_s21(0.091576213509770743459571463402202), 0.10995174365532186763832632490021),
        ],
        4,
    ),
    5: (
        [
            ((_THIRD, _THIRD, _THIRD), 0.225),
            (_s21(0.47014206410511508977044120951345), 0.13239415278850618073764938783315),
            (_s21(0.10128650732345633880098736191512), 0.12593918054482715259568394550018),
        ],
        5,
    ),
    6: (
        [
            (_s21(0.063089014491502228340331602870819), 0.050844906370206816920936809106869),
            (_s21(0.24928674517091042129163855310702), 0.11678627572637936602528961138558),
            (
                (0.053145049844816947353249671631398, 0.31035245103378440541660773395655, 0.63650249912139864723014259441205),
                0.082851075618373575193553456420442,
            ),
        ],
        6,
    ),
}
# no positive interior degree-3 rule with fewer points, so degree 3 uses the degree-4 rule
_RULES[3] = _RULES[4]


@cache
def quad_rule(exact_degree: int) -> QuadRule:
    if exact_degree < 1 or exact_degree > MAX_DEGREE:
        msg = f"no triangle rule of degree {exact_degree}, supported degrees are 1..{MAX_DEGREE}"
        raise AssemblyError("degree-unsupported", msg)
    groups, degree = _RULES[exact_degree]
    points, weights = _symmetric(groups)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadRule(points=points, weights=weights, exact_degree=degree)
