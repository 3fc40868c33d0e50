"""
Filtered exact geometric predicates and polygon queries.

Each predicate is first evaluated in floating point together with a forward error
bound. Only when the result is too close to zero to trust is the determinant
recomputed with sympy rationals, which hold every double exactly. Polygon
containment and distances go through shapely.
"""
from typing import Sequence, Tuple

import numpy as np
import sympy
from shapely.geometry import LinearRing, MultiLineString, Point, Polygon

EPSILON = 2.0**-53
ORIENT_ERRBOUND = (3.0 + 16.0 * EPSILON) * EPSILON
INCIRCLE_ERRBOUND = (10.0 + 96.0 * EPSILON) * EPSILON


def _sign(x: float) -> int:
    return int(x > 0) - int(x < 0)


def _xy(z: complex) -> Tuple[float, float]:
    z = complex(z)
    return (z.real, z.imag)


def _exact_offset(p: Tuple[float, float], origin: Tuple[float, float]):
    return (
        sympy.Rational(p[0]) - sympy.Rational(origin[0]),
        sympy.Rational(p[1]) - sympy.Rational(origin[1]),
    )


def _exact_sign(rows) -> int:
    return int(sympy.sign(sympy.Matrix(rows).det()))


def orient2d(a: complex, b: complex, c: complex) -> int:
    """
    Return +1 if ``a, b, c`` turn counterclockwise, -1 if clockwise, 0 if collinear.
    """
    (ax, ay), (bx, by), (cx, cy) = _xy(a), _xy(b), _xy(c)
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    if abs(det) > ORIENT_ERRBOUND * (abs(detleft) + abs(detright)):
        return _sign(det)

    rows = [list(_exact_offset(p, (cx, cy))) for p in ((ax, ay), (bx, by))]
    return _exact_sign(rows)


def incircle(a: complex, b: complex, c: complex, d: complex) -> int:
    """
    Return +1 if ``d`` lies strictly inside the circle through the counterclockwise
    triangle ``a, b, c``, -1 if strictly outside and 0 if the four points are
    cocircular.
    """
    (ax, ay), (bx, by), (cx, cy), (dx, dy) = _xy(a), _xy(b), _xy(c), _xy(d)
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy

    bdxcdy, cdxbdy = bdx * cdy, cdx * bdy
    cdxady, adxcdy = cdx * ady, adx * cdy
    adxbdy, bdxady = adx * bdy, bdx * ady
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy

    det = (
        alift * (bdxcdy - cdxbdy)
        + blift * (cdxady - adxcdy)
        + clift * (adxbdy - bdxady)
    )
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    if abs(det) > INCIRCLE_ERRBOUND * permanent:
        return _sign(det)

    rows = []
    for p in ((ax, ay), (bx, by), (cx, cy)):
        ex, ey = _exact_offset(p, (dx, dy))
        rows.append([ex, ey, ex**2 + ey**2])
    return _exact_sign(rows)


def point_in_polygon(z: complex, polygon: Sequence[complex]) -> bool:
    """
    Whether ``z`` lies inside the simple polygon. Points on the boundary count as
    outside.
    """
    return Polygon([_xy(p) for p in polygon]).contains(Point(_xy(z)))


def distance_to_polygon(z: complex, polygon: Sequence[complex]) -> float:
    """
    Euclidean distance from ``z`` to the closed polygonal curve ``polygon``.
    """
    return float(LinearRing([_xy(p) for p in polygon]).distance(Point(_xy(z))))


def distance_to_segments(z: complex, p: np.ndarray, q: np.ndarray) -> float:
    """
    Distance from ``z`` to the nearest of the segments from ``p[k]`` to ``q[k]``.
    """
    segments = MultiLineString([[_xy(s), _xy(t)] for s, t in zip(p, q)])
    return float(segments.distance(Point(_xy(z))))
