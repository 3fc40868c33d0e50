import math
import unittest

import numpy as np

from dcglab.predicates import (
    distance_to_polygon,
    distance_to_segments,
    incircle,
    orient2d,
    point_in_polygon,
)

SQUARE = [0j, 1 + 0j, 1 + 1j, 1j]


class OrientationTests(unittest.TestCase):
    def test_signs(self):
        self.assertEqual(orient2d(0j, 1 + 0j, 1j), 1)
        self.assertEqual(orient2d(0j, 1j, 1 + 0j), -1)
        self.assertEqual(orient2d(0j, 1 + 1j, 2 + 2j), 0)

    def test_numpy_scalars(self):
        points = np.array([0j, 1 + 0j, 1j])

        self.assertEqual(orient2d(*points), 1)
        self.assertEqual(orient2d(points[0], points[2], points[1]), -1)

    def test_nearly_collinear(self):
        # 0.1 and 0.3 are not exactly representable, so the third point misses the
        # line through the first two by a few units in the last place.
        a, b, c = complex(0.1, 0.1), complex(0.2, 0.2), complex(0.3, 0.3)

        self.assertEqual(orient2d(a, b, c), -orient2d(b, a, c))
        self.assertEqual(orient2d(0j, 2 ** -60 + 1j, 2j), 1)
        self.assertEqual(orient2d(0j, 1j, 2j), 0)


class IncircleTests(unittest.TestCase):
    def test_inside_and_outside(self):
        self.assertEqual(incircle(0j, 1 + 0j, 1j, complex(0.5, 0.5)), 1)
        self.assertEqual(incircle(0j, 1 + 0j, 1j, 2 + 2j), -1)

    def test_cocircular(self):
        self.assertEqual(incircle(*SQUARE), 0)

        # Points of the unit circle at multiples of 90 degrees are exact doubles.
        self.assertEqual(incircle(1 + 0j, 1j, -1 + 0j, -1j), 0)

    def test_just_outside(self):
        self.assertEqual(incircle(0j, 1 + 0j, 1 + 1j, complex(-(2 ** -50), 1)), -1)
        self.assertEqual(incircle(0j, 1 + 0j, 1 + 1j, complex(2 ** -50, 1)), 1)

    def test_numpy_scalars(self):
        points = np.array(SQUARE)

        self.assertEqual(incircle(*points), 0)
        center = np.complex128(0.5 + 0.5j)
        self.assertEqual(incircle(points[0], points[1], points[2], center), 1)


class PolygonTests(unittest.TestCase):
    def test_containment(self):
        self.assertTrue(point_in_polygon(complex(0.5, 0.5), SQUARE))
        self.assertFalse(point_in_polygon(2 + 0j, SQUARE))
        # The boundary counts as outside.
        self.assertFalse(point_in_polygon(complex(0.5, 0), SQUARE))
        self.assertTrue(point_in_polygon(complex(0.5, 0.5), list(reversed(SQUARE))))

    def test_distance(self):
        self.assertAlmostEqual(distance_to_polygon(complex(0.5, 0.25), SQUARE), 0.25)
        self.assertAlmostEqual(distance_to_polygon(2 + 2j, SQUARE), math.sqrt(2))

    def test_distance_to_segments(self):
        p = np.array([0j, 3 + 0j])
        q = np.array([1j, 3 + 1j])

        self.assertAlmostEqual(distance_to_segments(1 + 0.5j, p, q), 1.0)
        self.assertAlmostEqual(distance_to_segments(-1 + 2j, p, q), math.sqrt(2))
