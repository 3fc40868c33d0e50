import math
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dcglab import DcglabApiError, HypothesisViolatedError, PLMetric
from dcglab import gen_random_delaunay_disk
from dcglab.exceptions import ViolatedTriangleInequalityError
from dcglab.metric import (
    DelaunayClass,
    conformal_change,
    conformal_max_principle_check,
    constant_factor,
    corner_angles,
    cot_weights,
    curvature,
    curvature_jacobian,
    delaunay_check,
    recover_conformal_factor,
    validate_nondegeneracy,
)

from . import meshes

HEX_T, _, HEX_L = meshes.hex_metric(2)


@st.composite
def small_factors(draw, vertices=HEX_T.vertices, bound=0.1):
    values = draw(
        st.lists(
            st.floats(min_value=-bound, max_value=bound),
            min_size=len(vertices),
            max_size=len(vertices),
        )
    )
    return dict(zip(vertices, values))


class CornerAngleTests(unittest.TestCase):
    def test_equilateral(self):
        _, phi = meshes.equilateral_triangle()

        angles = corner_angles(PLMetric.from_embedding(phi)).angles
        np.testing.assert_allclose(angles, math.pi / 3, atol=1e-15)

    def test_right_triangle(self):
        l = meshes.right_triangle_metric()

        angles = corner_angles(l)
        self.assertAlmostEqual(angles.at(0, 1), math.pi / 2, places=14)
        self.assertAlmostEqual(angles.at(0, 0), math.atan2(4, 3), places=14)
        self.assertAlmostEqual(angles.at(0, 2), math.asin(3 / 5), places=14)
        self.assertAlmostEqual(float(angles.angles.sum()), math.pi, places=14)

    def test_flat_triangle(self):
        T = meshes.right_triangle_metric().triangulation

        with self.assertRaises(ViolatedTriangleInequalityError) as cm:
            PLMetric(T, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 2.0})

        self.assertEqual(cm.exception.face, (0, 1, 2))

    def test_missing_length(self):
        T = meshes.right_triangle_metric().triangulation

        with self.assertRaises(DcglabApiError):
            PLMetric(T, {(0, 1): 1.0, (1, 2): 1.0})

    def test_nondegeneracy(self):
        _, phi = meshes.equilateral_triangle()

        report = validate_nondegeneracy(PLMetric.from_embedding(phi), math.pi / 6)
        self.assertTrue(report.ok)

        report = validate_nondegeneracy(meshes.right_triangle_metric(), 0.7)
        self.assertFalse(report.ok)
        self.assertAlmostEqual(report.min_angle, 0.6435011087932844, places=12)
        self.assertEqual(report.vertex, 2)

    def test_nondegeneracy_range(self):
        l = meshes.right_triangle_metric()

        with self.assertRaises(DcglabApiError):
            validate_nondegeneracy(l, 0)

        with self.assertRaises(DcglabApiError):
            validate_nondegeneracy(l, math.pi / 2)


class DelaunayTests(unittest.TestCase):
    def test_lattice_is_uniformly_delaunay(self):
        _, _, l = meshes.hex_metric(3)

        report = delaunay_check(l)
        self.assertIs(report.classification, DelaunayClass.UNIFORMLY_DELAUNAY)
        self.assertAlmostEqual(report.epsilon_star, math.pi / 3, places=12)

    def test_square_is_on_the_boundary(self):
        _, phi = meshes.unit_square()

        report = delaunay_check(PLMetric.from_embedding(phi))
        self.assertIs(report.classification, DelaunayClass.DELAUNAY)
        self.assertTrue(report.is_delaunay)
        self.assertAlmostEqual(report.max_angle_sum, math.pi, places=12)
        self.assertEqual(str(report), "Delaunay (boundary)")

    def test_kite_is_not_delaunay(self):
        _, phi = meshes.kite()

        report = delaunay_check(PLMetric.from_embedding(phi))
        self.assertIs(report.classification, DelaunayClass.NOT_DELAUNAY)
        self.assertEqual(report.witness, (0, 2))
        self.assertLess(report.epsilon_star, 0)
        self.assertEqual(str(report), "NotDelaunay (edge (0, 2))")

    def test_single_face(self):
        report = delaunay_check(meshes.right_triangle_metric())

        self.assertTrue(report.is_delaunay)
        self.assertIsNone(report.witness)


class ConformalChangeTests(unittest.TestCase):
    def test_zero_factor(self):
        T, _, l = meshes.hex_metric(2)

        l2 = conformal_change(l, constant_factor(T.vertices, 0.0))
        self.assertEqual(l2.lengths, l.lengths)

    def test_constant_factor_scales(self):
        T, _, l = meshes.hex_metric(2)

        l2 = conformal_change(l, constant_factor(T.vertices, 0.5))
        for e in T.edges:
            self.assertAlmostEqual(l2[e], math.exp(0.5) * l[e], places=14)

    def test_single_edge(self):
        T, phi = meshes.equilateral_triangle()
        l = PLMetric.from_embedding(phi)

        l2 = conformal_change(l, {0: 0.0, 1: 2 * math.log(2), 2: 0.0})
        self.assertAlmostEqual(l2[0, 1], 2.0, places=14)
        self.assertAlmostEqual(l2[1, 2], 2.0, places=14)
        self.assertAlmostEqual(l2[0, 2], 1.0, places=14)

    def test_collapsing_factor(self):
        T, phi = meshes.equilateral_triangle()
        l = PLMetric.from_embedding(phi)

        with self.assertRaises(ViolatedTriangleInequalityError) as cm:
            conformal_change(l, {0: 0.0, 1: 0.0, 2: 5.0})

        self.assertEqual(cm.exception.face, (0, 1, 2))
        self.assertIsInstance(cm.exception.metric, PLMetric)

    def test_missing_value(self):
        T, phi = meshes.equilateral_triangle()

        with self.assertRaises(DcglabApiError):
            conformal_change(PLMetric.from_embedding(phi), {0: 0.0, 1: 0.0})

    def test_recover_factor(self):
        T, _, l = meshes.hex_metric(2)
        u = {v: 0.05 * math.sin(v) for v in T.vertices}

        fit = recover_conformal_factor(l, conformal_change(l, u))
        self.assertLess(fit.residual, 1e-12)
        for v in T.vertices:
            self.assertAlmostEqual(fit.u[v], u[v], places=10)


class CurvatureTests(unittest.TestCase):
    def test_lattice_is_flat(self):
        _, _, l = meshes.hex_metric(3)

        K = curvature(l)
        self.assertLess(K.max_abs(), 1e-12)
        self.assertEqual(len(K.interior), 19)

    def test_five_triangles_around_a_vertex(self):
        K = curvature(meshes.five_fan_metric())

        self.assertAlmostEqual(K.interior[0], math.pi / 3, places=14)

    def test_total_curvature_of_a_disk(self):
        for l in (
            meshes.hex_metric(2)[2],
            meshes.five_fan_metric(),
            PLMetric.from_embedding(gen_random_delaunay_disk(30, 4)[1]),
        ):
            self.assertAlmostEqual(curvature(l).total(), 2 * math.pi, places=10)


class CotangentWeightTests(unittest.TestCase):
    def test_equilateral_pair(self):
        _, phi = meshes.equilateral_pair()

        mu = cot_weights(PLMetric.from_embedding(phi))
        self.assertAlmostEqual(mu[0, 1], 1 / math.sqrt(3), places=14)
        self.assertAlmostEqual(mu[0, 2], 0.5 / math.sqrt(3), places=14)

    def test_square_diagonal(self):
        _, phi = meshes.unit_square()

        mu = cot_weights(PLMetric.from_embedding(phi))
        self.assertAlmostEqual(mu[0, 2], 0.0, places=14)
        self.assertAlmostEqual(mu[0, 1], 0.5, places=14)

    def test_kite_diagonal_is_negative(self):
        _, phi = meshes.kite()

        mu = cot_weights(PLMetric.from_embedding(phi))
        self.assertLess(mu[0, 2], 0)
        self.assertEqual(mu.min_interior()[0], (0, 2))

    def test_lattice_vertex_sums(self):
        T, _, l = meshes.hex_metric(2)

        sums = cot_weights(l).vertex_sums()
        self.assertAlmostEqual(sums[0], 6 / math.sqrt(3), places=12)


class CurvatureJacobianTests(unittest.TestCase):
    def test_matches_finite_differences(self):
        T, _, l = meshes.hex_metric(2)
        u = {v: 0.05 * math.sin(v) for v in T.vertices}
        J = curvature_jacobian(l, u).matrix.toarray()
        h = 1e-5

        def K(w):
            values = curvature(conformal_change(l, w)).interior
            return np.array([values[i] for i in sorted(T.interior_vertices)])

        for column, v in enumerate(T.vertices):
            plus = dict(u)
            minus = dict(u)
            plus[v] += h
            minus[v] -= h
            derivative = (K(plus) - K(minus)) / (2 * h)
            np.testing.assert_allclose(J[:, column], derivative, atol=1e-6)

    def test_constant_factor_changes_nothing(self):
        T, _, l = meshes.hex_metric(3)

        J = curvature_jacobian(l).matrix
        np.testing.assert_allclose(J @ np.ones(len(T.vertices)), 0, atol=1e-12)

    def test_interior_block_is_symmetric(self):
        _, _, l = meshes.hex_metric(2)

        block = curvature_jacobian(l).interior_block().toarray()
        np.testing.assert_allclose(block, block.T, atol=1e-14)
        self.assertTrue(np.all(np.linalg.eigvalsh(block) > 0))


class ConformalMaxPrincipleTests(unittest.TestCase):
    def test_scaled_metric(self):
        _, _, l = meshes.hex_metric(2)

        report = conformal_max_principle_check(l, l.scaled(2.0))
        self.assertTrue(report.ok)
        self.assertAlmostEqual(report.u[0], math.log(2), places=12)
        self.assertAlmostEqual(report.margin, 0.0, places=12)

        report = conformal_max_principle_check(l, l.scaled(2.0), vertex=0)
        self.assertTrue(report.ok)

    def test_curved_metric(self):
        l = meshes.five_fan_metric()

        with self.assertRaises(HypothesisViolatedError) as cm:
            conformal_max_principle_check(l, l)

        self.assertEqual(cm.exception.hypothesis, "flat")

    def test_non_delaunay_metric(self):
        _, phi = meshes.kite()
        l = PLMetric.from_embedding(phi)

        with self.assertRaises(HypothesisViolatedError) as cm:
            conformal_max_principle_check(l, l)

        self.assertEqual(cm.exception.hypothesis, "delaunay")

    def test_boundary_vertex(self):
        _, _, l = meshes.hex_metric(1)

        with self.assertRaises(DcglabApiError):
            conformal_max_principle_check(l, l, vertex=3)


class ConformalFactorPropertyTests(unittest.TestCase):
    @given(u=small_factors(), w=small_factors())
    @settings(max_examples=25, deadline=None)
    def test_changes_compose(self, u, w):
        once = conformal_change(HEX_L, {v: u[v] + w[v] for v in HEX_T.vertices})
        twice = conformal_change(conformal_change(HEX_L, u), w)

        for e in HEX_T.edges:
            self.assertAlmostEqual(once[e], twice[e], places=12)

    @given(u=small_factors())
    @settings(max_examples=25, deadline=None)
    def test_factor_is_recovered(self, u):
        fit = recover_conformal_factor(HEX_L, conformal_change(HEX_L, u))

        self.assertLessEqual(fit.residual, 1e-10)
        for v in HEX_T.vertices:
            self.assertAlmostEqual(fit.u[v], u[v], places=10)
