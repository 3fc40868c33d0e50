import math
import unittest

import networkx as nx

from dcglab import CheckFailedError, DcglabApiError, HypothesisViolatedError
from dcglab import gen_hex_patch
from dcglab.exceptions import (
    BadRadiiError,
    DisconnectedTerminalsError,
    SeparationViolatedError,
)
from dcglab.harmonic import WeightedGraph, effective_resistance
from dcglab.network import (
    annulus_modulus,
    doubling_subannulus,
    edge_conductance,
    he_inequality_check,
    modulus_doubling_check,
    parabolicity_growth,
    vel,
    vel_additivity_check,
    vel_annulus_bound_check,
    vertex_modulus,
)

from . import meshes


class VertexModulusTests(unittest.TestCase):
    def test_path_through_one_vertex(self):
        solution = vertex_modulus(nx.path_graph(3), [0], [2])

        self.assertAlmostEqual(solution.objective, 1 / 3, places=8)
        self.assertAlmostEqual(vel(nx.path_graph(3), [0], [2]), 3.0, places=7)
        for value in solution.values.values():
            self.assertAlmostEqual(value, 1 / 3, places=6)
        self.assertGreaterEqual(solution.separation, 1 - 1e-6)

    def test_adjacent_terminals(self):
        solution = vertex_modulus(nx.path_graph(2), [0], [1])

        self.assertAlmostEqual(solution.objective, 1 / 2, places=8)

    def test_disjoint_paths(self):
        for k in (1, 2, 3):
            G = nx.disjoint_union_all([nx.path_graph(3)] * k)
            starts, ends = range(0, 3 * k, 3), range(2, 3 * k, 3)

            solution = vertex_modulus(G, starts, ends)
            self.assertAlmostEqual(solution.objective, k / 3, places=7)
            self.assertGreaterEqual(solution.gap, -1e-9)

    def test_weights_are_ignored(self):
        self.assertAlmostEqual(
            vel(meshes.path_graph(3, weight=7.0), [0], [2]), 3.0, places=7
        )

    def test_disconnected(self):
        G = WeightedGraph({(0, 1): 1.0, (2, 3): 1.0})

        with self.assertRaises(DisconnectedTerminalsError):
            vertex_modulus(G, [0], [3])

    def test_bad_terminals(self):
        with self.assertRaises(DcglabApiError):
            vertex_modulus(nx.path_graph(3), [], [2])

        with self.assertRaises(DcglabApiError):
            vertex_modulus(nx.path_graph(3), [0, 1], [1])

        with self.assertRaises(DcglabApiError):
            vertex_modulus(nx.path_graph(3), [0], [9])


class EdgeConductanceTests(unittest.TestCase):
    def test_series(self):
        self.assertAlmostEqual(
            edge_conductance(meshes.path_graph(3), [0], [2]), 0.5, places=7
        )

    def test_parallel(self):
        G = WeightedGraph({(0, 1): 1.0, (0, 2): 1.0})

        self.assertAlmostEqual(edge_conductance(G, [0], [1, 2]), 2.0, places=7)

    def test_agrees_with_resistance_on_grid(self):
        G = meshes.grid_graph(3)
        V1, V2 = [0, 3, 6], [2, 5, 8]

        self.assertAlmostEqual(
            edge_conductance(G, V1, V2),
            1 / effective_resistance(G, V1, V2),
            places=6,
        )

    def test_zero_weight_edges_are_dropped(self):
        G = WeightedGraph({(0, 1): 1.0, (1, 2): 1.0, (0, 2): 0.0})

        self.assertAlmostEqual(edge_conductance(G, [0], [2]), 0.5, places=7)


class HeInequalityTests(unittest.TestCase):
    def test_series_pair(self):
        report = he_inequality_check(meshes.path_graph(3), [0], [2], 2.0)

        self.assertTrue(report.ok)
        self.assertAlmostEqual(report.vel, 3.0, places=7)
        self.assertAlmostEqual(report.resistance, 2.0, places=12)
        self.assertAlmostEqual(report.bound, 8.0, places=12)
        self.assertAlmostEqual(report.slack, 5.0, places=7)

    def test_weight_sum_too_large(self):
        with self.assertRaises(HypothesisViolatedError) as cm:
            he_inequality_check(meshes.path_graph(3), [0], [2], 1.0)

        self.assertEqual(cm.exception.witness, 1)


class AnnulusTests(unittest.TestCase):
    def test_modulus(self):
        self.assertAlmostEqual(
            annulus_modulus(1, math.exp(2 * math.pi)), 1.0, places=14
        )
        self.assertAlmostEqual(
            annulus_modulus(3, 6), math.log(2) / (2 * math.pi), places=14
        )
        self.assertAlmostEqual(
            annulus_modulus(1, math.exp(200 * math.pi)), 100.0, places=10
        )

    def test_bad_radii(self):
        for r, r2 in ((1, 1), (2, 1), (0, 1), (1, math.inf)):
            with self.assertRaises(BadRadiiError):
                annulus_modulus(r, r2)

    def test_lattice_bound(self):
        T, phi = gen_hex_patch(8)
        V1 = [v for v in T.vertices if abs(phi[v]) <= 1 + 1e-9]
        V2 = [v for v in T.vertices if abs(phi[v]) >= 4]

        report = vel_annulus_bound_check(phi, V1, V2, 1 + 1e-9, 4)
        self.assertTrue(report.ok)
        self.assertGreaterEqual(report.proof_separation, 1 - 1e-8)
        self.assertGreaterEqual(report.vel, report.proof_bound * (1 - 1e-6))

    def test_inner_set_too_large(self):
        T, phi = gen_hex_patch(4)
        V2 = [v for v in T.vertices if abs(phi[v]) >= 3.5]

        with self.assertRaises(HypothesisViolatedError) as cm:
            vel_annulus_bound_check(phi, [0, 7], V2, 1.5, 3.5)

        self.assertEqual(cm.exception.hypothesis, "inner containment")


class AdditivityTests(unittest.TestCase):
    def test_single_pair(self):
        report = vel_additivity_check(nx.path_graph(5), [[0], [4]])

        self.assertTrue(report.ok)
        self.assertEqual(report.terms, [report.total])
        self.assertEqual(report.slack, 0.0)

    def test_nested_rings(self):
        T, _ = gen_hex_patch(3)
        rings = [[0], list(range(1, 7)), list(range(7, 19)), list(range(19, 37))]

        report = vel_additivity_check(T.vertex_graph(), rings)
        self.assertTrue(report.ok)
        self.assertEqual(len(report.terms), 2)
        self.assertGreaterEqual(report.slack, -1e-6)

    def test_not_separating(self):
        with self.assertRaises(SeparationViolatedError):
            vel_additivity_check(nx.cycle_graph(4), [[0], [1], [2], [3]])

    def test_odd_number_of_sets(self):
        with self.assertRaises(DcglabApiError):
            vel_additivity_check(nx.path_graph(5), [[0], [2], [4]])


class GrowthTests(unittest.TestCase):
    def test_lattice(self):
        _, phi = gen_hex_patch(6)

        report = parabolicity_growth(phi, 2)
        self.assertEqual([row.level for row in report.rows], [1, 2])
        self.assertEqual([row.radius for row in report.rows], [2.0, 4.0])
        self.assertTrue(report.nondecreasing)
        for row in report.rows:
            self.assertGreaterEqual(row.vel, row.lower_bound - 1e-6)

    def test_single_level(self):
        _, phi = gen_hex_patch(3)

        report = parabolicity_growth(phi, 1)
        self.assertEqual(len(report.rows), 1)
        self.assertAlmostEqual(report.rows[0].lower_bound, report.rows[0].vel)

    def test_patch_too_small(self):
        _, phi = gen_hex_patch(2)

        with self.assertRaises(DcglabApiError):
            parabolicity_growth(phi, 3)


class DoublingTests(unittest.TestCase):
    inner = [1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]

    def test_wide_annulus(self):
        outer = [5 + 5j, -5 + 5j, -5 - 5j, 5 - 5j]

        self.assertAlmostEqual(doubling_subannulus(self.inner, outer), math.sqrt(2))
        self.assertIsNotNone(modulus_doubling_check(self.inner, outer, 150.0))

    def test_thin_annulus(self):
        outer = [2 + 2j, -2 + 2j, -2 - 2j, 2 - 2j]

        self.assertIsNone(doubling_subannulus(self.inner, outer))
        self.assertIsNone(modulus_doubling_check(self.inner, outer, 0.5))

        with self.assertRaises(CheckFailedError):
            modulus_doubling_check(self.inner, outer, 150.0)

    def test_origin_outside(self):
        with self.assertRaises(DcglabApiError):
            doubling_subannulus([2, 3, 3 + 1j], [10, 10j, -10, -10j])
