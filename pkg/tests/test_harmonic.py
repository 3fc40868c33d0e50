import os
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dcglab import DcglabApiError, DcglabWarning, PLMetric, build_triangulation
from dcglab.exceptions import (
    DisconnectedTerminalsError,
    NotHarmonicError,
    SingularSystemError,
    WeightDegenerateError,
    ZeroWeightAtInteriorError,
)
from dcglab.harmonic import (
    WeightedGraph,
    dirichlet_energy,
    dirichlet_solve,
    effective_resistance,
    laplacian_apply,
    max_principle_check,
    positive_subgraph_connected,
    read_weighted_graph_csv,
    write_weighted_graph_csv,
)
from dcglab.metric import EdgeWeights, cot_weights

from . import meshes


def dense_resistance(G, a, b):
    nodes = G.vertices
    L = G.laplacian_matrix(nodes).toarray()
    e = np.zeros(len(nodes))
    e[nodes.index(a)] = 1.0
    e[nodes.index(b)] = -1.0
    return float(e @ np.linalg.pinv(L) @ e)


class WeightedGraphTests(unittest.TestCase):
    def test_negative_weight(self):
        with self.assertRaises(DcglabApiError):
            WeightedGraph({(0, 1): -1.0})

    def test_self_loop(self):
        with self.assertRaises(DcglabApiError):
            WeightedGraph({(0, 0): 1.0})

    def test_from_cotangent_weights(self):
        T, _, l = meshes.hex_metric(2)

        G = WeightedGraph.from_edge_weights(cot_weights(l))
        self.assertEqual(G.vertices, list(T.vertices))
        self.assertEqual(G.edges, list(T.edges))
        self.assertTrue(positive_subgraph_connected(G))

    def test_negative_cotangent_weight(self):
        _, phi = meshes.kite()

        with self.assertRaises(WeightDegenerateError) as cm:
            WeightedGraph.from_edge_weights(cot_weights(PLMetric.from_embedding(phi)))

        self.assertEqual(cm.exception.edge, (0, 2))

    def test_rounding_is_clamped(self):
        T = build_triangulation([(0, 1, 2)])
        weights = EdgeWeights(T, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): -1e-12})

        with self.assertWarns(DcglabWarning):
            G = WeightedGraph.from_edge_weights(weights)

        self.assertEqual(G.mu(1, 2), 0.0)

    def test_cocircular_square(self):
        _, phi = meshes.unit_square()

        G = WeightedGraph.from_edge_weights(cot_weights(PLMetric.from_embedding(phi)))
        self.assertTrue(positive_subgraph_connected(G))
        self.assertEqual(len(G.positive_subgraph().edges), 4)

    def test_star_with_zero_weights(self):
        G = WeightedGraph({(0, 1): 1.0, (0, 2): 0.0})

        self.assertFalse(positive_subgraph_connected(G))

    def test_csv(self):
        G = meshes.grid_graph(3)
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        path = os.path.join(directory.name, "grid.csv")

        write_weighted_graph_csv(G, path)
        copy = read_weighted_graph_csv(path)
        self.assertEqual(copy.edges, G.edges)

        with open(path, "w") as f:
            f.write("a,b,c\n1,2,3\n")
        with self.assertRaises(DcglabApiError):
            read_weighted_graph_csv(path)


class LaplacianTests(unittest.TestCase):
    def test_constant_function(self):
        G = meshes.grid_graph(3)

        result = laplacian_apply(G, {v: 4.0 for v in G.vertices})
        for value in result.values():
            self.assertAlmostEqual(value, 0.0, places=14)

    def test_path(self):
        G = meshes.path_graph(3)

        self.assertEqual(laplacian_apply(G, {0: 0.0, 1: 1.0, 2: 2.0}), {
            0: 1.0,
            1: 0.0,
            2: -1.0,
        })


class DirichletTests(unittest.TestCase):
    def test_path(self):
        G = meshes.path_graph(4)

        u = dirichlet_solve(G, [1, 2], {0: 0.0, 3: 1.0})
        self.assertAlmostEqual(u[1], 1 / 3, places=12)
        self.assertAlmostEqual(u[2], 2 / 3, places=12)

    def test_constant_boundary_values(self):
        T, _, l = meshes.hex_metric(3)
        G = WeightedGraph.from_edge_weights(cot_weights(l))
        f = {v: 2.5 for v in T.boundary_vertices}

        u = dirichlet_solve(G, T.interior_vertices, f)
        for v in T.vertices:
            self.assertAlmostEqual(u[v], 2.5, places=10)

    def test_linear_function_on_lattice(self):
        # Linear functions are harmonic for the cotangent weights of a flat metric.
        T, phi, l = meshes.hex_metric(3)
        G = WeightedGraph.from_edge_weights(cot_weights(l))
        f = {v: phi[v].real - 2 * phi[v].imag for v in T.boundary_vertices}

        u = dirichlet_solve(G, T.interior_vertices, f)
        for v in T.interior_vertices:
            self.assertAlmostEqual(u[v], phi[v].real - 2 * phi[v].imag, places=10)

    def test_dense_solve_agrees(self):
        T, _, l = meshes.hex_metric(2)
        G = WeightedGraph.from_edge_weights(cot_weights(l))
        f = {v: float(v % 3) for v in T.boundary_vertices}

        iterative = dirichlet_solve(G, T.interior_vertices, f)
        dense = dirichlet_solve(G, T.interior_vertices, f, rtol=0.0)
        for v in T.vertices:
            self.assertAlmostEqual(iterative[v], dense[v], places=10)

    def test_missing_boundary_value(self):
        G = meshes.path_graph(4)

        with self.assertRaises(DcglabApiError):
            dirichlet_solve(G, [1, 2], {0: 0.0})

    def test_zero_weight_at_interior_vertex(self):
        G = WeightedGraph({(0, 1): 1.0, (1, 2): 0.0, (1, 3): 1.0})

        with self.assertRaises(ZeroWeightAtInteriorError):
            dirichlet_solve(G, [1], {0: 0.0, 2: 1.0, 3: 1.0})

        u = dirichlet_solve(G, [1], {0: 0.0, 2: 5.0, 3: 1.0}, allow_zero_weights=True)
        self.assertAlmostEqual(u[1], 0.5, places=12)

    def test_unanchored_interior(self):
        G = WeightedGraph({(0, 1): 1.0, (2, 3): 1.0})

        with self.assertRaises(SingularSystemError):
            dirichlet_solve(G, [2, 3], {0: 0.0, 1: 1.0})

    @given(
        weights=st.lists(
            st.floats(min_value=0.1, max_value=10.0), min_size=12, max_size=12
        ),
        ends=st.tuples(
            st.floats(min_value=-5.0, max_value=5.0),
            st.floats(min_value=-5.0, max_value=5.0),
        ),
    )
    @settings(max_examples=30, deadline=None)
    def test_solution_obeys_maximum_principle(self, weights, ends):
        G = meshes.grid_graph(3, weights)
        left, right = ends
        f = {v: left if v % 3 == 0 else right for v in (0, 3, 6, 2, 5, 8)}

        u = dirichlet_solve(G, [1, 4, 7], f)
        report = max_principle_check(G, [1, 4, 7], u)
        self.assertTrue(report.ok)
        self.assertGreaterEqual(report.margin, -1e-10)


class MaxPrincipleTests(unittest.TestCase):
    def test_report(self):
        G = meshes.path_graph(4)

        report = max_principle_check(G, [1, 2], {0: 0.0, 1: 1 / 3, 2: 2 / 3, 3: 1.0})
        self.assertTrue(report.ok)
        self.assertEqual(report.boundary_min, 0.0)
        self.assertEqual(report.boundary_max, 1.0)
        self.assertAlmostEqual(report.margin, 1 / 3, places=12)

    def test_not_harmonic(self):
        G = meshes.path_graph(3)

        with self.assertRaises(NotHarmonicError) as cm:
            max_principle_check(G, [1], {0: 0.0, 1: 5.0, 2: 0.0})

        self.assertEqual(cm.exception.witness, 1)

    def test_every_vertex_interior(self):
        G = meshes.path_graph(3)

        with self.assertRaises(DcglabApiError):
            max_principle_check(G, [0, 1, 2], {0: 0.0, 1: 0.0, 2: 0.0})


class ResistanceTests(unittest.TestCase):
    def test_series(self):
        G = meshes.path_graph(3)

        self.assertAlmostEqual(effective_resistance(G, [0], [2]), 2.0, places=12)

    def test_parallel(self):
        G = meshes.parallel_paths(2, weight=2.0)

        self.assertAlmostEqual(effective_resistance(G, [0], [1]), 0.5, places=12)

    def test_grid_matches_dense_elimination(self):
        G = meshes.grid_graph(4)

        self.assertAlmostEqual(
            effective_resistance(G, [0], [15]), dense_resistance(G, 0, 15), places=10
        )

    def test_sets_of_vertices(self):
        # Shorting both ends of a path of three unit edges.
        G = meshes.path_graph(4)

        self.assertAlmostEqual(effective_resistance(G, [0, 1], [3]), 2.0, places=12)

    def test_dangling_component_is_ignored(self):
        G = WeightedGraph({(0, 1): 1.0, (1, 2): 1.0, (3, 4): 1.0})

        self.assertAlmostEqual(effective_resistance(G, [0, 3], [2]), 2.0, places=12)

    def test_disconnected_terminals(self):
        G = WeightedGraph({(0, 1): 1.0, (2, 3): 1.0})

        with self.assertRaises(DisconnectedTerminalsError):
            effective_resistance(G, [0], [3])

    def test_overlapping_terminals(self):
        G = meshes.path_graph(3)

        with self.assertRaises(DcglabApiError):
            effective_resistance(G, [0, 1], [1, 2])

    def test_energy(self):
        G = meshes.path_graph(3)

        self.assertEqual(dirichlet_energy(G, {0: 0.0, 1: 1.0, 2: 3.0}), 5.0)
