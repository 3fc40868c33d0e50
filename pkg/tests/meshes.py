import math

import networkx as nx

from dcglab import PlanarEmbedding, PLMetric, build_triangulation, gen_hex_patch
from dcglab.harmonic import WeightedGraph

SQRT3 = math.sqrt(3)
HEIGHT = SQRT3 / 2


def equilateral_triangle():
    T = build_triangulation([(0, 1, 2)])
    return T, PlanarEmbedding(T, [0, 1, complex(0.5, HEIGHT)])


def right_triangle_metric():
    # Sides 3, 4, 5 with the right angle at vertex 1.
    T = build_triangulation([(0, 1, 2)])
    return PLMetric(T, {(0, 1): 3.0, (1, 2): 4.0, (0, 2): 5.0})


def equilateral_pair():
    # Two unit triangles sharing the edge 0-1.
    T = build_triangulation([(0, 1, 2), (0, 3, 1)])
    return T, PlanarEmbedding(
        T, [0, 1, complex(0.5, HEIGHT), complex(0.5, -HEIGHT)]
    )


def unit_square():
    # Cocircular: the diagonal 0-2 has opposite angles adding up to pi.
    T = build_triangulation([(0, 1, 2), (0, 2, 3)])
    return T, PlanarEmbedding(T, [0, 1, 1 + 1j, 1j])


def kite():
    # The diagonal 0-2 faces two obtuse angles.
    T = build_triangulation([(0, 1, 2), (0, 2, 3)])
    return T, PlanarEmbedding(T, [0, 5 - 1j, 10, 5 + 1j])


def five_fan_metric():
    # Five unit equilateral triangles around vertex 0: curvature pi/3 at the center.
    T = build_triangulation([(0, k, k % 5 + 1) for k in range(1, 6)])
    return PLMetric(T, {e: 1.0 for e in T.edges})


def hex_metric(radius):
    T, phi = gen_hex_patch(radius)
    return T, phi, PLMetric.from_embedding(phi)


def path_graph(n, weight=1.0):
    return WeightedGraph({(k, k + 1): weight for k in range(n - 1)})


def parallel_paths(k, weight=1.0):
    # k disjoint paths 0 - m - 1 between the terminals 0 and 1.
    return WeightedGraph(
        {edge: weight for m in range(2, k + 2) for edge in ((0, m), (m, 1))}
    )


def grid_graph(n, weights=None):
    """
    The n-by-n grid with vertices numbered row by row.
    """
    grid = nx.convert_node_labels_to_integers(
        nx.grid_2d_graph(n, n), ordering="sorted"
    )
    return WeightedGraph(
        {
            (i, j): 1.0 if weights is None else weights[k]
            for k, (i, j) in enumerate(sorted(grid.edges))
        }
    )
