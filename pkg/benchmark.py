import cProfile
import sys
import timeit
import warnings

from dcglab import PLMetric, gen_hex_patch
from dcglab.flow import yamabe_solve
from dcglab.harmonic import WeightedGraph, dirichlet_solve
from dcglab.metric import cot_weights

RADIUS = 20


def setup():
    T, phi = gen_hex_patch(RADIUS)
    l = PLMetric.from_embedding(phi)
    graph = WeightedGraph.from_edge_weights(cot_weights(l))
    boundary = {v: phi[v].real for v in T.boundary_vertices}
    return T, l, graph, boundary


T, l, graph, boundary = setup()


def benchmark_iterative():
    dirichlet_solve(graph, T.interior_vertices, boundary)


def benchmark_dense():
    # Conjugate gradients cannot meet a zero tolerance, so this times the full
    # iteration budget followed by the dense fallback.
    dirichlet_solve(graph, T.interior_vertices, boundary, rtol=0.0)


def benchmark_yamabe():
    yamabe_solve(l, {v: 0.1 * x / RADIUS for v, x in boundary.items()})


def benchmark():
    warnings.simplefilter("ignore")
    for name in ("iterative", "dense", "yamabe"):
        seconds = timeit.timeit(
            f"benchmark_{name}()",
            number=1,
            setup=f"from __main__ import benchmark_{name}",
        )
        print(f"{name}: {seconds:0.3f} seconds")


def profile():
    cProfile.run("benchmark_yamabe()", sort="cumulative")


if __name__ == "__main__":
    if "--profile" in sys.argv:
        profile()
    else:
        benchmark()
