"""
Weighted graphs, their Laplacian, the Dirichlet problem and effective resistance.

The Laplacian follows the sign convention ``(Lap u)_i = sum_j mu_ij (u_j - u_i)``,
which is the negative of the matrix networkx calls the Laplacian.
"""
import csv
import math
import warnings
from typing import Dict, Iterable, List, Mapping, Optional, Set, Tuple, Union

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.sparse.linalg
from attr import attrs

from .complex import Edge, VertexSubset, edge_key
from .debug import Debugger
from .exceptions import (
    DcglabApiError,
    DcglabWarning,
    DisconnectedTerminalsError,
    NotHarmonicError,
    NumericalFailureError,
    SingularSystemError,
    WeightDegenerateError,
    ZeroWeightAtInteriorError,
)
from .metric import DELAUNAY_SLACK, EdgeWeights

# Below this many unknowns a stalled iterative solve is redone by dense elimination.
DENSE_FALLBACK_LIMIT = 2000
# Relative residual at which conjugate gradients stops.
CG_TOLERANCE = 1e-12
# Weights at or below this count as zero when deciding connectivity.
POSITIVE_WEIGHT_THRESHOLD = 1e-12
# Accepted harmonicity residual, relative to 1 + the sup norm of the data.
HARMONIC_RESIDUAL = 1e-10


class WeightedGraph:
    """
    A simple graph with a nonnegative weight ``mu`` on every edge, stored as the
    ``"mu"`` attribute of a networkx graph.
    """

    def __init__(
        self, weights: Mapping[Tuple[int, int], float], vertices: Iterable[int] = ()
    ) -> None:
        graph = nx.Graph()
        graph.add_nodes_from(vertices)
        for (i, j), value in weights.items():
            if i == j:
                raise DcglabApiError(f"self-loop at vertex {i}")

            value = float(value)
            if not math.isfinite(value) or value < 0:
                raise DcglabApiError(
                    f"weight of edge {(i, j)} is not a nonnegative number"
                )

            graph.add_edge(i, j, mu=value)

        if graph.number_of_nodes() == 0:
            raise DcglabApiError("a weighted graph needs at least one vertex")

        self.graph = graph

    @classmethod
    def from_edge_weights(
        cls,
        weights: EdgeWeights,
        *,
        slack: float = DELAUNAY_SLACK,
        edges: Optional[Iterable[Edge]] = None,
    ) -> "WeightedGraph":
        """
        Build the weighted 1-skeleton of a triangulation from its edge weights.

        Weights in ``[-slack, 0)`` are the cocircular case seen through rounding and
        are clamped to zero with a warning.

        :param edges: Restrict the graph to these edges. All vertices are kept.
        :raises WeightDegenerateError: if a weight is below ``-slack``.
        """
        T = weights.triangulation
        chosen = T.edges if edges is None else sorted(edge_key(*e) for e in edges)
        clamped = {}
        for e in chosen:
            value = weights[e]
            if value < -slack:
                raise WeightDegenerateError(
                    f"edge {e} has negative weight {value!r}", edge=e, weight=value
                )
            elif value < 0:
                warnings.warn(
                    f"clamping weight {value!r} of edge {e} to zero", DcglabWarning
                )
                value = 0.0
            clamped[e] = value

        return cls(clamped, T.vertices)

    def __repr__(self) -> str:
        return (
            f"WeightedGraph(vertices={self.graph.number_of_nodes()}, "
            + f"edges={self.graph.number_of_edges()})"
        )

    @property
    def vertices(self) -> List[int]:
        return sorted(self.graph.nodes)

    @property
    def edges(self) -> List[Edge]:
        return sorted(edge_key(i, j) for i, j in self.graph.edges)

    def mu(self, i: int, j: int) -> float:
        return self.graph.edges[i, j]["mu"]

    def positive_subgraph(
        self, threshold: float = POSITIVE_WEIGHT_THRESHOLD
    ) -> nx.Graph:
        positive = nx.Graph()
        positive.add_nodes_from(self.graph.nodes)
        positive.add_edges_from(
            (i, j, data)
            for i, j, data in self.graph.edges(data=True)
            if data["mu"] > threshold
        )
        return positive

    def laplacian_matrix(self, nodelist: List[int]) -> scipy.sparse.csr_array:
        # networkx returns D - W, the positive semidefinite form.
        return nx.laplacian_matrix(self.graph, nodelist=nodelist, weight="mu").tocsr()


@attrs(auto_attribs=True, frozen=True)
class MaxPrincipleReport:
    ok: bool
    # The interior vertex exceeding the boundary range the most, if any.
    witness: Optional[int]
    boundary_min: float
    boundary_max: float
    margin: float


def laplacian_apply(G: WeightedGraph, u: Mapping[int, float]) -> Dict[int, float]:
    nodes = G.vertices
    values = _values_on(nodes, u)
    result = -(G.laplacian_matrix(nodes) @ values)
    return {v: float(x) for v, x in zip(nodes, result)}


def dirichlet_solve(
    G: WeightedGraph,
    interior: Union[VertexSubset, Iterable[int]],
    f: Mapping[int, float],
    *,
    rtol: float = CG_TOLERANCE,
    dense_limit: int = DENSE_FALLBACK_LIMIT,
    allow_zero_weights: bool = False,
    debug: bool = False,
) -> Dict[int, float]:
    """
    Solve ``Lap u = 0`` on ``interior`` with ``u = f`` on the other vertices.

    The reduced system is symmetric and diagonally dominant. It is solved by
    conjugate gradients with a Jacobi preconditioner; if that stalls and the system
    has fewer than ``dense_limit`` unknowns it is solved again by dense elimination.

    :param interior: The unknowns, as a ``VertexSubset`` (its ``interior`` part) or a
        plain collection of vertices.
    :param f: Boundary values, required at every vertex not in ``interior``.
    :param allow_zero_weights: Accept zero weights at interior vertices. The system
        must still be nonsingular.
    :param debug: Print the residual of every conjugate-gradient iteration.
    :raises ZeroWeightAtInteriorError: if an edge at an interior vertex has zero
        weight and ``allow_zero_weights`` is not set.
    :raises SingularSystemError: if some group of interior vertices is not joined to
        the boundary by positive weights.
    """
    unknowns = _interior_set(G, interior)
    nodes = G.vertices
    fixed = [v for v in nodes if v not in unknowns]
    for v in fixed:
        if v not in f:
            raise DcglabApiError(f"no boundary value given at vertex {v}")
        if not math.isfinite(f[v]):
            raise DcglabApiError(f"boundary value at vertex {v} is not finite")

    u = {v: float(f[v]) for v in fixed}
    if not unknowns:
        return u

    if not allow_zero_weights:
        for i in sorted(unknowns):
            for j in sorted(G.graph[i]):
                if G.mu(i, j) <= 0:
                    raise ZeroWeightAtInteriorError(
                        f"edge {edge_key(i, j)} at interior vertex {i} has zero weight",
                        hypothesis="positive weights",
                        witness=edge_key(i, j),
                    )

    _check_anchored(G, unknowns)

    interior_nodes = sorted(unknowns)
    position = {v: k for k, v in enumerate(nodes)}
    rows = [position[v] for v in interior_nodes]
    columns = [position[v] for v in fixed]
    L = G.laplacian_matrix(nodes)
    A = L[rows, :][:, rows]
    b = np.zeros(len(rows))
    if fixed:
        b = -(L[rows, :][:, columns] @ np.array([u[v] for v in fixed]))

    scale = 1 + max((abs(x) for x in u.values()), default=0.0)
    x = _solve_reduced(A, b, rtol, dense_limit, scale, debug)
    for v, value in zip(interior_nodes, x):
        u[v] = float(value)

    return u


def max_principle_check(
    G: WeightedGraph,
    interior: Union[VertexSubset, Iterable[int]],
    u: Mapping[int, float],
    *,
    tolerance: float = HARMONIC_RESIDUAL,
) -> MaxPrincipleReport:
    """
    Whether the maximum and minimum of a harmonic ``u`` are attained off
    ``interior``.

    :raises NotHarmonicError: if ``u`` is not harmonic at some interior vertex.
    """
    unknowns = _interior_set(G, interior)
    fixed = [v for v in G.vertices if v not in unknowns]
    if not fixed:
        raise DcglabApiError("every vertex is interior")

    values = {v: float(u[v]) for v in G.vertices}
    scale = 1 + max(abs(x) for x in values.values())
    laplacian = laplacian_apply(G, values)
    for i in sorted(unknowns):
        if abs(laplacian[i]) > tolerance * scale:
            raise NotHarmonicError(
                f"function is not harmonic at vertex {i} (residual {laplacian[i]!r})",
                hypothesis="harmonic",
                witness=i,
            )

    low = min(values[v] for v in fixed)
    high = max(values[v] for v in fixed)
    margin = math.inf
    witness = None
    for i in sorted(unknowns):
        vertex_margin = min(values[i] - low, high - values[i])
        if vertex_margin < margin:
            margin = vertex_margin
            if vertex_margin < -tolerance * scale:
                witness = i

    return MaxPrincipleReport(
        ok=witness is None,
        witness=witness,
        boundary_min=low,
        boundary_max=high,
        margin=margin,
    )


def effective_resistance(
    G: WeightedGraph,
    V1: Iterable[int],
    V2: Iterable[int],
    *,
    threshold: float = POSITIVE_WEIGHT_THRESHOLD,
    debug: bool = False,
) -> float:
    """
    Effective resistance between two disjoint vertex sets.

    The potential that is 0 on ``V1``, 1 on ``V2`` and harmonic elsewhere is solved on
    the components of the positive-weight subgraph that meet both sets; the
    resistance is the reciprocal of its energy.

    :raises DisconnectedTerminalsError: if no positive-weight path joins the sets.
    """
    first, second = set(V1), set(V2)
    if not first or not second:
        raise DcglabApiError("terminal sets must be nonempty")
    if first & second:
        raise DcglabApiError("terminal sets must be disjoint")

    unknown = (first | second) - set(G.graph.nodes)
    if unknown:
        raise DcglabApiError(f"vertices not in the graph: {sorted(unknown)}")

    positive = G.positive_subgraph(threshold)
    active: Set[int] = set()
    for component in nx.connected_components(positive):
        if component & first and component & second:
            active |= component

    if not active:
        raise DisconnectedTerminalsError(
            "no positive-weight path joins the terminal sets",
            hypothesis="connected terminals",
        )

    restricted = WeightedGraph(
        {
            (i, j): data["mu"]
            for i, j, data in positive.subgraph(active).edges(data=True)
        },
        active,
    )
    boundary = {v: 0.0 for v in active & first}
    boundary.update({v: 1.0 for v in active & second})
    potential = dirichlet_solve(
        restricted, active - first - second, boundary, debug=debug
    )
    return 1 / dirichlet_energy(restricted, potential)


def dirichlet_energy(G: WeightedGraph, u: Mapping[int, float]) -> float:
    return math.fsum(
        data["mu"] * (u[i] - u[j]) ** 2 for i, j, data in G.graph.edges(data=True)
    )


def positive_subgraph_connected(
    G: WeightedGraph, *, threshold: float = POSITIVE_WEIGHT_THRESHOLD
) -> bool:
    return nx.is_connected(G.positive_subgraph(threshold))


def read_weighted_graph_csv(path: str) -> WeightedGraph:
    """
    Read a weighted graph from a CSV file with header ``i,j,mu``.
    """
    weights = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["i", "j", "mu"]:
            raise DcglabApiError(f"{path}: expected the header i,j,mu")

        for line, row in enumerate(reader, start=2):
            try:
                i, j, mu = int(row["i"]), int(row["j"]), float(row["mu"])
            except (TypeError, ValueError):
                raise DcglabApiError(f"{path}, line {line}: malformed row") from None
            weights[edge_key(i, j)] = mu

    return WeightedGraph(weights)


def write_weighted_graph_csv(G: WeightedGraph, path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["i", "j", "mu"])
        for i, j in G.edges:
            writer.writerow([i, j, repr(G.mu(i, j))])


def _solve_reduced(
    A: scipy.sparse.csr_array,
    b: np.ndarray,
    rtol: float,
    dense_limit: int,
    scale: float,
    debug: bool,
) -> np.ndarray:
    n = A.shape[0]
    diagonal = A.diagonal()
    preconditioner = scipy.sparse.linalg.LinearOperator(
        (n, n), matvec=lambda r: r / diagonal, dtype=float
    )

    debugger = Debugger("dirichlet") if debug else None
    iterations = 0

    def callback(xk: np.ndarray) -> None:
        nonlocal iterations
        iterations += 1
        if debugger is not None:
            debugger.step(
                f"iteration {iterations}",
                residual=float(np.linalg.norm(b - A @ xk)),
            )

    x, info = scipy.sparse.linalg.cg(
        A, b, rtol=rtol, atol=0.0, maxiter=10 * n, M=preconditioner, callback=callback
    )
    if info == 0 and _residual(A, x, b) <= HARMONIC_RESIDUAL * scale:
        return x

    if n >= dense_limit:
        raise NumericalFailureError(
            f"conjugate gradients stalled after {iterations} iterations "
            + f"on {n} unknowns"
        )

    warnings.warn(
        f"conjugate gradients stalled after {iterations} iterations; "
        + "solving by dense elimination",
        DcglabWarning,
    )
    x = scipy.linalg.solve(A.toarray(), b, assume_a="sym")
    if _residual(A, x, b) > HARMONIC_RESIDUAL * scale:
        raise NumericalFailureError("dense elimination left a large residual")

    return x


def _residual(A: scipy.sparse.csr_array, x: np.ndarray, b: np.ndarray) -> float:
    if not np.all(np.isfinite(x)):
        return math.inf
    return float(np.max(np.abs(A @ x - b), initial=0.0))


def _check_anchored(G: WeightedGraph, unknowns: Set[int]) -> None:
    """
    :raises SingularSystemError: if a component of positive-weight edges among the
        unknowns has no positive-weight edge to a fixed vertex.
    """
    positive = G.positive_subgraph(0.0)
    for component in nx.connected_components(positive.subgraph(unknowns)):
        anchored = any(
            j not in unknowns for i in component for j in positive[i]
        )
        if not anchored:
            raise SingularSystemError(
                f"interior vertices {sorted(component)} are not joined to the boundary"
            )


def _interior_set(
    G: WeightedGraph, interior: Union[VertexSubset, Iterable[int]]
) -> Set[int]:
    members = set(interior.interior if isinstance(interior, VertexSubset) else interior)
    unknown = members - set(G.graph.nodes)
    if unknown:
        raise DcglabApiError(f"vertices not in the graph: {sorted(unknown)}")
    return members


def _values_on(nodes: List[int], u: Mapping[int, float]) -> np.ndarray:
    values = np.empty(len(nodes))
    for k, v in enumerate(nodes):
        if v not in u:
            raise DcglabApiError(f"function has no value at vertex {v}")
        values[k] = u[v]
    return values
