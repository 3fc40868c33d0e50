"""
Discrete extremal length.

Both the edge conductance and the vertex modulus are convex programs over metrics
that must give every path between two vertex sets length at least one. There are
exponentially many paths, so constraints are generated: the current metric is
checked against the shortest path from every source vertex, violated paths are added
and the least-distance problem over the collected paths is solved exactly.

Paths are simple and include both of their endpoints.
"""
import math
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
import scipy.optimize
from attr import attrs

from .complex import Edge, PlanarEmbedding, edge_key
from .debug import Debugger
from .exceptions import (
    BadRadiiError,
    CheckFailedError,
    DcglabApiError,
    DisconnectedTerminalsError,
    HypothesisViolatedError,
    IterationLimitError,
    NumericalFailureError,
    SeparationViolatedError,
)
from .harmonic import POSITIVE_WEIGHT_THRESHOLD, WeightedGraph, effective_resistance
from .predicates import distance_to_polygon, point_in_polygon

# Path length at which a metric counts as admissible.
ADMISSIBLE_LENGTH = 1 - 1e-8
# Upper limit on the number of path constraints collected.
MAX_CONSTRAINTS = 10000
# Violated paths added in each round of constraint generation.
PATHS_PER_ROUND = 32
# Modulus above which a round doubling subannulus must exist.
DOUBLING_THRESHOLD = 100.0
# Slack allowed when checking inequalities between computed extremal lengths.
INEQUALITY_SLACK = 1e-6

_SINK = -1

Path = Tuple[int, ...]


@attrs(auto_attribs=True, frozen=True)
class ExtremalLengthProblem:
    graph: nx.Graph
    sources: frozenset
    targets: frozenset
    # "vertex" or "edge".
    mode: str

    @classmethod
    def create(
        cls,
        G: Union[WeightedGraph, nx.Graph],
        V1: Iterable[int],
        V2: Iterable[int],
        mode: str,
    ) -> "ExtremalLengthProblem":
        """
        :raises DisconnectedTerminalsError: if no path joins ``V1`` to ``V2``.
        """
        if mode not in ("vertex", "edge"):
            raise DcglabApiError(f"unknown mode {mode!r}")

        graph = G.graph if isinstance(G, WeightedGraph) else G
        if mode == "edge":
            if not isinstance(G, WeightedGraph):
                raise DcglabApiError("edge mode needs a weighted graph")
            graph = G.positive_subgraph(POSITIVE_WEIGHT_THRESHOLD)

        sources, targets = frozenset(V1), frozenset(V2)
        if not sources or not targets:
            raise DcglabApiError("terminal sets must be nonempty")
        if sources & targets:
            raise DcglabApiError("terminal sets must be disjoint")

        unknown = (sources | targets) - set(graph.nodes)
        if unknown:
            raise DcglabApiError(f"vertices not in the graph: {sorted(unknown)}")

        problem = cls(graph=graph, sources=sources, targets=targets, mode=mode)
        if not _joined(graph, sources, targets):
            raise DisconnectedTerminalsError(
                "no path joins the terminal sets", hypothesis="connected terminals"
            )

        return problem


@attrs(auto_attribs=True, frozen=True)
class ModulusSolution:
    mode: str
    # Per vertex in vertex mode, per edge in edge mode.
    values: Dict
    # Sum of eta^2, or of mu * m^2 in edge mode.
    objective: float
    paths: List[Path]
    # Paths whose length is within 1e-6 of one.
    active: List[Path]
    # Shortest path length under `values` over all paths.
    separation: float
    # Upper bound minus `objective`, from rescaling to an admissible metric.
    gap: float


@attrs(auto_attribs=True, frozen=True)
class HeInequalityReport:
    ok: bool
    vel: float
    resistance: float
    bound: float
    slack: float


@attrs(auto_attribs=True, frozen=True)
class AnnulusBoundReport:
    ok: bool
    vel: float
    # The vertex metric built from the longest spoke at each vertex.
    proof_metric: Dict[int, float]
    proof_modulus: float
    # Shortest path length under `proof_metric`.
    proof_separation: float

    @property
    def proof_bound(self) -> float:
        return 1 / self.proof_modulus if self.proof_modulus > 0 else math.inf


@attrs(auto_attribs=True, frozen=True)
class AdditivityReport:
    ok: bool
    total: float
    terms: List[float]
    slack: float


@attrs(auto_attribs=True, frozen=True)
class GrowthRow:
    level: int
    radius: float
    ring_size: int
    vel: float
    # Sum of the extremal lengths of disjoint annuli nested inside this level.
    lower_bound: float


@attrs(auto_attribs=True, frozen=True)
class GrowthReport:
    base: float
    rows: List[GrowthRow]

    @property
    def nondecreasing(self) -> bool:
        return all(
            later.vel >= earlier.vel - INEQUALITY_SLACK
            for earlier, later in zip(self.rows, self.rows[1:])
        )


def edge_conductance(
    G: WeightedGraph,
    V1: Iterable[int],
    V2: Iterable[int],
    *,
    max_constraints: int = MAX_CONSTRAINTS,
    debug: bool = False,
) -> float:
    """
    The smallest ``sum mu(e) m(e)^2`` over edge metrics giving every path from ``V1``
    to ``V2`` length at least one. Zero-weight edges cost nothing and are dropped.
    """
    problem = ExtremalLengthProblem.create(G, V1, V2, "edge")
    return _solve(problem, max_constraints, debug).objective


def vertex_modulus(
    G: Union[WeightedGraph, nx.Graph],
    V1: Iterable[int],
    V2: Iterable[int],
    *,
    max_constraints: int = MAX_CONSTRAINTS,
    debug: bool = False,
) -> ModulusSolution:
    """
    The smallest ``sum eta(v)^2`` over vertex metrics giving every path from ``V1``
    to ``V2`` length at least one. Edge weights are ignored.

    :raises DisconnectedTerminalsError: if no path joins the two sets.
    :raises IterationLimitError: if more than ``max_constraints`` paths are needed.
        The admissible rescaling of the last iterate is attached as ``best``.
    """
    problem = ExtremalLengthProblem.create(G, V1, V2, "vertex")
    return _solve(problem, max_constraints, debug)


def vel(
    G: Union[WeightedGraph, nx.Graph],
    V1: Iterable[int],
    V2: Iterable[int],
    *,
    max_constraints: int = MAX_CONSTRAINTS,
) -> float:
    """
    Vertex extremal length, the reciprocal of the vertex modulus.
    """
    return 1 / vertex_modulus(G, V1, V2, max_constraints=max_constraints).objective


def he_inequality_check(
    G: WeightedGraph, V1: Iterable[int], V2: Iterable[int], C: float
) -> HeInequalityReport:
    """
    Compare the vertex extremal length with ``2 * C`` times the effective
    resistance, for a graph whose weight sum at every vertex is at most ``C``.

    :raises HypothesisViolatedError: if some vertex has weight sum above ``C``.
    """
    for v in G.vertices:
        total = math.fsum(G.mu(v, w) for w in G.graph[v])
        if total > C * (1 + 1e-12):
            raise HypothesisViolatedError(
                f"weight sum {total!r} at vertex {v} exceeds {C!r}",
                hypothesis="weight sum",
                witness=v,
            )

    V1, V2 = list(V1), list(V2)
    extremal_length = vel(G, V1, V2)
    resistance = effective_resistance(G, V1, V2)
    bound = 2 * C * resistance
    slack = bound - extremal_length
    return HeInequalityReport(
        ok=slack >= -INEQUALITY_SLACK,
        vel=extremal_length,
        resistance=resistance,
        bound=bound,
        slack=slack,
    )


def annulus_modulus(r: float, r2: float) -> float:
    """
    Modulus ``ln(r2 / r) / (2 pi)`` of the round annulus ``r < |z| < r2``.
    """
    if not (math.isfinite(r) and math.isfinite(r2) and 0 < r < r2):
        raise BadRadiiError(f"radii must satisfy 0 < r < r2, got {r!r} and {r2!r}")

    return math.log(r2 / r) / (2 * math.pi)


def vel_annulus_bound_check(
    phi: PlanarEmbedding,
    V1: Iterable[int],
    V2: Iterable[int],
    r1: float,
    r2: float,
) -> AnnulusBoundReport:
    """
    Compute the vertex extremal length between vertices inside ``|z| <= r1`` and
    vertices outside ``|z| >= r2``, together with the explicit admissible metric
    ``eta(i) = (longest spoke at i) / (r2 - r1)`` on vertices inside ``|z| < r2``
    with a neighbor there, and zero elsewhere.

    The explicit metric bounds the modulus from above, so the extremal length is at
    least ``1 / sum eta^2``.

    :raises HypothesisViolatedError: if a terminal lies on the wrong side, or the
        1-ring of a vertex of ``V1`` leaves ``|z| < r2``.
    """
    if not 0 < r1 < r2:
        raise BadRadiiError(f"radii must satisfy 0 < r1 < r2, got {r1!r} and {r2!r}")

    T = phi.triangulation
    V1, V2 = sorted(set(V1)), sorted(set(V2))
    for v in V1:
        if abs(phi[v]) > r1:
            raise HypothesisViolatedError(
                f"vertex {v} of the inner set lies outside |z| <= {r1!r}",
                hypothesis="inner containment",
                witness=v,
            )
        for w in T.neighbors[v]:
            if abs(phi[w]) >= r2:
                raise HypothesisViolatedError(
                    f"the 1-ring of vertex {v} leaves |z| < {r2!r}",
                    hypothesis="1-ring containment",
                    witness=v,
                )
    for v in V2:
        if abs(phi[v]) < r2:
            raise HypothesisViolatedError(
                f"vertex {v} of the outer set lies inside |z| < {r2!r}",
                hypothesis="outer containment",
                witness=v,
            )

    graph = T.vertex_graph()
    inside = {v for v in T.vertices if abs(phi[v]) < r2}
    eta = {}
    for v in T.vertices:
        if v in inside and any(w in inside for w in T.neighbors[v]):
            longest = max(abs(phi[v] - phi[w]) for w in T.neighbors[v])
            eta[v] = longest / (r2 - r1)
        else:
            eta[v] = 0.0

    extremal_length = vel(graph, V1, V2)
    candidates = _shortest_vertex_paths(graph, set(V1), set(V2), eta)
    proof_separation = min(value for value, _ in candidates)
    proof_modulus = math.fsum(x * x for x in eta.values())
    admissible = proof_separation >= ADMISSIBLE_LENGTH
    ok = admissible and extremal_length * proof_modulus >= 1 - INEQUALITY_SLACK
    return AnnulusBoundReport(
        ok=ok,
        vel=extremal_length,
        proof_metric=eta,
        proof_modulus=proof_modulus,
        proof_separation=proof_separation,
    )


def vel_additivity_check(
    G: Union[WeightedGraph, nx.Graph], sets: Sequence[Iterable[int]]
) -> AdditivityReport:
    """
    For nested separating sets ``V_1, ..., V_2m``, compare ``VEL(V_1, V_2m)`` with
    the sum of ``VEL(V_2k-1, V_2k)``.

    :raises SeparationViolatedError: if some ``V_b`` fails to separate ``V_a`` from
        ``V_c`` for ``a < b < c``.
    """
    graph = G.graph if isinstance(G, WeightedGraph) else G
    groups = [frozenset(s) for s in sets]
    if len(groups) < 2 or len(groups) % 2:
        raise DcglabApiError("an even number of at least two sets is needed")
    if any(not s for s in groups):
        raise DcglabApiError("sets must be nonempty")
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            if groups[a] & groups[b]:
                raise DcglabApiError(f"sets {a + 1} and {b + 1} overlap")

    check_separation(graph, groups)

    total = vel(graph, groups[0], groups[-1])
    terms = [vel(graph, groups[k], groups[k + 1]) for k in range(0, len(groups), 2)]
    slack = total - math.fsum(terms)
    return AdditivityReport(
        ok=slack >= -INEQUALITY_SLACK, total=total, terms=terms, slack=slack
    )


def check_separation(graph: nx.Graph, groups: Sequence[frozenset]) -> None:
    for b in range(1, len(groups) - 1):
        remaining = graph.subgraph(set(graph.nodes) - groups[b])
        for a in range(b):
            for c in range(b + 1, len(groups)):
                if _joined(remaining, groups[a], groups[c]):
                    raise SeparationViolatedError(
                        f"set {b + 1} does not separate set {a + 1} from set {c + 1}",
                        hypothesis="separation",
                        witness=(a + 1, b + 1, c + 1),
                    )


def parabolicity_growth(
    phi: PlanarEmbedding, levels: int, *, base: float = 1.0
) -> GrowthReport:
    """
    Vertex extremal length from the vertices in ``|z| <= base`` to the rings at
    radii ``base * 2^k`` for ``k = 1..levels``.

    The ring at radius ``rho`` is the set of vertices with ``|z| >= rho`` adjacent to
    a vertex with ``|z| < rho``; every path from the center outward passes through
    it. Consecutive pairs of rings bound disjoint annuli whose extremal lengths add up
    to a lower bound for each level.

    :raises CheckFailedError: if the table decreases or a level falls below its
        lower bound.
    """
    if levels < 1:
        raise DcglabApiError("at least one level is needed")
    if not base > 0:
        raise DcglabApiError("base radius must be positive")

    T = phi.triangulation
    graph = T.vertex_graph()
    center = frozenset(v for v in T.vertices if abs(phi[v]) <= base)
    if not center:
        raise DcglabApiError(f"no vertex lies within |z| <= {base!r}")

    sets = [center]
    for k in range(1, levels + 1):
        radius = base * 2**k
        ring = frozenset(
            v
            for v in T.vertices
            if abs(phi[v]) >= radius
            and any(abs(phi[w]) < radius for w in T.neighbors[v])
        )
        if not ring:
            raise DcglabApiError(f"the embedding does not reach radius {radius!r}")
        if any(ring & earlier for earlier in sets):
            raise DcglabApiError(f"the ring at radius {radius!r} meets an inner ring")
        sets.append(ring)

    check_separation(graph, sets)

    rows = []
    pair_terms: List[float] = []
    for k in range(1, levels + 1):
        value = vel(graph, center, sets[k])
        if k % 2 == 1:
            pair_terms.append(value if k == 1 else vel(graph, sets[k - 1], sets[k]))

        lower_bound = math.fsum(pair_terms)
        if value < lower_bound - INEQUALITY_SLACK:
            raise CheckFailedError(
                f"extremal length {value!r} at level {k} is below the sum "
                + f"{lower_bound!r} over disjoint annuli",
                margin=value - lower_bound,
            )

        rows.append(
            GrowthRow(
                level=k,
                radius=base * 2**k,
                ring_size=len(sets[k]),
                vel=value,
                lower_bound=lower_bound,
            )
        )

    report = GrowthReport(base=base, rows=rows)
    if not report.nondecreasing:
        raise CheckFailedError("extremal length decreased between levels")

    return report


def doubling_subannulus(
    inner: Sequence[complex], outer: Sequence[complex]
) -> Optional[float]:
    """
    For the region between polygon ``inner`` (around the origin) and polygon
    ``outer``, return ``r`` such that ``r < |z| < 2r`` lies in the region, or
    ``None``. ``r`` is the largest ``|z|`` over ``inner``.
    """
    if not point_in_polygon(0j, inner):
        raise DcglabApiError("the inner polygon must contain the origin")

    r = max(abs(z) for z in inner)
    if 2 * r <= distance_to_polygon(0j, outer):
        return r
    return None


def modulus_doubling_check(
    inner: Sequence[complex],
    outer: Sequence[complex],
    modulus: float,
    *,
    threshold: float = DOUBLING_THRESHOLD,
) -> Optional[float]:
    """
    An annulus of modulus at least ``threshold`` around the origin must contain a
    round annulus ``r < |z| < 2r``.

    :raises CheckFailedError: if the modulus reaches the threshold but no such
        subannulus is found.
    """
    r = doubling_subannulus(inner, outer)
    if modulus >= threshold and r is None:
        raise CheckFailedError(
            f"modulus {modulus!r} >= {threshold!r} but no doubling subannulus exists"
        )
    return r


def _solve(
    problem: ExtremalLengthProblem, max_constraints: int, debug: bool
) -> ModulusSolution:
    graph = problem.graph
    if problem.mode == "vertex":
        variables: List = sorted(graph.nodes)
        scale = np.ones(len(variables))
    else:
        variables = sorted(edge_key(i, j) for i, j in graph.edges)
        scale = np.sqrt([graph.edges[e]["mu"] for e in variables])

    position = {x: k for k, x in enumerate(variables)}
    debugger = Debugger("modulus") if debug else None

    # The first round measures paths by their number of vertices (or edges).
    values = {x: 1.0 for x in variables}
    paths: List[Path] = []
    seen: Set[Path] = set()
    rows: List[np.ndarray] = []
    solution = np.zeros(len(variables))
    separation = 0.0
    round_number = 0
    while True:
        candidates = _shortest_paths(problem, values)
        if round_number > 0:
            separation = min(value for value, _ in candidates)
        violated = [
            path
            for value, path in candidates
            if (round_number == 0 or value < ADMISSIBLE_LENGTH) and path not in seen
        ]
        if round_number > 0 and separation >= ADMISSIBLE_LENGTH:
            break
        if not violated:
            # Violated paths are all collected already; only rounding is left.
            break

        for path in violated[:PATHS_PER_ROUND]:
            if len(paths) >= max_constraints:
                best = _rescaled(problem, variables, solution, separation, paths)
                raise IterationLimitError(
                    f"more than {max_constraints} path constraints needed",
                    best=best,
                )

            seen.add(path)
            paths.append(path)
            row = np.zeros(len(variables))
            for x in _path_variables(problem, path):
                row[position[x]] = 1.0
            rows.append(row / scale)

        y = _least_distance(np.array(rows))
        solution = y / scale
        values = {x: float(solution[k]) for k, x in enumerate(variables)}
        round_number += 1
        if debugger is not None:
            debugger.step(
                f"round {round_number}",
                constraints=len(paths),
                objective=float(y @ y),
                separation=separation,
            )

    objective = float(np.sum(scale**2 * solution**2))
    active = [
        path
        for path in paths
        if abs(sum(values[x] for x in _path_variables(problem, path)) - 1) <= 1e-6
    ]
    gap = objective * (1 / separation**2 - 1) if separation > 0 else math.inf
    return ModulusSolution(
        mode=problem.mode,
        values=values,
        objective=objective,
        paths=paths,
        active=active,
        separation=separation,
        gap=max(gap, 0.0),
    )


def _rescaled(
    problem: ExtremalLengthProblem,
    variables: List,
    solution: np.ndarray,
    separation: float,
    paths: List[Path],
) -> Optional[ModulusSolution]:
    if separation <= 0:
        return None

    rescaled = solution / separation
    if problem.mode == "vertex":
        objective = float(np.sum(rescaled**2))
    else:
        weights = np.array([problem.graph.edges[e]["mu"] for e in variables])
        objective = float(np.sum(weights * rescaled**2))
    return ModulusSolution(
        mode=problem.mode,
        values={x: float(rescaled[k]) for k, x in enumerate(variables)},
        objective=objective,
        paths=list(paths),
        active=[],
        separation=1.0,
        gap=math.nan,
    )


def _least_distance(G: np.ndarray) -> np.ndarray:
    """
    The shortest ``x`` with ``G x >= 1``, by the reduction of the least-distance
    program to nonnegative least squares.
    """
    k, n = G.shape
    E = np.vstack([G.T, np.ones((1, k))])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    try:
        w, _ = scipy.optimize.nnls(E, f, maxiter=50 * (n + k))
    except RuntimeError as e:
        raise NumericalFailureError(f"nonnegative least squares failed: {e}") from e

    r = E @ w - f
    if abs(r[-1]) < 1e-14:
        raise NumericalFailureError("the least-distance subproblem is infeasible")

    return -r[:n] / r[-1]


def _shortest_paths(
    problem: ExtremalLengthProblem, values: Dict
) -> List[Tuple[float, Path]]:
    if problem.mode == "vertex":
        return _shortest_vertex_paths(
            problem.graph, problem.sources, problem.targets, values
        )
    else:
        return _shortest_edge_paths(
            problem.graph, problem.sources, problem.targets, values
        )


def _shortest_vertex_paths(
    graph: nx.Graph, sources: Set[int], targets: Set[int], eta: Dict[int, float]
) -> List[Tuple[float, Path]]:
    """
    For each source, its shortest path to ``targets`` when each vertex costs
    ``eta``, endpoints included. Sorted by length, then lexicographically.
    """
    # Entering a vertex pays its cost; the sink pays for the target it enters.
    reverse = nx.DiGraph()
    reverse.add_node(_SINK)
    reverse.add_nodes_from(sorted(graph.nodes))
    for b in sorted(targets):
        reverse.add_edge(_SINK, b, cost=eta[b])
    for i, j in sorted(edge_key(i, j) for i, j in graph.edges):
        reverse.add_edge(i, j, cost=eta[j])
        reverse.add_edge(j, i, cost=eta[i])

    return _paths_from_sink(reverse, sources)


def _shortest_edge_paths(
    graph: nx.Graph, sources: Set[int], targets: Set[int], m: Dict[Edge, float]
) -> List[Tuple[float, Path]]:
    reverse = nx.Graph()
    reverse.add_node(_SINK)
    reverse.add_nodes_from(sorted(graph.nodes))
    for b in sorted(targets):
        reverse.add_edge(_SINK, b, cost=0.0)
    for e in sorted(edge_key(i, j) for i, j in graph.edges):
        reverse.add_edge(*e, cost=m[e])

    return _paths_from_sink(reverse, sources)


def _paths_from_sink(
    reverse: Union[nx.Graph, nx.DiGraph], sources: Set[int]
) -> List[Tuple[float, Path]]:
    distances, routes = nx.single_source_dijkstra(reverse, _SINK, weight="cost")
    found = []
    for a in sorted(sources):
        if a in distances:
            path = tuple(reversed(routes[a][1:]))
            found.append((float(distances[a]), path))

    found.sort()
    return found


def _path_variables(problem: ExtremalLengthProblem, path: Path) -> List:
    if problem.mode == "vertex":
        return list(path)
    return [edge_key(i, j) for i, j in zip(path, path[1:])]


def _joined(graph: nx.Graph, first: Iterable[int], second: Iterable[int]) -> bool:
    second = set(second)
    for component in nx.connected_components(graph):
        if component & second and any(v in component for v in first):
            return True
    return False
