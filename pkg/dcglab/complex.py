"""
Combinatorial triangulations of disk patches, 1-ring neighborhoods, subcomplexes and
the two mesh generators used throughout the test suites.
"""
import math
from functools import cached_property
from typing import (
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Mapping,
    Sequence,
    Set,
    Tuple,
    Union,
)

import networkx as nx
import numpy as np
from attr import attrs
from scipy.spatial import Delaunay, QhullError

from .exceptions import (
    DcglabApiError,
    DegenerateFaceError,
    DegenerateInputError,
    DisconnectedError,
    EmptySubcomplexError,
    FoldOverError,
    InconsistentOrientationError,
    NonManifoldError,
    NotADiskError,
)
from .predicates import incircle, orient2d

Edge = Tuple[int, int]
Face = Tuple[int, int, int]

# How many fresh samples `gen_random_delaunay_disk` draws before giving up.
MAX_SAMPLE_RETRIES = 16


def edge_key(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


def face_edges(face: Face) -> List[Edge]:
    a, b, c = face
    return [edge_key(a, b), edge_key(b, c), edge_key(c, a)]


def rotate_face(face: Face, first: int) -> Face:
    """
    Rotate ``face`` (preserving orientation) so that it starts with ``first``.
    """
    a, b, c = face
    if first == a:
        return (a, b, c)
    elif first == b:
        return (b, c, a)
    elif first == c:
        return (c, a, b)
    else:
        raise DcglabApiError(f"vertex {first} is not a corner of face {face}")


class Triangulation:
    """
    An oriented triangulated surface with boundary, given by its face list.

    Vertices are the integer labels that appear in some face. For complexes built
    from a mesh the labels are ``0..N-1``; subcomplexes keep the labels of their
    parent so that metrics and embeddings of the parent apply to them unchanged.
    """

    faces: Tuple[Face, ...]
    vertices: Tuple[int, ...]
    edges: Tuple[Edge, ...]
    edge_faces: Dict[Edge, Tuple[int, ...]]
    vertex_faces: Dict[int, Tuple[int, ...]]
    neighbors: Dict[int, FrozenSet[int]]
    boundary_edges: FrozenSet[Edge]
    interior_vertices: FrozenSet[int]
    boundary_vertices: FrozenSet[int]

    def __init__(self, faces: Iterable[Sequence[int]], *, require_disk: bool = True):
        self.faces = tuple(_normalize_face(face) for face in faces)
        if not self.faces:
            raise DcglabApiError("a triangulation needs at least one face")

        self.vertices = tuple(sorted({i for face in self.faces for i in face}))
        self.index = {v: k for k, v in enumerate(self.vertices)}
        self.n_labels = self.vertices[-1] + 1

        edge_faces: Dict[Edge, List[int]] = {}
        vertex_faces: Dict[int, List[int]] = {v: [] for v in self.vertices}
        for f, face in enumerate(self.faces):
            for i in face:
                vertex_faces[i].append(f)

            for e in face_edges(face):
                edge_faces.setdefault(e, []).append(f)
                if len(edge_faces[e]) > 2:
                    raise NonManifoldError(f"edge {e} belongs to more than two faces")

        directed: Dict[Edge, int] = {}
        for f, (a, b, c) in enumerate(self.faces):
            for i, j in ((a, b), (b, c), (c, a)):
                if (i, j) in directed:
                    raise InconsistentOrientationError(
                        f"faces {directed[(i, j)]} and {f} traverse edge {(i, j)} "
                        + "in the same direction",
                        edge=edge_key(i, j),
                    )
                directed[(i, j)] = f

        self.edges = tuple(sorted(edge_faces))
        self.edge_faces = {e: tuple(fs) for e, fs in edge_faces.items()}
        self.vertex_faces = {v: tuple(fs) for v, fs in vertex_faces.items()}
        self.boundary_edges = frozenset(
            e for e, fs in self.edge_faces.items() if len(fs) == 1
        )

        neighbors: Dict[int, Set[int]] = {v: set() for v in self.vertices}
        for i, j in self.edges:
            neighbors[i].add(j)
            neighbors[j].add(i)
        self.neighbors = {v: frozenset(ns) for v, ns in neighbors.items()}

        interior = set()
        for v in self.vertices:
            link = self._link(v)
            link_is_connected = nx.is_connected(link)
            if require_disk and not link_is_connected:
                raise NonManifoldError(
                    f"the link of vertex {v} is not a single cycle or a single path"
                )

            if link_is_connected and all(d == 2 for _, d in link.degree()):
                interior.add(v)

        self.interior_vertices = frozenset(interior)
        self.boundary_vertices = frozenset(self.vertices) - self.interior_vertices

        if require_disk:
            if not nx.is_connected(self.face_graph()):
                raise DisconnectedError("the face adjacency graph is not connected")

            if self.euler_characteristic != 1 or not self.boundary_edges:
                raise NotADiskError(
                    "triangulation is not a disk "
                    + f"(Euler characteristic {self.euler_characteristic})"
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Triangulation):
            return NotImplemented

        return sorted(self.faces) == sorted(other.faces)

    def __repr__(self) -> str:
        return (
            f"Triangulation(vertices={len(self.vertices)}, edges={len(self.edges)}, "
            + f"faces={len(self.faces)})"
        )

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.faces)

    @property
    def interior_edges(self) -> List[Edge]:
        return [e for e in self.edges if e not in self.boundary_edges]

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def face_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(len(self.faces)))
        for fs in self.edge_faces.values():
            if len(fs) == 2:
                graph.add_edge(*fs)
        return graph

    def vertex_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.edges)
        return graph

    @cached_property
    def edge_corners(self) -> Dict[Edge, Tuple[Tuple[int, int], ...]]:
        """
        For each edge, the ``(face, corner)`` positions of the corners opposite it.
        """
        corners: Dict[Edge, List[Tuple[int, int]]] = {e: [] for e in self.edges}
        for f, face in enumerate(self.faces):
            for c in range(3):
                opposite = edge_key(face[(c + 1) % 3], face[(c + 2) % 3])
                corners[opposite].append((f, c))
        return {e: tuple(cs) for e, cs in corners.items()}

    def opposite_vertices(self, edge: Edge) -> List[int]:
        """
        The vertices opposite ``edge`` in its one or two faces.
        """
        i, j = edge
        return [
            next(k for k in self.faces[f] if k != i and k != j)
            for f in self.edge_faces[edge]
        ]

    def boundary_cycles(self) -> List[List[int]]:
        """
        Boundary vertices grouped into cycles, each traversed with the surface on the
        left (counterclockwise for the outer boundary of a positively oriented patch).
        """
        successors: Dict[int, List[int]] = {}
        for face in self.faces:
            a, b, c = face
            for i, j in ((a, b), (b, c), (c, a)):
                if edge_key(i, j) in self.boundary_edges:
                    successors.setdefault(i, []).append(j)

        for targets in successors.values():
            targets.sort()

        cycles = []
        while successors:
            start = min(successors)
            cycle = [start]
            current = start
            while True:
                following = successors[current].pop(0)
                if not successors[current]:
                    del successors[current]

                if following == start:
                    break

                cycle.append(following)
                current = following
            cycles.append(cycle)

        return cycles

    def boundary_cycle(self) -> List[int]:
        cycles = self.boundary_cycles()
        if len(cycles) != 1:
            raise NotADiskError(f"expected one boundary cycle, found {len(cycles)}")

        return cycles[0]

    def _link(self, v: int) -> nx.Graph:
        link = nx.Graph()
        for f in self.vertex_faces[v]:
            a, b = (k for k in self.faces[f] if k != v)
            link.add_edge(a, b)
        return link


@attrs(auto_attribs=True, frozen=True)
class VertexSubset:
    members: FrozenSet[int]
    interior: FrozenSet[int]
    boundary: FrozenSet[int]


@attrs(auto_attribs=True, frozen=True)
class OneRing:
    center: int
    # Counterclockwise order. For a disk the last neighbor is followed by the first.
    neighbors: Tuple[int, ...]
    faces: Tuple[int, ...]
    is_disk: bool

    @property
    def spokes(self) -> List[Edge]:
        return [edge_key(self.center, j) for j in self.neighbors]


def build_triangulation(faces: Iterable[Sequence[int]]) -> Triangulation:
    """
    Build and validate a disk patch from its oriented face list.

    :param faces: Vertex triples, each in counterclockwise order.
    :raises NonManifoldError: if an edge lies in three or more faces, or a vertex link
        is not a single cycle or path.
    :raises DisconnectedError: if the faces do not form one connected surface.
    :raises InconsistentOrientationError: if two faces disagree on orientation.
    :raises NotADiskError: if the surface is a manifold but not a disk.
    """
    return Triangulation(faces)


def classify_subset(T: Triangulation, V0: Iterable[int]) -> VertexSubset:
    members = frozenset(V0)
    unknown = members - set(T.vertices)
    if unknown:
        raise DcglabApiError(f"vertices not in the triangulation: {sorted(unknown)}")

    interior = frozenset(
        i for i in members if i in T.interior_vertices and T.neighbors[i] <= members
    )
    return VertexSubset(members=members, interior=interior, boundary=members - interior)


def one_ring(T: Triangulation, i: int) -> OneRing:
    if i not in T.vertex_faces:
        raise DcglabApiError(f"vertex {i} is not in the triangulation")

    # Each face (i, a, b) sends a to b when walking counterclockwise around i.
    step: Dict[int, Tuple[int, int]] = {}
    for f in T.vertex_faces[i]:
        _, a, b = rotate_face(T.faces[f], i)
        step[a] = (b, f)

    targets = {b for b, _ in step.values()}
    starts = sorted(a for a in step if a not in targets) or [min(step)]

    neighbors: List[int] = []
    faces: List[int] = []
    for start in starts + sorted(step):
        if start not in step:
            continue

        current = start
        neighbors.append(current)
        while current in step:
            following, f = step.pop(current)
            faces.append(f)
            if following == start:
                break

            neighbors.append(following)
            current = following

    return OneRing(
        center=i,
        neighbors=tuple(neighbors),
        faces=tuple(faces),
        is_disk=i in T.interior_vertices,
    )


def subcomplex_generated_by(T: Triangulation, V0: Iterable[int]) -> Triangulation:
    """
    The complex made of the faces of ``T`` whose three corners all lie in ``V0``.

    The result keeps the vertex labels of ``T`` and need not be a disk.
    """
    members = set(V0)
    faces = [face for face in T.faces if all(i in members for i in face)]
    if not faces:
        raise EmptySubcomplexError("no face has all three vertices in the given set")

    return Triangulation(faces, require_disk=False)


class PlanarEmbedding:
    """
    Vertex positions of a triangulation as complex numbers.

    Positions are stored in an array indexed by vertex label. Faces must realize with
    positive signed area unless ``validate=False`` is passed.
    """

    model = "euclidean"

    def __init__(
        self,
        triangulation: Triangulation,
        positions: Union[Mapping[int, complex], Sequence[complex], np.ndarray],
        *,
        validate: bool = True,
    ) -> None:
        self.triangulation = triangulation
        array = np.full(triangulation.n_labels, np.nan, dtype=complex)
        if isinstance(positions, Mapping):
            for v in triangulation.vertices:
                array[v] = positions[v]
        else:
            given = np.asarray(positions, dtype=complex)
            if len(given) < triangulation.n_labels:
                raise DcglabApiError("fewer positions than vertices")

            array[list(triangulation.vertices)] = given[list(triangulation.vertices)]

        if not np.all(np.isfinite(array[list(triangulation.vertices)])):
            raise DcglabApiError("vertex positions must be finite")

        self.positions = array
        if validate:
            self.check_faces()

    def __getitem__(self, i: int) -> complex:
        return complex(self.positions[i])

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.triangulation!r})"

    def face_positions(self) -> np.ndarray:
        return self.positions[np.asarray(self.triangulation.faces)]

    def signed_areas(self) -> np.ndarray:
        z = self.face_positions()
        return 0.5 * ((z[:, 1] - z[:, 0]).conjugate() * (z[:, 2] - z[:, 0])).imag

    def check_faces(self) -> None:
        """
        :raises DegenerateFaceError: if a face realizes with zero area.
        :raises FoldOverError: if a face realizes with negative area.
        """
        for face in self.triangulation.faces:
            side = orient2d(*(self[i] for i in face))
            if side == 0:
                raise DegenerateFaceError(f"face {face} has zero area", face=face)
            elif side < 0:
                raise FoldOverError(f"face {face} is folded over", face=face)

    def transformed(
        self, f: Callable[[np.ndarray], np.ndarray], *, validate: bool = True
    ) -> "PlanarEmbedding":
        """
        Apply a vectorized map of the plane to every position.
        """
        vertices = list(self.triangulation.vertices)
        array = np.full_like(self.positions, np.nan)
        array[vertices] = f(self.positions[vertices])
        return type(self)(self.triangulation, array, validate=validate)

    def restricted(self, T0: Triangulation) -> "PlanarEmbedding":
        return type(self)(T0, self.positions, validate=False)

    def boundary_polygon(self) -> List[complex]:
        return [self[i] for i in self.triangulation.boundary_cycle()]


def gen_hex_patch(radius: int) -> Tuple[Triangulation, PlanarEmbedding]:
    """
    The regular triangular lattice with unit edges, cut off at combinatorial distance
    ``radius`` from the center vertex 0. Vertices are numbered ring by ring,
    counterclockwise from the positive real axis.
    """
    if radius < 1:
        raise DcglabApiError("radius must be at least 1")

    omega = complex(0.5, math.sqrt(3) / 2)

    def ring(q: int, r: int) -> int:
        return max(abs(q), abs(r), abs(q + r))

    def angle(q: int, r: int) -> float:
        z = q + r * omega
        return math.atan2(z.imag, z.real) % (2 * math.pi)

    lattice = [
        (q, r)
        for q in range(-radius, radius + 1)
        for r in range(-radius, radius + 1)
        if ring(q, r) <= radius
    ]
    lattice.sort(key=lambda qr: (ring(*qr), angle(*qr)))
    label = {qr: k for k, qr in enumerate(lattice)}

    faces = []
    for q, r in lattice:
        up = ((q, r), (q + 1, r), (q, r + 1))
        down = ((q, r), (q, r + 1), (q - 1, r + 1))
        for triple in (up, down):
            if all(qr in label for qr in triple):
                faces.append(tuple(label[qr] for qr in triple))

    T = build_triangulation(faces)
    positions = [q + r * omega for q, r in lattice]
    return T, PlanarEmbedding(T, positions)


def gen_random_delaunay_disk(
    n: int, seed: int, *, max_retries: int = MAX_SAMPLE_RETRIES
) -> Tuple[Triangulation, PlanarEmbedding]:
    """
    The Delaunay triangulation of ``n`` points drawn uniformly from the unit disk.

    Points come from numpy's PCG64 generator seeded with ``seed``, so the output is a
    pure function of ``(n, seed)``. Qhull supplies the initial triangulation, which
    is then flipped until the exact incircle predicate accepts every interior edge.
    """
    if n < 3:
        raise DcglabApiError("at least three points are needed")

    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        radii = np.sqrt(rng.random(n))
        angles = 2 * np.pi * rng.random(n)
        points = radii * np.exp(1j * angles)
        if _is_degenerate_sample(points):
            continue

        try:
            qhull = Delaunay(np.column_stack([points.real, points.imag]))
        except QhullError:
            continue

        if len(qhull.coplanar) > 0:
            continue

        faces = []
        for simplex in qhull.simplices:
            a, b, c = (int(k) for k in simplex)
            if orient2d(points[a], points[b], points[c]) < 0:
                b, c = c, b
            faces.append([a, b, c])

        _legalize(faces, points)
        canonical = sorted(rotate_face(tuple(face), min(face)) for face in faces)
        T = build_triangulation(canonical)
        return T, PlanarEmbedding(T, points)

    raise DegenerateInputError(
        f"could not sample {n} points in general position after {max_retries} tries"
    )


def _is_degenerate_sample(points: np.ndarray) -> bool:
    if len(np.unique(points)) < len(points):
        return True

    a, b = points[0], points[1]
    return all(orient2d(a, b, c) == 0 for c in points[2:])


def _legalize(faces: List[List[int]], points: np.ndarray) -> None:
    """
    Lawson edge flips, in place, until every interior edge is locally Delaunay.
    """
    owner: Dict[Edge, int] = {}
    for f, (a, b, c) in enumerate(faces):
        owner[(a, b)] = f
        owner[(b, c)] = f
        owner[(c, a)] = f

    # Interior edges still to be checked; only edges next to a flip are pushed again.
    stack = sorted(
        ((a, b) for a, b in owner if a < b and (b, a) in owner), reverse=True
    )
    while stack:
        a, b = stack.pop()
        if (a, b) not in owner or (b, a) not in owner:
            continue

        f, g = owner[(a, b)], owner[(b, a)]
        c = next(k for k in faces[f] if k != a and k != b)
        d = next(k for k in faces[g] if k != a and k != b)
        if incircle(points[a], points[b], points[c], points[d]) <= 0:
            continue

        for edge in ((a, b), (b, c), (c, a), (b, a), (a, d), (d, b)):
            del owner[edge]
        faces[f] = [a, d, c]
        faces[g] = [d, b, c]
        for edge in ((a, d), (d, c), (c, a)):
            owner[edge] = f
        for edge in ((d, b), (b, c), (c, d)):
            owner[edge] = g

        for i, j in ((a, d), (d, b), (b, c), (c, a)):
            if (j, i) in owner:
                stack.append(edge_key(i, j))


def _normalize_face(face: Sequence[int]) -> Face:
    if len(face) != 3:
        raise DcglabApiError(f"face {face!r} does not have three vertices")

    for i in face:
        if isinstance(i, bool) or not isinstance(i, (int, np.integer)):
            raise DcglabApiError(f"vertex index {i!r} is not an integer")
        if i < 0:
            raise DcglabApiError(f"vertex index {i} is negative")

    a, b, c = (int(i) for i in face)
    if len({a, b, c}) != 3:
        raise DcglabApiError(f"face {face!r} repeats a vertex")

    return (a, b, c)
