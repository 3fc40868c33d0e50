"""
Piecewise-linear metrics on a triangulation: corner angles, curvature, the Delaunay
and nondegeneracy predicates, discrete conformal change, cotangent weights and the
curvature differential.
"""
import enum
import math
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import scipy.sparse
from attr import attrs

from .complex import Edge, PlanarEmbedding, Triangulation, edge_key, one_ring
from .exceptions import (
    DcglabApiError,
    HypothesisViolatedError,
    NotConformalPairError,
    ViolatedTriangleInequalityError,
)

# Opposite-angle sums within this many radians of pi count as Delaunay.
DELAUNAY_SLACK = 1e-9
# Largest per-edge misfit accepted when recovering a conformal factor.
CONFORMAL_RESIDUAL = 1e-9
# Largest |K| at which a vertex still counts as flat.
FLATNESS_TOLERANCE = 1e-8

# A discrete conformal factor, or any other real function on the vertices.
ConformalFactor = Dict[int, float]


class PLMetric:
    """
    Positive edge lengths on a triangulation satisfying the strict triangle
    inequality in every face.
    """

    def __init__(
        self,
        triangulation: Triangulation,
        lengths: Mapping[Edge, float],
        *,
        validate: bool = True,
    ) -> None:
        self.triangulation = triangulation
        self.lengths: Dict[Edge, float] = {}
        for (i, j), value in lengths.items():
            self.lengths[edge_key(i, j)] = float(value)

        for e in triangulation.edges:
            if e not in self.lengths:
                raise DcglabApiError(f"no length given for edge {e}")

            value = self.lengths[e]
            if not math.isfinite(value) or value <= 0:
                raise DcglabApiError(f"length of edge {e} is not a positive number")

        if validate:
            violated = self.violated_faces()
            if violated:
                face = triangulation.faces[violated[0]]
                raise ViolatedTriangleInequalityError(
                    f"face {face} violates the triangle inequality",
                    face=face,
                    metric=self,
                )

    @classmethod
    def from_embedding(cls, phi: PlanarEmbedding) -> "PLMetric":
        return cls(
            phi.triangulation,
            {(i, j): abs(phi[i] - phi[j]) for i, j in phi.triangulation.edges},
        )

    def __getitem__(self, edge: Tuple[int, int]) -> float:
        return self.lengths[edge_key(*edge)]

    def __repr__(self) -> str:
        return f"PLMetric({self.triangulation!r})"

    def face_lengths(self) -> np.ndarray:
        """
        Array of shape ``(F, 3)`` whose column ``c`` holds the length of the side
        opposite corner ``c`` of each face.
        """
        lengths = self.lengths
        return np.array(
            [
                [
                    lengths[edge_key(b, c)],
                    lengths[edge_key(c, a)],
                    lengths[edge_key(a, b)],
                ]
                for a, b, c in self.triangulation.faces
            ]
        )

    def violated_faces(self) -> List[int]:
        x = self.face_lengths()
        excess = x.sum(axis=1, keepdims=True) - 2 * x
        return [int(f) for f in np.flatnonzero(np.any(excess <= 0, axis=1))]

    def scaled(self, factor: float) -> "PLMetric":
        return PLMetric(
            self.triangulation, {e: factor * v for e, v in self.lengths.items()}
        )


class DelaunayClass(enum.Enum):
    DELAUNAY = "Delaunay"
    UNIFORMLY_DELAUNAY = "UniformlyDelaunay"
    NOT_DELAUNAY = "NotDelaunay"


@attrs(auto_attribs=True, frozen=True)
class CornerAngles:
    triangulation: Triangulation
    # Shape (F, 3), aligned with the corners of `triangulation.faces`.
    angles: np.ndarray

    def at(self, face: int, vertex: int) -> float:
        return float(self.angles[face, self.triangulation.faces[face].index(vertex)])

    def vertex_sums(self) -> np.ndarray:
        """
        Total angle at each vertex, indexed by vertex label.
        """
        return np.bincount(
            np.asarray(self.triangulation.faces).ravel(),
            weights=self.angles.ravel(),
            minlength=self.triangulation.n_labels,
        )

    def edge_angle_sums(self) -> Dict[Edge, float]:
        """
        Sum of the angles opposite each interior edge.
        """
        return {
            e: sum(self.angles[f, c] for f, c in corners)
            for e, corners in self.triangulation.edge_corners.items()
            if len(corners) == 2
        }


@attrs(auto_attribs=True, frozen=True)
class NondegeneracyReport:
    ok: bool
    epsilon: float
    min_angle: float
    face: int
    vertex: int


@attrs(auto_attribs=True, frozen=True)
class DelaunayReport:
    classification: DelaunayClass
    epsilon_star: float
    max_angle_sum: float
    witness: Optional[Edge]

    @property
    def is_delaunay(self) -> bool:
        return self.classification is not DelaunayClass.NOT_DELAUNAY

    def __str__(self) -> str:
        if self.classification is DelaunayClass.NOT_DELAUNAY:
            return f"NotDelaunay (edge {self.witness})"
        elif self.classification is DelaunayClass.DELAUNAY:
            return "Delaunay (boundary)"
        else:
            return f"UniformlyDelaunay, epsilon*={self.epsilon_star!r}"


@attrs(auto_attribs=True, frozen=True)
class Curvature:
    # K_i = 2*pi - (angle sum) at interior vertices.
    interior: Dict[int, float]
    # pi - (angle sum) at boundary vertices.
    boundary: Dict[int, float]

    def total(self) -> float:
        return math.fsum(self.interior.values()) + math.fsum(self.boundary.values())

    def max_abs(self) -> float:
        return max((abs(k) for k in self.interior.values()), default=0.0)


@attrs(auto_attribs=True, frozen=True)
class EdgeWeights:
    triangulation: Triangulation
    mu: Dict[Edge, float]

    def __getitem__(self, edge: Tuple[int, int]) -> float:
        return self.mu[edge_key(*edge)]

    def vertex_sums(self) -> Dict[int, float]:
        sums = {v: 0.0 for v in self.triangulation.vertices}
        for (i, j), value in self.mu.items():
            sums[i] += value
            sums[j] += value
        return sums

    def min_interior(self) -> Tuple[Optional[Edge], float]:
        interior = [
            (value, e)
            for e, value in self.mu.items()
            if e not in self.triangulation.boundary_edges
        ]
        if not interior:
            return None, math.inf

        value, e = min(interior)
        return e, value


@attrs(auto_attribs=True, frozen=True)
class CurvatureJacobian:
    # Rows are the interior vertices, columns all vertices, both in sorted order.
    matrix: scipy.sparse.csr_matrix
    rows: Tuple[int, ...]
    columns: Tuple[int, ...]

    def interior_block(self) -> scipy.sparse.csr_matrix:
        position = {v: k for k, v in enumerate(self.columns)}
        return self.matrix[:, [position[v] for v in self.rows]].tocsr()

    def entry(self, i: int, j: int) -> float:
        return float(self.matrix[self.rows.index(i), self.columns.index(j)])


@attrs(auto_attribs=True, frozen=True)
class ConformalFit:
    u: ConformalFactor
    residual: float


@attrs(auto_attribs=True, frozen=True)
class ConformalMaxPrincipleReport:
    ok: bool
    u: ConformalFactor
    # The vertex where the principle failed, if any.
    witness: Optional[int]
    margin: float


def corner_angles(l: PLMetric) -> CornerAngles:
    """
    Corner angles of every face, from the half-angle form of the law of cosines.

    :raises ViolatedTriangleInequalityError: if some face is not a Euclidean triangle.
    """
    violated = l.violated_faces()
    if violated:
        face = l.triangulation.faces[violated[0]]
        raise ViolatedTriangleInequalityError(
            f"face {face} violates the triangle inequality", face=face, metric=l
        )

    x = l.face_lengths()
    total = x.sum(axis=1, keepdims=True)
    # s - x for each side x, where s is the semi-perimeter.
    gap = (total - 2 * x) / 2
    s = total / 2
    others = np.roll(gap, -1, axis=1) * np.roll(gap, -2, axis=1)
    angles = 2 * np.arctan2(np.sqrt(others), np.sqrt(s * gap))
    return CornerAngles(triangulation=l.triangulation, angles=angles)


def validate_nondegeneracy(l: PLMetric, epsilon: float) -> NondegeneracyReport:
    """
    Whether every corner angle is at least ``epsilon``. The smallest corner is always
    reported.
    """
    if not 0 < epsilon <= math.pi / 3 + 1e-15:
        raise DcglabApiError("epsilon must lie in (0, pi/3]")

    angles = corner_angles(l).angles
    f, c = np.unravel_index(int(np.argmin(angles)), angles.shape)
    min_angle = float(angles[f, c])
    return NondegeneracyReport(
        ok=min_angle >= epsilon,
        epsilon=epsilon,
        min_angle=min_angle,
        face=int(f),
        vertex=l.triangulation.faces[f][c],
    )


def delaunay_check(l: PLMetric, *, slack: float = DELAUNAY_SLACK) -> DelaunayReport:
    """
    Classify ``l`` by its largest opposite-angle sum over interior edges.

    Sums within ``slack`` of pi are the cocircular boundary case and count as
    Delaunay but not uniformly Delaunay.
    """
    sums = corner_angles(l).edge_angle_sums()
    if not sums:
        return DelaunayReport(
            classification=DelaunayClass.UNIFORMLY_DELAUNAY,
            epsilon_star=math.pi,
            max_angle_sum=0.0,
            witness=None,
        )

    witness = max(sorted(sums), key=lambda e: sums[e])
    max_sum = sums[witness]
    if max_sum > math.pi + slack:
        classification = DelaunayClass.NOT_DELAUNAY
    elif max_sum >= math.pi - slack:
        classification = DelaunayClass.DELAUNAY
    else:
        classification = DelaunayClass.UNIFORMLY_DELAUNAY

    return DelaunayReport(
        classification=classification,
        epsilon_star=math.pi - max_sum,
        max_angle_sum=max_sum,
        witness=witness,
    )


def conformal_change(l: PLMetric, u: Mapping[int, float]) -> PLMetric:
    """
    The metric ``u*l`` with lengths ``exp((u_i + u_j) / 2) * l_ij``.

    :raises ViolatedTriangleInequalityError: if a face of the new metric is not a
        triangle. The new metric is attached to the exception as ``metric``.
    """
    check_factor(l.triangulation, u)
    changed = PLMetric(
        l.triangulation,
        {(i, j): math.exp((u[i] + u[j]) / 2) * v for (i, j), v in l.lengths.items()},
        validate=False,
    )
    violated = changed.violated_faces()
    if violated:
        face = l.triangulation.faces[violated[0]]
        raise ViolatedTriangleInequalityError(
            f"face {face} violates the triangle inequality after the conformal change",
            face=face,
            metric=changed,
        )

    return changed


def curvature(l: PLMetric) -> Curvature:
    T = l.triangulation
    sums = corner_angles(l).vertex_sums()
    return Curvature(
        interior={i: 2 * math.pi - float(sums[i]) for i in sorted(T.interior_vertices)},
        boundary={i: math.pi - float(sums[i]) for i in sorted(T.boundary_vertices)},
    )


def cot_weights(l: PLMetric) -> EdgeWeights:
    """
    Cotangent weights: half the sum of the cotangents of the angles opposite each
    edge. Boundary edges have a single opposite angle.
    """
    angles = corner_angles(l).angles
    cot = np.cos(angles) / np.sin(angles)
    mu = {
        e: 0.5 * sum(float(cot[f, c]) for f, c in corners)
        for e, corners in l.triangulation.edge_corners.items()
    }
    return EdgeWeights(triangulation=l.triangulation, mu=mu)


def curvature_jacobian(
    l: PLMetric, u: Optional[Mapping[int, float]] = None
) -> CurvatureJacobian:
    """
    Derivative of the interior curvatures with respect to the conformal factor at
    ``u``: ``-mu_ij(u)`` off the diagonal and ``sum_j mu_ij(u)`` on it.
    """
    T = l.triangulation
    changed = l if u is None else conformal_change(l, u)
    mu = cot_weights(changed).mu

    rows = tuple(sorted(T.interior_vertices))
    columns = T.vertices
    row_index = {v: k for k, v in enumerate(rows)}
    column_index = T.index

    I: List[int] = []
    J: List[int] = []
    S: List[float] = []
    for i in rows:
        diagonal = 0.0
        for j in sorted(T.neighbors[i]):
            weight = mu[edge_key(i, j)]
            I.append(row_index[i])
            J.append(column_index[j])
            S.append(-weight)
            diagonal += weight
        I.append(row_index[i])
        J.append(column_index[i])
        S.append(diagonal)

    matrix = scipy.sparse.csr_matrix((S, (I, J)), shape=(len(rows), len(columns)))
    return CurvatureJacobian(matrix=matrix, rows=rows, columns=columns)


def recover_conformal_factor(l: PLMetric, l2: PLMetric) -> ConformalFit:
    """
    Least-squares solution of ``u_i + u_j = 2 ln(l2_ij / l_ij)`` over all edges.

    The residual is the largest per-edge misfit of that equation.
    """
    T = l.triangulation
    if T.edges != l2.triangulation.edges:
        raise DcglabApiError("the two metrics live on different complexes")

    return fit_edge_sums(
        T, {(i, j): 2 * math.log(l2[i, j] / l[i, j]) for i, j in T.edges}
    )


def fit_edge_sums(T: Triangulation, targets: Mapping[Edge, float]) -> ConformalFit:
    """
    Least-squares vertex function with ``u_i + u_j`` close to ``targets[ij]``.

    The system has full column rank on any complex with a face, since a triangle is
    an odd cycle.
    """
    A = np.zeros((len(T.edges), len(T.vertices)))
    b = np.empty(len(T.edges))
    for row, (i, j) in enumerate(T.edges):
        A[row, T.index[i]] = 1.0
        A[row, T.index[j]] = 1.0
        b[row] = targets[(i, j)]

    solution, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.max(np.abs(A @ solution - b)))
    return ConformalFit(
        u={v: float(solution[T.index[v]]) for v in T.vertices}, residual=residual
    )


def conformal_max_principle_check(
    l: PLMetric,
    l2: PLMetric,
    *,
    vertex: Optional[int] = None,
    tolerance: float = 1e-10,
) -> ConformalMaxPrincipleReport:
    """
    Check the maximum principle for the conformal factor between two flat Delaunay
    metrics.

    With ``vertex`` given, ``u`` at that vertex must lie between its minimum and
    maximum over the neighbors. Without it, the extremes of ``u`` over all vertices
    must be attained on the boundary.
    """
    T = l.triangulation
    checked = [vertex] if vertex is not None else sorted(T.interior_vertices)
    for metric in (l, l2):
        report = delaunay_check(metric)
        if not report.is_delaunay:
            raise HypothesisViolatedError(
                f"metric is not Delaunay at edge {report.witness}",
                hypothesis="delaunay",
                witness=report.witness,
            )

        K = curvature(metric).interior
        for i in checked:
            if i not in K:
                raise DcglabApiError(f"vertex {i} is not an interior vertex")
            if abs(K[i]) > FLATNESS_TOLERANCE:
                raise HypothesisViolatedError(
                    f"metric is not flat at vertex {i} (K={K[i]!r})",
                    hypothesis="flat",
                    witness=i,
                )

    fit = recover_conformal_factor(l, l2)
    if fit.residual > CONFORMAL_RESIDUAL:
        raise NotConformalPairError(
            f"metrics are not discretely conformal (residual {fit.residual!r})",
            residual=fit.residual,
        )

    u = fit.u
    if vertex is not None:
        ring = one_ring(T, vertex).neighbors
        low = min(u[j] for j in ring)
        high = max(u[j] for j in ring)
        margin = min(u[vertex] - low, high - u[vertex])
        witness = vertex if margin < -tolerance else None
    else:
        boundary = [u[j] for j in T.boundary_vertices]
        low, high = min(boundary), max(boundary)
        margin = math.inf
        witness = None
        for i in checked:
            vertex_margin = min(u[i] - low, high - u[i])
            if vertex_margin < margin:
                margin = vertex_margin
                if vertex_margin < -tolerance:
                    witness = i

    return ConformalMaxPrincipleReport(
        ok=witness is None, u=u, witness=witness, margin=margin
    )


def check_factor(T: Triangulation, u: Mapping[int, float]) -> None:
    for v in T.vertices:
        if v not in u:
            raise DcglabApiError(f"conformal factor has no value at vertex {v}")
        if not math.isfinite(u[v]):
            raise DcglabApiError(f"conformal factor is not finite at vertex {v}")


def factor_array(T: Triangulation, u: Mapping[int, float]) -> np.ndarray:
    """
    ``u`` as an array indexed by vertex label, NaN at labels not in ``T``.
    """
    array = np.full(T.n_labels, np.nan)
    for v in T.vertices:
        array[v] = u[v]
    return array


def constant_factor(vertices: Iterable[int], value: float) -> ConformalFactor:
    return {v: float(value) for v in vertices}
