"""
Hyperbolic discrete conformality in the Poincaré disk model.

Two PH metrics are discretely conformal with factor ``u`` when, for every edge,
``sinh(l2_ij / 2) = exp((u_i + u_j) / 2) * sinh(l_ij / 2)``. This is the direction
in which ``u_h = u + ln((1 - |z|^2) / (1 - |z'|^2))`` converts the Euclidean factor
of the underlying straight-line embeddings.
"""
import math
from typing import Callable, List, Mapping, Optional, Tuple

import numpy as np
from attr import attrs

from .complex import (
    Edge,
    PlanarEmbedding,
    Triangulation,
    edge_key,
    one_ring,
)
from .exceptions import (
    CheckFailedError,
    ConditionViolatedError,
    DcglabApiError,
    HypothesisViolatedError,
    NotConformalPairError,
    NumericalFailureError,
    OutsideDiskError,
    ViolatedTriangleInequalityError,
)
from .metric import (
    CONFORMAL_RESIDUAL,
    ConformalFactor,
    PLMetric,
    check_factor,
    corner_angles,
    fit_edge_sums,
    recover_conformal_factor,
)
from .predicates import incircle

# Allowed deviation of the induced turn sum from 2*pi.
TURN_SUM_TOLERANCE = 1e-8


class DiskEmbedding(PlanarEmbedding):
    """
    Vertex positions strictly inside the unit disk, read as points of the Poincaré
    model.
    """

    model = "poincare"

    def __init__(self, triangulation, positions, *, validate: bool = True) -> None:
        super().__init__(triangulation, positions, validate=False)
        for v in triangulation.vertices:
            if abs(self.positions[v]) >= 1:
                raise OutsideDiskError(f"vertex {v} lies outside the unit disk")

        if validate:
            self.check_faces()


class PHMetric:
    """
    Positive edge lengths making every face a hyperbolic triangle.
    """

    def __init__(
        self,
        triangulation: Triangulation,
        lengths: Mapping[Edge, float],
        *,
        validate: bool = True,
    ) -> None:
        self.triangulation = triangulation
        self.lengths = {edge_key(i, j): float(v) for (i, j), v in lengths.items()}
        for e in triangulation.edges:
            value = self.lengths.get(e)
            if value is None or not math.isfinite(value) or value <= 0:
                raise DcglabApiError(f"edge {e} has no positive length")

        if validate:
            for a, b, c in triangulation.faces:
                x, y, z = self[b, c], self[c, a], self[a, b]
                if x >= y + z or y >= z + x or z >= x + y:
                    raise ViolatedTriangleInequalityError(
                        f"face {(a, b, c)} violates the triangle inequality",
                        face=(a, b, c),
                        metric=self,
                    )

    def __getitem__(self, edge: Tuple[int, int]) -> float:
        return self.lengths[edge_key(*edge)]

    def __repr__(self) -> str:
        return f"PHMetric({self.triangulation!r})"


@attrs(auto_attribs=True, frozen=True)
class HyperbolicConformalFit:
    # None when no vertex function explains the two metrics.
    u: Optional[ConformalFactor]
    # Largest per-edge misfit, measured in log-sinh space.
    residual: float


@attrs(auto_attribs=True, frozen=True)
class InducedHyperbolicEmbedding:
    center: int
    neighbors: Tuple[int, ...]
    # Tangent vectors at the center pointing along the geodesics to the neighbors.
    tangents: Tuple[complex, ...]
    turns: Tuple[float, ...]

    @property
    def turn_sum(self) -> float:
        return math.fsum(self.turns)


@attrs(auto_attribs=True, frozen=True)
class HyperbolicDelaunayReport:
    is_delaunay: bool
    # The interior edge and the vertex that lies inside the opposite circumdisk.
    witness: Optional[Tuple[Edge, int]]


@attrs(auto_attribs=True, frozen=True)
class HyperbolicMaxPrincipleReport:
    ok: bool
    u_h: ConformalFactor
    witness: Optional[int]
    margin: float


def hyp_distance(z1: complex, z2: complex) -> float:
    """
    Hyperbolic distance in the Poincaré disk, via
    ``sinh(d / 2) = |z1 - z2| / sqrt((1 - |z1|^2)(1 - |z2|^2))``.
    """
    _check_inside(z1)
    _check_inside(z2)
    ratio = abs(z1 - z2) / math.sqrt((1 - abs(z1) ** 2) * (1 - abs(z2) ** 2))
    return 2 * math.asinh(ratio)


def disk_automorphism(a: complex, theta: float = 0.0) -> Callable:
    """
    The hyperbolic isometry ``z -> exp(i*theta) (z - a) / (1 - conj(a) z)``, which
    sends ``a`` to the origin. Works on scalars and numpy arrays.
    """
    _check_inside(a)
    rotation = complex(math.cos(theta), math.sin(theta))

    def automorphism(z):
        return rotation * (z - a) / (1 - np.conj(a) * z)

    return automorphism


def ph_from_disk_embedding(phi: PlanarEmbedding) -> PHMetric:
    """
    :raises OutsideDiskError: if a vertex is not strictly inside the unit disk.
    :raises DegenerateFaceError: if a face realizes with zero area.
    """
    if not isinstance(phi, DiskEmbedding):
        phi = DiskEmbedding(phi.triangulation, phi.positions)
    else:
        phi.check_faces()

    return PHMetric(
        phi.triangulation,
        {(i, j): hyp_distance(phi[i], phi[j]) for i, j in phi.triangulation.edges},
    )


def hyp_conformality_check(
    l_h: PHMetric, l_h2: PHMetric, *, tolerance: float = CONFORMAL_RESIDUAL
) -> HyperbolicConformalFit:
    """
    Find ``u`` with ``l_h2 = u *h l_h``, if one exists within ``tolerance``.
    """
    T = l_h.triangulation
    if T.edges != l_h2.triangulation.edges:
        raise DcglabApiError("the two metrics live on different complexes")

    targets = {
        (i, j): 2 * (_log_sinh_half(l_h2[i, j]) - _log_sinh_half(l_h[i, j]))
        for i, j in T.edges
    }
    fit = fit_edge_sums(T, targets)
    residual = fit.residual / 2
    return HyperbolicConformalFit(
        u=fit.u if residual <= tolerance else None, residual=residual
    )


def convert_factor_euclidean_to_hyperbolic(
    u: Mapping[int, float], phi: PlanarEmbedding, phi2: PlanarEmbedding
) -> ConformalFactor:
    T = phi.triangulation
    check_factor(T, u)
    return {v: u[v] + _disk_log_ratio(phi[v], phi2[v]) for v in T.vertices}


def convert_factor_hyperbolic_to_euclidean(
    u_h: Mapping[int, float], phi: PlanarEmbedding, phi2: PlanarEmbedding
) -> ConformalFactor:
    T = phi.triangulation
    check_factor(T, u_h)
    return {v: u_h[v] - _disk_log_ratio(phi[v], phi2[v]) for v in T.vertices}


def induced_hyp_embedding(
    phi: PlanarEmbedding, i: int, epsilon: float
) -> InducedHyperbolicEmbedding:
    """
    Check that the straight-line 1-ring of ``i`` induces a hyperbolic geodesic
    embedding with the same vertices.

    Every spoke must satisfy ``l_ij <= (1 - |phi(i)|^2) sin(epsilon)``. The tangent
    directions at ``phi(i)`` of the geodesics to the neighbors must then turn
    counterclockwise by less than pi at each step and once around in total.

    :raises ConditionViolatedError: listing the spokes that are too long.
    :raises NumericalFailureError: if the turns do not add up to 2*pi.
    """
    T = phi.triangulation
    ring = one_ring(T, i)
    if not ring.is_disk:
        raise DcglabApiError(f"the 1-ring of vertex {i} is not a disk")

    fan = Triangulation([T.faces[f] for f in ring.faces])
    fan_metric = PLMetric.from_embedding(phi.restricted(fan))
    min_angle = float(np.min(corner_angles(fan_metric).angles))
    if min_angle < epsilon:
        raise DcglabApiError(
            f"corner angle {min_angle!r} in the 1-ring of {i} is below epsilon"
        )

    z0 = phi[i]
    bound = (1 - abs(z0) ** 2) * math.sin(epsilon)
    too_long = [
        edge_key(i, j) for j in ring.neighbors if abs(phi[j] - z0) > bound
    ]
    if too_long:
        raise ConditionViolatedError(
            f"{len(too_long)} spoke(s) at vertex {i} exceed {bound!r}", spokes=too_long
        )

    for j in (i,) + ring.neighbors:
        _check_inside(phi[j])

    to_origin = disk_automorphism(z0)
    tangents = []
    for j in ring.neighbors:
        w = to_origin(phi[j])
        # The isometry has a positive real derivative at z0, so directions carry over.
        length = hyp_distance(z0, phi[j]) * (1 - abs(z0) ** 2) / 2
        tangents.append(complex(w / abs(w) * length))

    m = len(tangents)
    turns = tuple(
        float(np.angle(tangents[(k + 1) % m] / tangents[k])) for k in range(m)
    )
    for k, turn in enumerate(turns):
        if not 0 < turn < math.pi:
            raise CheckFailedError(
                f"turn {k} at vertex {i} is {turn!r}, outside (0, pi)", margin=turn
            )

    result = InducedHyperbolicEmbedding(
        center=i, neighbors=ring.neighbors, tangents=tuple(tangents), turns=turns
    )
    if abs(result.turn_sum - 2 * math.pi) > TURN_SUM_TOLERANCE:
        raise NumericalFailureError(
            f"turns at vertex {i} sum to {result.turn_sum!r} instead of 2*pi"
        )

    return result


def hyp_delaunay_check(phi: PlanarEmbedding) -> HyperbolicDelaunayReport:
    """
    Empty-circumdisk test on every pair of adjacent faces. Hyperbolic disks of the
    Poincaré model are Euclidean disks, so the Euclidean incircle sign decides.
    """
    T = phi.triangulation
    for e in T.interior_edges:
        f1, f2 = T.edge_faces[e]
        for f, g in ((f1, f2), (f2, f1)):
            a, b, c = T.faces[f]
            (d,) = (k for k in T.faces[g] if k not in e)
            if incircle(phi[a], phi[b], phi[c], phi[d]) > 0:
                return HyperbolicDelaunayReport(is_delaunay=False, witness=(e, d))

    return HyperbolicDelaunayReport(is_delaunay=True, witness=None)


def hyp_max_principle_check(
    phi: PlanarEmbedding,
    phi2: PlanarEmbedding,
    *,
    vertex: Optional[int] = None,
    tolerance: float = 1e-10,
) -> HyperbolicMaxPrincipleReport:
    """
    For two Delaunay disk embeddings that are discretely conformal, a negative
    hyperbolic factor at an interior vertex must exceed the minimum over its
    neighbors (with ``vertex``) or over the boundary (without).
    """
    T = phi.triangulation
    for embedding in (phi, phi2):
        report = hyp_delaunay_check(embedding)
        if not report.is_delaunay:
            raise HypothesisViolatedError(
                f"embedding is not Delaunay at {report.witness}",
                hypothesis="delaunay",
                witness=report.witness,
            )

    fit = recover_conformal_factor(
        PLMetric.from_embedding(phi), PLMetric.from_embedding(phi2)
    )
    if fit.residual > CONFORMAL_RESIDUAL:
        raise NotConformalPairError(
            f"embeddings are not discretely conformal (residual {fit.residual!r})",
            residual=fit.residual,
        )

    u_h = convert_factor_euclidean_to_hyperbolic(fit.u, phi, phi2)
    if vertex is not None:
        if vertex not in T.interior_vertices:
            raise DcglabApiError(f"vertex {vertex} is not an interior vertex")
        checked: List[int] = [vertex]
    else:
        checked = sorted(T.interior_vertices)

    margin = math.inf
    witness = None
    for i in checked:
        if u_h[i] >= 0:
            continue

        if vertex is not None:
            floor = min(u_h[j] for j in T.neighbors[i])
        else:
            floor = min(u_h[j] for j in T.boundary_vertices)

        if u_h[i] - floor < margin:
            margin = u_h[i] - floor
            if margin <= -tolerance:
                witness = i

    return HyperbolicMaxPrincipleReport(
        ok=witness is None, u_h=u_h, witness=witness, margin=margin
    )


def _log_sinh_half(length: float) -> float:
    return math.log(math.sinh(length / 2))


def _disk_log_ratio(z: complex, z2: complex) -> float:
    _check_inside(z)
    _check_inside(z2)
    return math.log((1 - abs(z) ** 2) / (1 - abs(z2) ** 2))


def _check_inside(z: complex) -> None:
    if not abs(z) < 1:
        raise OutsideDiskError(f"point {z!r} is not strictly inside the unit disk")
