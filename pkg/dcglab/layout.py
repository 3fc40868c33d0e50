"""
Planar layouts of flat metrics, the dilatation of piecewise-linear maps between
embeddings, and executable forms of the geometric estimates and the Schwarz-type
lower bound for uniformly nondegenerate Delaunay patches.
"""
import collections
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from attr import attrs

from .complex import (
    PlanarEmbedding,
    Triangulation,
    edge_key,
    one_ring,
    rotate_face,
    subcomplex_generated_by,
)
from .exceptions import (
    AngleHypothesisViolatedError,
    CheckFailedError,
    DcglabApiError,
    HypothesisViolatedError,
    NotConformalPairError,
    NotFlatError,
    NumericalFailureError,
)
from .metric import (
    CONFORMAL_RESIDUAL,
    FLATNESS_TOLERANCE,
    ConformalFactor,
    PLMetric,
    corner_angles,
    cot_weights,
    curvature,
    delaunay_check,
    recover_conformal_factor,
)
from .predicates import distance_to_polygon, distance_to_segments, point_in_polygon

# Largest relative disagreement when a face closes up around a placed vertex.
CLOSURE_TOLERANCE = 1e-8
# Rounding allowed when comparing a corner angle with epsilon.
ANGLE_TOLERANCE = 1e-12
# Relative rounding allowed in the geometric estimates.
ESTIMATE_TOLERANCE = 1e-9
# Radii sampled between the 1-ring radius and the inner radius.
CONTAINMENT_SAMPLES = 8


@attrs(auto_attribs=True, frozen=True)
class DilatationReport:
    # One value per face, aligned with `triangulation.faces`.
    per_face: np.ndarray
    max: float


@attrs(auto_attribs=True, frozen=True)
class EstimatesReport:
    epsilon: float
    min_angle: float
    max_interior_degree: int
    degree_bound: float
    min_ratio: float
    max_ratio: float
    min_area_ratio: float
    max_area_ratio: float
    max_weight_sum: float
    weight_sum_bound: float


@attrs(auto_attribs=True, frozen=True)
class ContainmentReport:
    vertex: int
    # Distance from phi(a) to the boundary of the image.
    r_inner: float
    # Largest |phi(j) - phi(a)| over the 1-ring of a.
    r_outer: float
    # Largest r / rho over the sampled radii, None when no radius was sampled.
    c_emp: Optional[float]
    samples: List[Tuple[float, float]]


@attrs(auto_attribs=True, frozen=True)
class SchwarzReport:
    ok: bool
    # Smallest u_i - bound over the checked vertices.
    margin: float
    bound: float
    M: float
    u: ConformalFactor
    checked: List[int]
    witness: Optional[int]


def develop_flat_metric(
    l: PLMetric,
    *,
    anchor: Optional[Tuple[int, int]] = None,
    origin: complex = 0j,
    direction: complex = 1 + 0j,
) -> PlanarEmbedding:
    """
    Lay out a flat metric in the plane, face by face in breadth-first order.

    :param anchor: The edge ``(i, j)`` placed first, with ``i`` at ``origin`` and
        ``j`` along ``direction``. Defaults to the first edge of the first face.
    :raises NotFlatError: if some interior vertex has nonzero curvature.
    :raises FoldOverError: if a face lays out with negative area.
    :raises NumericalFailureError: if a vertex reached along two routes lands in two
        different places.
    """
    T = l.triangulation
    K = curvature(l)
    for i, value in K.interior.items():
        if abs(value) > FLATNESS_TOLERANCE:
            raise NotFlatError(
                f"vertex {i} has curvature {value!r}", vertex=i, curvature=value
            )

    if direction == 0:
        raise DcglabApiError("direction must be nonzero")

    if anchor is None:
        i, j = T.faces[0][0], T.faces[0][1]
    else:
        i, j = anchor
        if edge_key(i, j) not in T.edge_faces:
            raise DcglabApiError(f"anchor {anchor} is not an edge")

    angles = corner_angles(l)
    positions: Dict[int, complex] = {
        i: complex(origin),
        j: complex(origin) + l[i, j] * direction / abs(direction),
    }

    start = T.edge_faces[edge_key(i, j)][0]
    queue = collections.deque([start])
    visited = {start}
    while queue:
        f = queue.popleft()
        face = T.faces[f]
        a = next(k for k in face if k in positions and _next_in(face, k) in positions)
        a, b, c = rotate_face(face, a)
        along = positions[b] - positions[a]
        turn = np.exp(1j * angles.at(f, a))
        placed = positions[a] + l[a, c] * turn * along / abs(along)
        if c in positions:
            error = abs(placed - positions[c])
            if error > CLOSURE_TOLERANCE * l[a, c]:
                raise NumericalFailureError(
                    f"vertex {c} closes up with error {error!r}"
                )
        else:
            positions[c] = complex(placed)

        for e in ((a, b), (b, c), (c, a)):
            for g in T.edge_faces[edge_key(*e)]:
                if g not in visited:
                    visited.add(g)
                    queue.append(g)

    return PlanarEmbedding(T, positions)


def pl_map_dilatation(phi: PlanarEmbedding, phi2: PlanarEmbedding) -> DilatationReport:
    """
    Per-face dilatation of the piecewise-linear map from ``phi`` to ``phi2``: the
    ratio of the singular values of its linear part on each face.

    :raises DegenerateFaceError: if a face of either embedding has zero area.
    """
    if phi.triangulation != phi2.triangulation:
        raise DcglabApiError("the two embeddings live on different complexes")

    phi.check_faces()
    phi2.check_faces()
    source = _edge_frames(phi)
    target = _edge_frames(phi2)
    linear = target @ np.linalg.inv(source)
    singular = np.linalg.svd(linear, compute_uv=False)
    per_face = singular[:, 0] / singular[:, 1]
    return DilatationReport(per_face=per_face, max=float(np.max(per_face)))


def geometric_estimates_check(phi: PlanarEmbedding, epsilon: float) -> EstimatesReport:
    """
    Check the degree, edge-ratio, area and weight-sum estimates that hold when every
    corner angle is at least ``epsilon``:

    - an interior vertex has at most ``2 pi / epsilon`` neighbors, and a boundary
      vertex at most ``2 pi / epsilon`` faces;
    - two sides of a face have length ratio in ``[sin e, 1 / sin e]``;
    - a face with side ``l`` has area between ``sin^2(e) l^2 / 2`` and
      ``l^2 / (2 sin e)``;
    - the cotangent weights at an interior vertex add up to at most
      ``deg * cot e``.

    :raises AngleHypothesisViolatedError: if some corner angle is below ``epsilon``.
    :raises CheckFailedError: if an estimate fails.
    """
    if not 0 < epsilon <= math.pi / 3 + ANGLE_TOLERANCE:
        raise DcglabApiError("epsilon must lie in (0, pi/3]")

    T = phi.triangulation
    l = PLMetric.from_embedding(phi)
    angles = corner_angles(l).angles
    f, c = np.unravel_index(int(np.argmin(angles)), angles.shape)
    min_angle = float(angles[f, c])
    if min_angle < epsilon - ANGLE_TOLERANCE:
        raise AngleHypothesisViolatedError(
            f"corner angle {min_angle!r} at vertex {T.faces[f][c]} of face "
            + f"{T.faces[f]} is below {epsilon!r}",
            hypothesis="angle bound",
            witness=T.faces[f],
        )

    slack = 1 + ESTIMATE_TOLERANCE
    degree_bound = 2 * math.pi / epsilon
    max_interior_degree = max((T.degree(i) for i in T.interior_vertices), default=0)
    for i in T.vertices:
        count = T.degree(i) if i in T.interior_vertices else len(T.vertex_faces[i])
        if count > degree_bound * slack:
            raise CheckFailedError(
                f"vertex {i} has {count} neighbors or faces, above {degree_bound!r}",
                margin=degree_bound - count,
            )

    sides = l.face_lengths()
    ratios = sides / np.roll(sides, 1, axis=1)
    min_ratio, max_ratio = float(np.min(ratios)), float(np.max(ratios))
    sin_e = math.sin(epsilon)
    if min_ratio < sin_e / slack or max_ratio > slack / sin_e:
        raise CheckFailedError(
            f"edge ratios span [{min_ratio!r}, {max_ratio!r}], "
            + f"outside [{sin_e!r}, {1 / sin_e!r}]",
            margin=min(min_ratio - sin_e, 1 / sin_e - max_ratio),
        )

    area = np.abs(phi.signed_areas())[:, None] / sides**2
    min_area_ratio, max_area_ratio = float(np.min(area)), float(np.max(area))
    low, high = sin_e**2 / 2, 1 / (2 * sin_e)
    if min_area_ratio < low / slack or max_area_ratio > high * slack:
        raise CheckFailedError(
            f"area over squared side spans [{min_area_ratio!r}, {max_area_ratio!r}], "
            + f"outside [{low!r}, {high!r}]",
            margin=min(min_area_ratio - low, high - max_area_ratio),
        )

    cot_e = math.cos(epsilon) / sin_e
    sums = cot_weights(l).vertex_sums()
    max_weight_sum = 0.0
    for i in sorted(T.interior_vertices):
        max_weight_sum = max(max_weight_sum, sums[i])
        if sums[i] > T.degree(i) * cot_e * slack + ESTIMATE_TOLERANCE:
            raise CheckFailedError(
                f"weights at vertex {i} add up to {sums[i]!r}, "
                + f"above {T.degree(i) * cot_e!r}",
                margin=T.degree(i) * cot_e - sums[i],
            )

    return EstimatesReport(
        epsilon=epsilon,
        min_angle=min_angle,
        max_interior_degree=max_interior_degree,
        degree_bound=degree_bound,
        min_ratio=min_ratio,
        max_ratio=max_ratio,
        min_area_ratio=min_area_ratio,
        max_area_ratio=max_area_ratio,
        max_weight_sum=max_weight_sum,
        weight_sum_bound=2 * math.pi * cot_e / epsilon,
    )


def containment_radii(
    phi: PlanarEmbedding, a: int, *, samples: int = CONTAINMENT_SAMPLES
) -> ContainmentReport:
    """
    With ``phi(a)`` moved to the origin: the radius of the largest disk inside the
    image, the radius of the 1-ring of ``a``, and the worst ratio ``r / rho`` over
    radii ``r`` between the two, where ``rho`` is the radius of the largest disk
    covered by the faces whose vertices all lie in ``|z| < r``.
    """
    T = phi.triangulation
    if a not in T.index:
        raise DcglabApiError(f"vertex {a} is not in the triangulation")

    center = phi[a]
    r_inner = distance_to_polygon(center, phi.boundary_polygon())
    if a in T.boundary_vertices:
        r_inner = 0.0
    r_outer = max(abs(phi[j] - center) for j in one_ring(T, a).neighbors)

    measured: List[Tuple[float, float]] = []
    if a in T.interior_vertices and r_inner > r_outer:
        for k in range(1, samples + 1):
            r = r_outer + (r_inner - r_outer) * k / samples
            inside = [v for v in T.vertices if abs(phi[v] - center) < r]
            T1 = subcomplex_generated_by(T, inside)
            rho = _covered_radius(phi, T1, center)
            measured.append((r, rho))

    c_emp = max((r / rho for r, rho in measured), default=None)
    return ContainmentReport(
        vertex=a, r_inner=r_inner, r_outer=r_outer, c_emp=c_emp, samples=measured
    )


def schwarz_verify(
    T0: Triangulation,
    phi: PlanarEmbedding,
    phi2: PlanarEmbedding,
    r: float,
    r2: float,
    epsilon: float,
) -> SchwarzReport:
    """
    Check the lower bound ``u_i >= ln(r2 / r) - M``, with ``M = -ln(sin^3(e) / 8)``,
    at every vertex ``i`` of ``T0`` with ``|phi2(i)| < r2 / 2``.

    The hypotheses are checked first: both induced metrics on ``T0`` have every
    corner angle at least ``epsilon`` and are Delaunay, ``phi`` maps ``T0`` into
    ``|z| <= r``, ``phi2`` covers ``|z| < r2`` and the two metrics are discretely
    conformal with factor ``u``.

    :raises HypothesisViolatedError: naming the hypothesis and the offending simplex.
    :raises NotConformalPairError: if no factor explains the two metrics.
    :raises CheckFailedError: if the bound fails at some vertex.
    """
    if not 0 < epsilon <= math.pi / 6 + ANGLE_TOLERANCE:
        raise DcglabApiError("epsilon must lie in (0, pi/6]")
    if not (r > 0 and r2 > 0):
        raise DcglabApiError("radii must be positive")

    phi0, phi20 = phi.restricted(T0), phi2.restricted(T0)
    phi0.check_faces()
    phi20.check_faces()
    l, l2 = PLMetric.from_embedding(phi0), PLMetric.from_embedding(phi20)
    for name, metric in (("first", l), ("second", l2)):
        angles = corner_angles(metric).angles
        f, c = np.unravel_index(int(np.argmin(angles)), angles.shape)
        if angles[f, c] < epsilon - ANGLE_TOLERANCE:
            raise HypothesisViolatedError(
                f"the {name} metric has corner angle {float(angles[f, c])!r} "
                + f"below epsilon in face {T0.faces[f]}",
                hypothesis="nondegeneracy",
                witness=T0.faces[f],
            )

        report = delaunay_check(metric)
        if not report.is_delaunay:
            raise HypothesisViolatedError(
                f"the {name} metric is not Delaunay at edge {report.witness}",
                hypothesis="delaunay",
                witness=report.witness,
            )

    for v in T0.vertices:
        if abs(phi0[v]) > r:
            raise HypothesisViolatedError(
                f"vertex {v} maps outside |z| <= {r!r}",
                hypothesis="image inside D_r",
                witness=v,
            )

    polygon = phi20.boundary_polygon()
    if not point_in_polygon(0j, polygon) or distance_to_polygon(0j, polygon) < r2:
        raise HypothesisViolatedError(
            f"the second image does not cover |z| < {r2!r}",
            hypothesis="image covers D_r2",
        )

    fit = recover_conformal_factor(l, l2)
    if fit.residual > CONFORMAL_RESIDUAL:
        raise NotConformalPairError(
            f"metrics are not discretely conformal (residual {fit.residual!r})",
            residual=fit.residual,
        )

    M = -math.log(math.sin(epsilon) ** 3 / 8)
    bound = math.log(r2 / r) - M
    checked = [v for v in T0.vertices if abs(phi20[v]) < r2 / 2]
    margin = math.inf
    witness = None
    for v in checked:
        if fit.u[v] - bound < margin:
            margin = fit.u[v] - bound
            witness = v

    if margin < -ESTIMATE_TOLERANCE:
        raise CheckFailedError(
            f"u at vertex {witness} is {fit.u[witness]!r}, below {bound!r}",
            margin=margin,
        )

    return SchwarzReport(
        ok=True,
        margin=margin,
        bound=bound,
        M=M,
        u=fit.u,
        checked=checked,
        witness=witness if margin < math.inf else None,
    )


def write_svg(
    phi: PlanarEmbedding,
    path: str,
    values: Optional[Mapping[int, float]] = None,
    *,
    size: int = 800,
) -> None:
    """
    Draw the faces of an embedding as polygons. With ``values``, each face is filled
    by the mean of its vertex values on a blue-to-red scale.
    """
    T = phi.triangulation
    points = phi.positions[list(T.vertices)]
    low = complex(points.real.min(), points.imag.min())
    high = complex(points.real.max(), points.imag.max())
    extent = max(high.real - low.real, high.imag - low.imag) or 1.0
    margin = 10
    scale = (size - 2 * margin) / extent

    def xy(z: complex) -> str:
        x = margin + (z.real - low.real) * scale
        # SVG's y axis points down.
        y = margin + (high.imag - z.imag) * scale
        return f"{x:.3f},{y:.3f}"

    if values is not None:
        lowest = min(values[v] for v in T.vertices)
        highest = max(values[v] for v in T.vertices)
        spread = highest - lowest or 1.0

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">'
    ]
    for face in T.faces:
        if values is None:
            fill = "none"
        else:
            t = (sum(values[v] for v in face) / 3 - lowest) / spread
            fill = _color(t)
        corners = " ".join(xy(phi[v]) for v in face)
        lines.append(
            f'  <polygon points="{corners}" fill="{fill}" stroke="black" '
            + 'stroke-width="0.5"/>'
        )
    lines.append("</svg>")

    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    red = round(255 * t)
    blue = round(255 * (1 - t))
    return f"#{red:02x}40{blue:02x}"


def _next_in(face: Sequence[int], k: int) -> int:
    return face[(face.index(k) + 1) % 3]


def _edge_frames(phi: PlanarEmbedding) -> np.ndarray:
    """
    For each face, the real 2x2 matrix whose columns are its two edges out of the
    first corner.
    """
    z = phi.face_positions()
    first, second = z[:, 1] - z[:, 0], z[:, 2] - z[:, 0]
    frames = np.empty((len(z), 2, 2))
    frames[:, 0, 0], frames[:, 1, 0] = first.real, first.imag
    frames[:, 0, 1], frames[:, 1, 1] = second.real, second.imag
    return frames


def _covered_radius(phi: PlanarEmbedding, T1: Triangulation, center: complex) -> float:
    edges = sorted(T1.boundary_edges)
    p = np.array([phi[i] for i, _ in edges])
    q = np.array([phi[j] for _, j in edges])
    return distance_to_segments(center, p, q)
