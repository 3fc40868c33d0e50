"""
The discrete conformal flow on a flat Delaunay patch, and a Newton solver for the
flat metric with prescribed boundary factor.

Along the flow the boundary factor moves with a prescribed velocity while the
interior velocity is the harmonic extension for the current cotangent weights, which
keeps every interior vertex flat.
"""
import math
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import scipy.sparse.linalg
from attr import attrs

from .complex import PlanarEmbedding, Triangulation, gen_hex_patch
from .debug import Debugger
from .exceptions import (
    DcglabApiError,
    HypothesisViolatedError,
    LeftDomainError,
    NoConvergenceError,
    StepFailureError,
    TriangleCollapseError,
    ViolatedTriangleInequalityError,
    WeightDegenerateError,
)
from .harmonic import WeightedGraph, dirichlet_solve
from .metric import (
    DELAUNAY_SLACK,
    FLATNESS_TOLERANCE,
    ConformalFactor,
    EdgeWeights,
    PLMetric,
    conformal_change,
    cot_weights,
    curvature,
    curvature_jacobian,
    delaunay_check,
)

# Largest integrator step; the actual step divides the time span evenly.
FLOW_MAX_STEP = 0.01
# Newton corrections after each step stop once max |K| is below this.
PROJECTION_TOLERANCE = 1e-12
PROJECTION_ITERATIONS = 3
YAMABE_TOLERANCE = 1e-10
YAMABE_MAX_ITERATIONS = 50
# Halvings tried by the Newton line search before giving up.
LINE_SEARCH_HALVINGS = 30
# Largest boundary amplitude accepted by the rigidity experiment.
PROFILE_AMPLITUDE_LIMIT = 0.2

PROFILES = ("zero", "constant", "dipole", "quadrupole")


@attrs(auto_attribs=True, frozen=True)
class FlowState:
    time: float
    u: ConformalFactor
    metric: PLMetric
    weights: EdgeWeights
    # Largest interior |K| of `metric`.
    flatness: float
    # du/dt at this state.
    velocity: ConformalFactor

    @property
    def norm(self) -> float:
        return max(abs(x) for x in self.u.values())


@attrs(auto_attribs=True, frozen=True)
class FlowTrajectory:
    states: List[FlowState]
    boundary_velocity: ConformalFactor
    termination: str

    @property
    def times(self) -> List[float]:
        return [state.time for state in self.states]

    @property
    def final(self) -> FlowState:
        return self.states[-1]


@attrs(auto_attribs=True, frozen=True)
class YamabeSolution:
    u: ConformalFactor
    residual: float
    iterations: int
    # Max interior |K| before each Newton step and after the last one.
    history: List[float]


@attrs(auto_attribs=True, frozen=True)
class RigidityRow:
    radius: int
    vertices: int
    # max - min of u over the vertices within the report's center radius.
    oscillation: float
    iterations: int
    residual: float


@attrs(auto_attribs=True, frozen=True)
class RigidityReport:
    profile: str
    amplitude: float
    # Radius of the fixed region around vertex 0 where oscillation is measured.
    center_radius: float
    rows: List[RigidityRow]

    @property
    def strictly_decreasing(self) -> bool:
        return all(
            later.oscillation < earlier.oscillation
            for earlier, later in zip(self.rows, self.rows[1:])
        )


@attrs(auto_attribs=True, frozen=True)
class ContractionReport:
    target_norm: float
    delta: float
    # |target|_inf - delta, the promised bound on |target_i - u_i(delta)|.
    bound: float
    max_gap: float
    # The bound only applies when |target|_inf >= delta.
    applicable: bool

    @property
    def ok(self) -> bool:
        return not self.applicable or self.max_gap <= self.bound + 1e-10


def conformal_flow(
    l: PLMetric,
    boundary_velocity: Mapping[int, float],
    t_end: float,
    delta: float,
    *,
    max_step: float = FLOW_MAX_STEP,
    project: bool = True,
    slack: float = DELAUNAY_SLACK,
    debug: bool = False,
) -> FlowTrajectory:
    """
    Integrate the conformal flow from ``u = 0`` to ``t_end``.

    The step is ``t_end / ceil(t_end / max_step)``. Each step is a classical
    Runge-Kutta step followed, when ``project`` is set, by Newton corrections of the
    interior factor that restore flatness.

    :param l: A flat Delaunay metric.
    :param boundary_velocity: The constant du/dt at each boundary vertex, at most 1
        in absolute value.
    :param delta: Half the radius of the allowed domain: the flow stops with
        ``LeftDomainError`` once ``|u|_inf`` reaches ``2 * delta``.
    :raises LeftDomainError: if the factor leaves the allowed domain.
    :raises WeightDegenerateError: if a cotangent weight drops below ``-slack``.
    :raises StepFailureError: if a step produces an invalid metric or cannot be
        projected back to a flat one.
    """
    T = l.triangulation
    velocity_at_boundary = _boundary_function(T, boundary_velocity)
    if max((abs(x) for x in velocity_at_boundary.values()), default=0.0) > 1:
        raise DcglabApiError("boundary velocity must be at most 1 in absolute value")
    if not delta > 0:
        raise DcglabApiError("delta must be positive")
    if not 0 <= t_end < 2 * delta:
        raise DcglabApiError("t_end must lie in [0, 2 * delta)")
    if not max_step > 0:
        raise DcglabApiError("max_step must be positive")

    _require_flat_delaunay(l, slack)

    interior = sorted(T.interior_vertices)
    # Edges with an interior endpoint; the rest join two fixed vertices.
    solve_edges = [e for e in T.edges if e not in T.boundary_edges]
    debugger = Debugger("flow") if debug else None

    def velocity(u: ConformalFactor, time: float) -> ConformalFactor:
        metric = _changed_metric(l, u, time)
        graph = WeightedGraph.from_edge_weights(
            cot_weights(metric), slack=slack, edges=solve_edges
        )
        return dirichlet_solve(
            graph, interior, velocity_at_boundary, allow_zero_weights=True
        )

    steps = math.ceil(t_end / max_step) if t_end > 0 else 0
    h = t_end / steps if steps else 0.0
    u = {v: 0.0 for v in T.vertices}
    states = [_flow_state(l, u, 0.0, velocity(u, 0.0), slack)]
    for k in range(1, steps + 1):
        time = k * h
        k1 = states[-1].velocity
        k2 = velocity(_axpy(u, h / 2, k1), time - h / 2)
        k3 = velocity(_axpy(u, h / 2, k2), time - h / 2)
        k4 = velocity(_axpy(u, h, k3), time)
        u = {
            v: u[v] + h / 6 * (k1[v] + 2 * k2[v] + 2 * k3[v] + k4[v])
            for v in T.vertices
        }
        corrections = 0
        if project:
            u, corrections = _project_flat(l, u, time)

        norm = max(abs(x) for x in u.values())
        if norm >= 2 * delta:
            raise LeftDomainError(
                f"|u| reached {norm!r} >= 2 * delta at t={time!r}", time=time, norm=norm
            )

        state = _flow_state(l, u, time, velocity(u, time), slack)
        if project and state.flatness > FLATNESS_TOLERANCE:
            raise StepFailureError(
                f"curvature {state.flatness!r} left after projection at t={time!r}",
                time=time,
            )

        states.append(state)
        if debugger is not None:
            debugger.step(
                f"step {k} of {steps}",
                time=time,
                norm=norm,
                flatness=state.flatness,
                corrections=corrections,
            )

    return FlowTrajectory(
        states=states,
        boundary_velocity=velocity_at_boundary,
        termination="completed",
    )


def yamabe_solve(
    l: PLMetric,
    boundary_u: Mapping[int, float],
    *,
    tol: float = YAMABE_TOLERANCE,
    max_iterations: int = YAMABE_MAX_ITERATIONS,
    slack: float = DELAUNAY_SLACK,
    debug: bool = False,
) -> YamabeSolution:
    """
    Find the factor ``u`` with the given boundary values that makes ``u*l`` flat at
    every interior vertex.

    Newton's method on the interior curvatures, started from the harmonic extension
    of ``boundary_u`` and damped by a backtracking line search that only accepts
    valid metrics with smaller curvature.

    :raises NoConvergenceError: if the tolerance is not reached within
        ``max_iterations``; the best iterate and its residual are attached.
    :raises TriangleCollapseError: if no step along the Newton direction keeps every
        face a triangle.
    """
    T = l.triangulation
    fixed = _boundary_function(T, boundary_u)
    report = delaunay_check(l, slack=slack)
    if not report.is_delaunay:
        raise HypothesisViolatedError(
            f"metric is not Delaunay at edge {report.witness}",
            hypothesis="delaunay",
            witness=report.witness,
        )

    interior = sorted(T.interior_vertices)
    if not interior:
        return YamabeSolution(u=dict(fixed), residual=0.0, iterations=0, history=[0.0])

    graph = WeightedGraph.from_edge_weights(
        cot_weights(l),
        slack=slack,
        edges=[e for e in T.edges if e not in T.boundary_edges],
    )
    u = dirichlet_solve(graph, interior, fixed, allow_zero_weights=True)
    try:
        K = _interior_curvature(l, u, interior)
    except ViolatedTriangleInequalityError as e:
        raise TriangleCollapseError(
            "the harmonic starting guess is not a valid metric"
        ) from e

    debugger = Debugger("yamabe") if debug else None
    history = [float(np.max(np.abs(K)))]
    for iteration in range(max_iterations):
        residual = history[-1]
        if debugger is not None:
            debugger.step(f"iteration {iteration}", residual=residual)

        if residual <= tol:
            return YamabeSolution(
                u=u, residual=residual, iterations=iteration, history=history
            )

        J = curvature_jacobian(l, u).interior_block()
        step = scipy.sparse.linalg.spsolve(J.tocsc(), -K)
        if not np.all(np.isfinite(step)):
            raise NoConvergenceError(
                "the curvature Jacobian is singular",
                best=u,
                residual=residual,
                iterations=iteration,
            )

        u, K = _line_search(l, u, K, interior, step, residual)
        history.append(float(np.max(np.abs(K))))

    residual = history[-1]
    if residual <= tol:
        return YamabeSolution(
            u=u, residual=residual, iterations=max_iterations, history=history
        )

    raise NoConvergenceError(
        f"Newton's method stopped at residual {residual!r} "
        + f"after {max_iterations} iterations",
        best=u,
        residual=residual,
        iterations=max_iterations,
    )


def rigidity_experiment(
    radii: Iterable[int],
    profile: str,
    *,
    amplitude: float = 0.1,
    center_radius: Optional[float] = None,
    debug: bool = False,
) -> RigidityReport:
    """
    Solve for the flat metric on hexagonal patches of growing radius with the same
    boundary profile, and record how much the factor varies near the center.

    Profiles are functions of the polar angle of each boundary vertex: ``zero``,
    ``constant`` (the amplitude), ``dipole`` (amplitude times cos) and
    ``quadrupole`` (amplitude times cos of twice the angle).

    :param center_radius: The oscillation of every patch is measured over the same
        region ``|z| <= center_radius``. Defaults to half the smallest radius, the
        half-radius subpatch of the first patch.
    """
    boundary_profile = profile_function(profile, amplitude)
    radii = list(radii)
    if not radii:
        raise DcglabApiError("no radii given")

    if center_radius is None:
        center_radius = min(radii) / 2
    if not center_radius > 0:
        raise DcglabApiError("the center radius must be positive")

    rows = []
    for radius in radii:
        T, phi = gen_hex_patch(radius)
        l = PLMetric.from_embedding(phi)
        boundary_u = {
            v: boundary_profile(theta) for v, theta in boundary_angles(phi).items()
        }
        solution = yamabe_solve(l, boundary_u, debug=debug)
        center = [v for v in T.vertices if abs(phi[v]) <= center_radius + 1e-9]
        values = [solution.u[v] for v in center]
        rows.append(
            RigidityRow(
                radius=radius,
                vertices=len(T.vertices),
                oscillation=max(values) - min(values),
                iterations=solution.iterations,
                residual=solution.residual,
            )
        )

    return RigidityReport(
        profile=profile, amplitude=amplitude, center_radius=center_radius, rows=rows
    )


def profile_function(profile: str, amplitude: float) -> Callable[[float], float]:
    if abs(amplitude) > PROFILE_AMPLITUDE_LIMIT:
        raise DcglabApiError(
            f"amplitude must be at most {PROFILE_AMPLITUDE_LIMIT} in absolute value"
        )

    if profile == "zero":
        return lambda theta: 0.0
    elif profile == "constant":
        return lambda theta: amplitude
    elif profile == "dipole":
        return lambda theta: amplitude * math.cos(theta)
    elif profile == "quadrupole":
        return lambda theta: amplitude * math.cos(2 * theta)
    else:
        raise DcglabApiError(
            f"unknown profile {profile!r}, expected one of {', '.join(PROFILES)}"
        )


def normalized_boundary_velocity(target: Mapping[int, float]) -> ConformalFactor:
    """
    ``target / |target|_inf``, or zero for a zero target.
    """
    norm = max((abs(x) for x in target.values()), default=0.0)
    if norm == 0:
        return {v: 0.0 for v in target}
    return {v: x / norm for v, x in target.items()}


def flow_toward(
    l: PLMetric,
    target: Mapping[int, float],
    delta: float,
    *,
    max_step: float = FLOW_MAX_STEP,
    debug: bool = False,
) -> Tuple[FlowTrajectory, ContractionReport]:
    """
    Flow for time ``delta`` toward the boundary factor ``target`` and compare the
    remaining boundary gap with ``|target|_inf - delta``.
    """
    T = l.triangulation
    target = _boundary_function(T, target)
    trajectory = conformal_flow(
        l,
        normalized_boundary_velocity(target),
        delta,
        delta,
        max_step=max_step,
        debug=debug,
    )
    reached = trajectory.final.u
    target_norm = max((abs(x) for x in target.values()), default=0.0)
    max_gap = max(abs(target[v] - reached[v]) for v in target)
    report = ContractionReport(
        target_norm=target_norm,
        delta=delta,
        bound=target_norm - delta,
        max_gap=max_gap,
        applicable=target_norm >= delta,
    )
    return trajectory, report


def boundary_angles(phi: PlanarEmbedding) -> Dict[int, float]:
    """
    Polar angle of every boundary vertex, for building boundary profiles.
    """
    return {
        v: math.atan2(phi[v].imag, phi[v].real)
        for v in sorted(phi.triangulation.boundary_vertices)
    }


def _require_flat_delaunay(l: PLMetric, slack: float) -> None:
    K = curvature(l)
    if K.max_abs() > FLATNESS_TOLERANCE:
        vertex = max(K.interior, key=lambda i: abs(K.interior[i]))
        raise HypothesisViolatedError(
            f"metric is not flat at vertex {vertex} (K={K.interior[vertex]!r})",
            hypothesis="flat",
            witness=vertex,
        )

    report = delaunay_check(l, slack=slack)
    if not report.is_delaunay:
        raise HypothesisViolatedError(
            f"metric is not Delaunay at edge {report.witness}",
            hypothesis="delaunay",
            witness=report.witness,
        )


def _flow_state(
    l: PLMetric,
    u: ConformalFactor,
    time: float,
    velocity: ConformalFactor,
    slack: float,
) -> FlowState:
    metric = _changed_metric(l, u, time)
    weights = cot_weights(metric)
    edge, weight = weights.min_interior()
    if edge is not None and weight < -slack:
        raise WeightDegenerateError(
            f"edge {edge} lost the Delaunay property at t={time!r} (mu={weight!r})",
            edge=edge,
            weight=weight,
        )

    return FlowState(
        time=time,
        u=dict(u),
        metric=metric,
        weights=weights,
        flatness=curvature(metric).max_abs(),
        velocity=velocity,
    )


def _project_flat(
    l: PLMetric, u: ConformalFactor, time: float
) -> Tuple[ConformalFactor, int]:
    interior = sorted(l.triangulation.interior_vertices)
    if not interior:
        return u, 0

    K = _changed_interior_curvature(l, u, interior, time)
    corrections = 0
    while (
        corrections < PROJECTION_ITERATIONS
        and np.max(np.abs(K)) > PROJECTION_TOLERANCE
    ):
        J = curvature_jacobian(l, u).interior_block()
        step = scipy.sparse.linalg.spsolve(J.tocsc(), -K)
        if not np.all(np.isfinite(step)):
            raise StepFailureError(
                f"singular curvature Jacobian at t={time!r}", time=time
            )

        u = dict(u)
        for i, du in zip(interior, step):
            u[i] += float(du)
        K = _changed_interior_curvature(l, u, interior, time)
        corrections += 1

    return u, corrections


def _line_search(
    l: PLMetric,
    u: ConformalFactor,
    K: np.ndarray,
    interior: List[int],
    step: np.ndarray,
    residual: float,
) -> Tuple[ConformalFactor, np.ndarray]:
    scale = 1.0
    collapsed = False
    for _ in range(LINE_SEARCH_HALVINGS):
        trial = dict(u)
        for i, du in zip(interior, step):
            trial[i] += scale * float(du)

        try:
            trial_K = _interior_curvature(l, trial, interior)
        except ViolatedTriangleInequalityError:
            collapsed = True
        else:
            if np.max(np.abs(trial_K)) < residual:
                return trial, trial_K

        scale /= 2

    if collapsed:
        raise TriangleCollapseError(
            "every step along the Newton direction breaks a triangle"
        )

    raise NoConvergenceError(
        "the line search found no decrease of the curvature",
        best=u,
        residual=residual,
        iterations=0,
    )


def _interior_curvature(
    l: PLMetric, u: ConformalFactor, interior: List[int]
) -> np.ndarray:
    K = curvature(conformal_change(l, u)).interior
    return np.array([K[i] for i in interior])


def _changed_interior_curvature(
    l: PLMetric, u: ConformalFactor, interior: List[int], time: float
) -> np.ndarray:
    K = curvature(_changed_metric(l, u, time)).interior
    return np.array([K[i] for i in interior])


def _changed_metric(l: PLMetric, u: ConformalFactor, time: float) -> PLMetric:
    try:
        return conformal_change(l, u)
    except ViolatedTriangleInequalityError as e:
        raise StepFailureError(
            f"face {e.face} stopped being a triangle at t={time!r}", time=time
        ) from e


def _axpy(u: ConformalFactor, a: float, v: ConformalFactor) -> ConformalFactor:
    return {i: u[i] + a * v[i] for i in u}


def _boundary_function(
    T: Triangulation, values: Mapping[int, float]
) -> ConformalFactor:
    result = {}
    for v in sorted(T.boundary_vertices):
        if v not in values:
            raise DcglabApiError(f"no boundary value given at vertex {v}")
        if not math.isfinite(values[v]):
            raise DcglabApiError(f"boundary value at vertex {v} is not finite")
        result[v] = float(values[v])
    return result
