"""
Randomized verification suites.

Each suite runs a number of independent instances. Instance ``k`` of a run with seed
``s`` draws all of its randomness from ``numpy.random.default_rng(s + k)``, so an
instance can be rerun alone. When an instance fails, its input meshes and random
vertex data are written to the artifact directory, and those files are enough to
replay it without the seed.
"""
import concurrent.futures
import math
import os
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
from attr import attrs

from .complex import PlanarEmbedding, Triangulation, gen_hex_patch
from .complex import gen_random_delaunay_disk
from .exceptions import (
    CheckFailedError,
    ConditionViolatedError,
    DcglabApiError,
    DcglabError,
    HypothesisViolatedError,
    TriangleCollapseError,
    ViolatedTriangleInequalityError,
)
from .flow import conformal_flow, rigidity_experiment, yamabe_solve
from .formats import dump_json, write_factor, write_mesh
from .harmonic import (
    WeightedGraph,
    dirichlet_solve,
    effective_resistance,
    max_principle_check,
)
from .hyperbolic import (
    DiskEmbedding,
    convert_factor_euclidean_to_hyperbolic,
    hyp_max_principle_check,
    induced_hyp_embedding,
    ph_from_disk_embedding,
)
from .layout import (
    containment_radii,
    develop_flat_metric,
    geometric_estimates_check,
    schwarz_verify,
)
from .metric import (
    ConformalFactor,
    PLMetric,
    conformal_change,
    conformal_max_principle_check,
    corner_angles,
    cot_weights,
    curvature,
    curvature_jacobian,
    delaunay_check,
    recover_conformal_factor,
)
from .network import (
    edge_conductance,
    he_inequality_check,
    parabolicity_growth,
    vel_additivity_check,
)

# Step of the central differences compared against the curvature Jacobian.
JACOBIAN_STEP = 1e-5
JACOBIAN_TOLERANCE = 1e-6
HARMONIC_TOLERANCE = 1e-10
HYPERBOLIC_TOLERANCE = 1e-9
FLATNESS_BOUND = 1e-8
LIPSCHITZ_SLACK = 1e-8
VELOCITY_SLACK = 1e-10
DUALITY_TOLERANCE = 1e-6
# Accepted range of the error ratio between successive step halvings of the flow.
CONVERGENCE_RATIO = (12.0, 20.0)
# Displacement of each lattice vertex when building a random patch.
JITTER = 0.1
# Amplitude of random boundary factors.
BOUNDARY_AMPLITUDE = 0.1

ARTIFACT_DIRECTORY = "dcglab-artifacts"


@attrs(auto_attribs=True, frozen=True)
class InstanceResult:
    instance: int
    seed: int
    # "pass", "fail", or "discarded" when a randomly built input misses the
    # hypotheses of the statement under test.
    status: str
    checks: Dict[str, bool]
    margins: Dict[str, float]
    # Reported quantities with no pass/fail threshold.
    measurements: Dict[str, float]
    artifacts: List[str]
    message: str = ""


@attrs(auto_attribs=True, frozen=True)
class SuiteReport:
    suite: str
    instances: int
    seed: int
    results: List[InstanceResult]
    # Excluded from the report in stable-output mode.
    wall_time: float

    @property
    def passed(self) -> bool:
        return all(result.status != "fail" for result in self.results)

    @property
    def failures(self) -> List[InstanceResult]:
        return [result for result in self.results if result.status == "fail"]

    def count(self, status: str) -> int:
        return sum(1 for result in self.results if result.status == status)

    def check_summary(self) -> Dict[str, Dict[str, Any]]:
        """
        For each named check, how many instances passed and failed it, and the
        smallest margin seen.
        """
        summary: Dict[str, Dict[str, Any]] = {}
        for result in self.results:
            for name, ok in result.checks.items():
                entry = summary.setdefault(
                    name, {"passed": 0, "failed": 0, "min_margin": None}
                )
                entry["passed" if ok else "failed"] += 1

            for name, margin in result.margins.items():
                entry = summary.setdefault(
                    name, {"passed": 0, "failed": 0, "min_margin": None}
                )
                if entry["min_margin"] is None or margin < entry["min_margin"]:
                    entry["min_margin"] = margin

        return summary

    def as_json(self, *, stable: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "suite": self.suite,
            "instances": self.instances,
            "seed": self.seed,
            "passed": self.passed,
            "discarded": self.count("discarded"),
            "checks": self.check_summary(),
            "results": [
                {
                    "instance": result.instance,
                    "seed": result.seed,
                    "status": result.status,
                    "checks": result.checks,
                    "margins": {
                        name: _finite_or_none(value)
                        for name, value in result.margins.items()
                    },
                    "measurements": {
                        name: _finite_or_none(value)
                        for name, value in result.measurements.items()
                    },
                    "artifacts": result.artifacts,
                    "message": result.message,
                }
                for result in self.results
            ],
        }
        for entry in data["checks"].values():
            entry["min_margin"] = _finite_or_none(entry["min_margin"])
        if not stable:
            data["wall_time"] = self.wall_time
        return data


def dump_reports(reports: List[SuiteReport], *, stable: bool = False) -> str:
    return dump_json({"suites": [report.as_json(stable=stable) for report in reports]})


class Case:
    """
    The bookkeeping of one suite instance: the checks it has made and the inputs to
    persist if any of them fails.
    """

    def __init__(self, suite: str, instance: int, seed: int) -> None:
        self.suite = suite
        self.instance = instance
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.checks: Dict[str, bool] = {}
        self.margins: Dict[str, float] = {}
        self.measurements: Dict[str, float] = {}
        self._meshes: List[Tuple[str, Triangulation, Any, Any]] = []
        self._factors: List[Tuple[str, ConformalFactor]] = []

    def check(self, name: str, ok: bool, margin: Optional[float] = None) -> None:
        self.checks[name] = self.checks.get(name, True) and bool(ok)
        if margin is not None:
            margin = float(margin)
            self.margins[name] = min(margin, self.margins.get(name, margin))

    def measure(self, name: str, value: float) -> None:
        self.measurements[name] = float(value)

    def keep_mesh(
        self,
        label: str,
        T: Triangulation,
        *,
        embedding: Optional[PlanarEmbedding] = None,
        metric: Optional[PLMetric] = None,
    ) -> None:
        self._meshes.append((label, T, embedding, metric))

    def keep_factor(self, label: str, u: ConformalFactor) -> None:
        self._factors.append((label, dict(u)))

    def persist(self, directory: str) -> List[str]:
        os.makedirs(directory, exist_ok=True)
        stem = os.path.join(directory, f"{self.suite}-{self.instance:04d}")
        paths = []
        for label, T, embedding, metric in self._meshes:
            path = f"{stem}-{label}.json"
            write_mesh(path, T, embedding=embedding, metric=metric)
            paths.append(path)
        for label, u in self._factors:
            path = f"{stem}-{label}.u.json"
            write_factor(path, u)
            paths.append(path)
        return paths


class Discard(Exception):
    """
    Raised by a suite when a random input misses the hypotheses under test.
    """


def run_suite(
    name: str,
    *,
    instances: Optional[int] = None,
    seed: int = 0,
    jobs: int = 1,
    artifact_dir: str = ARTIFACT_DIRECTORY,
) -> SuiteReport:
    """
    Run one named suite.

    :param instances: Defaults to the suite's own count. The rigidity suite always
        runs its fixed list of profiles.
    :param jobs: Number of worker processes; instances are independent, and the
        results are sorted by instance whatever the completion order.
    """
    if name not in SUITES:
        raise DcglabApiError(
            f"unknown suite {name!r}, expected one of {', '.join(SUITE_NAMES)}"
        )

    runner, default_count = SUITES[name]
    if name == "rigidity":
        count = len(RIGIDITY_PROFILES)
    else:
        count = default_count if instances is None else instances
    if count < 1:
        raise DcglabApiError("at least one instance is needed")
    if jobs < 1:
        raise DcglabApiError("at least one job is needed")

    start = time.perf_counter()
    arguments = [(name, k, seed + k, artifact_dir) for k in range(count)]
    if jobs == 1:
        results = [run_instance(*args) for args in arguments]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [executor.submit(run_instance, *args) for args in arguments]
            results = [future.result() for future in futures]

    results.sort(key=lambda result: result.instance)
    return SuiteReport(
        suite=name,
        instances=count,
        seed=seed,
        results=results,
        wall_time=time.perf_counter() - start,
    )


def run_instance(
    name: str, instance: int, seed: int, artifact_dir: str
) -> InstanceResult:
    runner, _ = SUITES[name]
    case = Case(name, instance, seed)
    message = ""
    try:
        runner(case)
    except Discard as e:
        return InstanceResult(
            instance=instance,
            seed=seed,
            status="discarded",
            checks=case.checks,
            margins=case.margins,
            measurements=case.measurements,
            artifacts=[],
            message=str(e),
        )
    except CheckFailedError as e:
        case.check("conclusion", False, e.margin)
        message = str(e)
    except DcglabError as e:
        case.check("completed", False)
        message = f"{type(e).__name__}: {e}"

    if all(case.checks.values()):
        status = "pass"
        artifacts: List[str] = []
    else:
        status = "fail"
        artifacts = case.persist(artifact_dir)
        if not message:
            failed = sorted(name for name, ok in case.checks.items() if not ok)
            message = f"failed: {', '.join(failed)}"

    return InstanceResult(
        instance=instance,
        seed=seed,
        status=status,
        checks=case.checks,
        margins=case.margins,
        measurements=case.measurements,
        artifacts=artifacts,
        message=message,
    )


def jittered_hex_patch(
    radius: int, rng: np.random.Generator, *, jitter: float = JITTER
) -> Tuple[Triangulation, PlanarEmbedding]:
    """
    A hexagonal patch with every vertex moved by a random vector of length at most
    ``jitter``. For small jitter the result stays uniformly Delaunay.
    """
    T, phi = gen_hex_patch(radius)
    n = T.n_labels
    moves = jitter * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))
    return T, PlanarEmbedding(T, phi.positions + moves)


def random_boundary_factor(
    T: Triangulation, rng: np.random.Generator, *, amplitude: float = BOUNDARY_AMPLITUDE
) -> ConformalFactor:
    boundary = sorted(T.boundary_vertices)
    values = rng.uniform(-amplitude, amplitude, len(boundary))
    return {v: float(x) for v, x in zip(boundary, values)}


def flat_conformal_pair(
    case: Case, radius: int
) -> Tuple[Triangulation, PlanarEmbedding, PLMetric, ConformalFactor, PLMetric]:
    """
    A jittered hexagonal patch and a second flat Delaunay metric conformal to it,
    found by solving for the flat metric with random boundary values.
    """
    T, phi = jittered_hex_patch(radius, case.rng)
    l = PLMetric.from_embedding(phi)
    boundary_u = random_boundary_factor(T, case.rng)
    case.keep_mesh("mesh", T, embedding=phi)
    case.keep_factor("boundary", boundary_u)

    try:
        u = yamabe_solve(l, boundary_u).u
    except TriangleCollapseError as e:
        raise Discard(str(e)) from e

    l2 = conformal_change(l, u)
    if not delaunay_check(l2).is_delaunay:
        raise Discard("the conformal metric is not Delaunay")

    return T, phi, l, u, l2


def suite_jacobian(case: Case) -> None:
    """
    The curvature Jacobian against central differences of the curvature.
    """
    T, phi = gen_random_delaunay_disk(50, case.seed)
    l = PLMetric.from_embedding(phi)
    case.keep_mesh("mesh", T, embedding=phi)

    interior = sorted(T.interior_vertices)
    u = {v: 0.0 for v in T.vertices}
    J = curvature_jacobian(l, u).matrix.toarray()
    error = 0.0
    for column, v in enumerate(T.vertices):
        try:
            plus = _interior_curvatures(l, {**u, v: JACOBIAN_STEP}, interior)
            minus = _interior_curvatures(l, {**u, v: -JACOBIAN_STEP}, interior)
        except ViolatedTriangleInequalityError as e:
            raise Discard(str(e)) from e

        difference = (plus - minus) / (2 * JACOBIAN_STEP)
        error = max(error, float(np.max(np.abs(difference - J[:, column]), initial=0)))

    case.check("jacobian", error <= JACOBIAN_TOLERANCE, JACOBIAN_TOLERANCE - error)


def suite_max_principle(case: Case) -> None:
    """
    The maximum principle for discrete harmonic functions and for the conformal
    factor between two flat Delaunay metrics.
    """
    T, phi, l, _, l2 = flat_conformal_pair(case, 2)

    graph = WeightedGraph.from_edge_weights(cot_weights(l))
    f = random_boundary_factor(T, case.rng, amplitude=1.0)
    case.keep_factor("data", f)
    h = dirichlet_solve(graph, T.interior_vertices, f)
    report = max_principle_check(graph, T.interior_vertices, h)
    case.check("harmonic", report.ok, report.margin + HARMONIC_TOLERANCE)

    ring = conformal_max_principle_check(l, l2, vertex=0, tolerance=HARMONIC_TOLERANCE)
    case.check("ring", ring.ok, ring.margin + HARMONIC_TOLERANCE)
    whole = conformal_max_principle_check(l, l2, tolerance=HARMONIC_TOLERANCE)
    case.check("global", whole.ok, whole.margin + HARMONIC_TOLERANCE)


def suite_hyperbolic(case: Case) -> None:
    """
    Factor conversion between the Euclidean and hyperbolic metrics of two conformal
    fans in the unit disk, and the hyperbolic 1-ring of each fan.
    """
    T, fan, l, _, l2 = flat_conformal_pair(case, 1)
    scale = 0.2
    radii, turns = case.rng.random(2), case.rng.random(2)
    offsets = 0.5 * np.sqrt(radii) * np.exp(2j * np.pi * turns)
    phi = DiskEmbedding(T, scale * fan.positions + offsets[0])
    developed = develop_flat_metric(l2, anchor=(0, 1))
    phi2 = DiskEmbedding(T, scale * developed.positions + offsets[1])
    case.keep_mesh("disk", T, embedding=phi)
    case.keep_mesh("disk2", T, embedding=phi2)

    fit = recover_conformal_factor(
        PLMetric.from_embedding(phi), PLMetric.from_embedding(phi2)
    )
    u_h = convert_factor_euclidean_to_hyperbolic(fit.u, phi, phi2)
    l_h, l_h2 = ph_from_disk_embedding(phi), ph_from_disk_embedding(phi2)
    residual = max(
        abs(
            math.log(math.sinh(l_h2[i, j] / 2))
            - (u_h[i] + u_h[j]) / 2
            - math.log(math.sinh(l_h[i, j] / 2))
        )
        for i, j in T.edges
    )
    case.check(
        "conversion", residual <= HYPERBOLIC_TOLERANCE, HYPERBOLIC_TOLERANCE - residual
    )

    for label, embedding in (("turns", phi), ("turns2", phi2)):
        epsilon = float(
            np.min(corner_angles(PLMetric.from_embedding(embedding)).angles)
        )
        try:
            ring = induced_hyp_embedding(embedding, 0, epsilon)
        except ConditionViolatedError as e:
            raise Discard(str(e)) from e

        error = abs(ring.turn_sum - 2 * math.pi)
        case.check(label, error <= FLATNESS_BOUND, FLATNESS_BOUND - error)

    try:
        report = hyp_max_principle_check(phi, phi2, vertex=0)
    except HypothesisViolatedError as e:
        raise Discard(str(e)) from e
    case.check("hyperbolic-max-principle", report.ok)


def suite_flow(case: Case) -> None:
    """
    Flatness, the velocity bound and the Lipschitz bound on u along the conformal
    flow on hexagonal patches, and fourth-order convergence of the integrator.
    """
    radius = 2 + case.instance % 3
    T, phi = gen_hex_patch(radius)
    l = PLMetric.from_embedding(phi)
    cycle = T.boundary_cycle()
    if case.instance < 3:
        signs = [(-1) ** k for k in range(len(cycle))]
    else:
        signs = list(case.rng.choice([-1, 1], len(cycle)))
    velocity = {v: float(sign) for v, sign in zip(cycle, signs)}
    case.keep_mesh("mesh", T, embedding=phi)
    case.keep_factor("velocity", velocity)

    t_end = delta = 0.05
    trajectory = conformal_flow(l, velocity, t_end, delta)
    flatness = max(state.flatness for state in trajectory.states)
    case.check("flatness", flatness <= FLATNESS_BOUND, FLATNESS_BOUND - flatness)

    low, high = min(velocity.values()), max(velocity.values())
    for state in trajectory.states:
        for v in T.interior_vertices:
            x = state.velocity[v]
            margin = min(x - low, high - x) + VELOCITY_SLACK
            case.check("velocity-bound", margin >= 0, margin)

    speed = max(abs(x) for x in velocity.values())
    for state in trajectory.states:
        margin = state.time * speed + LIPSCHITZ_SLACK - state.norm
        case.check("lipschitz", margin >= 0, margin)

    endpoints = [
        conformal_flow(l, velocity, t_end, delta, max_step=h, project=False).final.u
        for h in (0.05, 0.025, 0.0125)
    ]
    coarse = max(abs(endpoints[0][v] - endpoints[1][v]) for v in T.vertices)
    fine = max(abs(endpoints[1][v] - endpoints[2][v]) for v in T.vertices)
    ratio = coarse / fine if fine > 0 else math.inf
    low_ratio, high_ratio = CONVERGENCE_RATIO
    case.check(
        "order",
        low_ratio <= ratio <= high_ratio,
        min(ratio - low_ratio, high_ratio - ratio),
    )


def suite_vel(case: Case) -> None:
    """
    Duality of edge conductance and effective resistance on random weighted grids,
    the He inequality on cotangent-weighted patches, additivity over nested rings,
    and, for the first instance, monotone growth over doubling rings.
    """
    grid = nx.convert_node_labels_to_integers(
        nx.grid_2d_graph(4, 4), ordering="sorted"
    )
    weights = {
        (i, j): float(w)
        for (i, j), w in zip(grid.edges, case.rng.uniform(0.5, 2.0, len(grid.edges)))
    }
    G = WeightedGraph(weights)
    V1, V2 = list(range(4)), list(range(12, 16))
    product = edge_conductance(G, V1, V2) * effective_resistance(G, V1, V2)
    error = abs(product - 1)
    case.check("duality", error <= DUALITY_TOLERANCE, DUALITY_TOLERANCE - error)

    T, phi = jittered_hex_patch(3, case.rng)
    case.keep_mesh("mesh", T, embedding=phi)
    graph = WeightedGraph.from_edge_weights(cot_weights(PLMetric.from_embedding(phi)))
    C = max(sum(graph.mu(v, w) for w in graph.graph[v]) for v in graph.vertices)
    he = he_inequality_check(graph, [0], sorted(T.boundary_vertices), C)
    case.check("he-inequality", he.ok, he.slack)

    rings = _combinatorial_rings(T, 0)
    additivity = vel_additivity_check(T.vertex_graph(), rings[:4])
    case.check("additivity", additivity.ok, additivity.slack)

    if case.instance == 0:
        _, lattice = gen_hex_patch(10)
        growth = parabolicity_growth(lattice, 3)
        case.check("growth", growth.nondecreasing)


def suite_schwarz(case: Case) -> None:
    """
    The lower bound on the conformal factor between a flat patch inside ``|z| <= r``
    and a conformal flat patch covering ``|z| < r2``, together with the geometric
    estimates of both patches.
    """
    T, phi, l, _, l2 = flat_conformal_pair(case, 4)
    phi2 = develop_flat_metric(l2, anchor=(0, 1))
    case.keep_mesh("image", T, embedding=phi2)

    epsilon = min(
        math.pi / 6,
        float(np.min(corner_angles(l).angles)),
        float(np.min(corner_angles(l2).angles)),
    )
    for label, embedding in (("estimates", phi), ("estimates2", phi2)):
        geometric_estimates_check(embedding, epsilon)
        case.check(label, True)

    containment = containment_radii(phi, 0)
    if containment.c_emp is not None:
        case.measure("containment", containment.c_emp)
    case.measure("epsilon", epsilon)

    centered = phi.transformed(lambda z: z - phi[0])
    r = float(np.max(np.abs(centered.positions[list(T.vertices)])))
    r2 = containment_radii(phi2, 0).r_inner
    try:
        report = schwarz_verify(T, centered, phi2, r, r2, epsilon)
    except HypothesisViolatedError as e:
        raise Discard(str(e)) from e
    case.check("schwarz", report.ok, report.margin)


RIGIDITY_PROFILES = [("constant", (2, 4, 8)), ("dipole", (2, 4, 8))]


def suite_rigidity(case: Case) -> None:
    """
    Oscillation of the flat factor near the center of growing patches: none for a
    constant boundary profile, strictly decreasing for the dipole.
    """
    profile, radii = RIGIDITY_PROFILES[case.instance]
    report = rigidity_experiment(radii, profile)
    if profile == "constant":
        worst = max(row.oscillation for row in report.rows)
        case.check("constant", worst <= HARMONIC_TOLERANCE, HARMONIC_TOLERANCE - worst)
    else:
        case.check("decreasing", report.strictly_decreasing)


SUITES: Dict[str, Tuple[Callable[[Case], None], int]] = {
    "jacobian": (suite_jacobian, 100),
    "max-principle": (suite_max_principle, 200),
    "hyperbolic": (suite_hyperbolic, 100),
    "flow": (suite_flow, 3),
    "vel": (suite_vel, 50),
    "schwarz": (suite_schwarz, 50),
    "rigidity": (suite_rigidity, len(RIGIDITY_PROFILES)),
}
SUITE_NAMES = tuple(SUITES) + ("all",)


def _interior_curvatures(
    l: PLMetric, u: ConformalFactor, interior: List[int]
) -> np.ndarray:
    K = curvature(conformal_change(l, u)).interior
    return np.array([K[i] for i in interior])


def _combinatorial_rings(T: Triangulation, center: int) -> List[frozenset]:
    distances = nx.single_source_shortest_path_length(T.vertex_graph(), center)
    rings: Dict[int, set] = {}
    for v, d in distances.items():
        rings.setdefault(d, set()).add(v)
    return [frozenset(rings[d]) for d in sorted(rings)]


def _finite_or_none(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value):
        return None
    return value
