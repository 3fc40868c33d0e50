"""
The implementation of the `dcglab` command-line tool.
"""
import contextlib
import math
import sys

import click
from tabulate import tabulate

from .complex import gen_hex_patch, gen_random_delaunay_disk
from .exceptions import (
    CheckFailedError,
    DcglabError,
    HypothesisViolatedError,
    NumericalError,
    ViolatedTriangleInequalityError,
)
from .flow import PROFILES, boundary_angles, conformal_flow, profile_function
from .flow import yamabe_solve
from .formats import (
    load_mesh_or_error,
    mesh_to_json,
    read_factor,
    write_curvature_csv,
    write_dilatation_csv,
    write_factor,
    write_mesh,
    write_trajectory_csv,
    write_weights_csv,
)
from .harmonic import WeightedGraph, effective_resistance
from .layout import (
    containment_radii,
    develop_flat_metric,
    pl_map_dilatation,
    schwarz_verify,
    write_svg,
)
from .metric import (
    conformal_change,
    corner_angles,
    cot_weights,
    curvature,
    delaunay_check,
    validate_nondegeneracy,
)
from .network import (
    annulus_modulus,
    edge_conductance,
    he_inequality_check,
    vertex_modulus,
)
from .suites import ARTIFACT_DIRECTORY, SUITE_NAMES, SUITES, dump_reports, run_suite

# Help strings used in multiple places.
HELP_DEBUG = "Print a trace of every solver iteration."
HELP_INNER = "Vertices with |z| <= INNER form the first terminal set."
HELP_OUTER = "Vertices with |z| >= OUTER form the second terminal set."
HELP_OUTPUT = "Write the result to this file instead of standard output."
HELP_SEED = "Seed of the random generator. Defaults to the DCG_SEED variable, or 0."
HELP_STABLE_OUTPUT = (
    "Leave timings out of the report, so that identical runs produce identical "
    + "files."
)
HELP_VELOCITY = (
    "Boundary velocity: +1 everywhere, +1 and -1 alternating along the boundary, "
    + "or the cosine of the polar angle."
)


@click.group()
def cli():
    pass


@cli.command(name="gen")
@click.argument("kind", type=click.Choice(["hex", "random-delaunay"]))
@click.option("--radius", type=int, default=None, help="Radius of the hex patch.")
@click.option("--n", "n", type=int, default=50, help="Number of random points.")
@click.option("--seed", type=int, default=0, envvar="DCG_SEED", help=HELP_SEED)
@click.option("-o", "--output", default=None, help=HELP_OUTPUT)
def main_gen(kind, *, radius, n, seed, output):
    """
    Generate a mesh: a hexagonal lattice patch or the Delaunay triangulation of
    random points in the unit disk.
    """
    with reporting_errors():
        if kind == "hex":
            if radius is None:
                report_error_and_exit("--radius is required for hex", exit_code=2)
            T, phi = gen_hex_patch(radius)
        else:
            T, phi = gen_random_delaunay_disk(n, seed)

        if output is None:
            sys.stdout.write(mesh_to_json(T, embedding=phi))
        else:
            write_mesh(output, T, embedding=phi)
            print(
                f"Wrote mesh with {pluralize(len(T.vertices), 'vertex', 'vertices')} "
                + f"and {pluralize(len(T.faces), 'face')} to {output}."
            )


@cli.command(name="analyze")
@click.argument("mesh_path")
@click.option(
    "--epsilon", type=float, default=None, help="Also check every angle >= EPSILON."
)
@click.option("--curvature-csv", default=None, help="Write curvatures to this file.")
@click.option("--weights-csv", default=None, help="Write cotangent weights here.")
def main_analyze(mesh_path, *, epsilon, curvature_csv, weights_csv):
    """
    Report the Delaunay class, angles, curvature and cotangent weights of a mesh.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        T = mesh.triangulation
        l = mesh.require_metric()
        report = delaunay_check(l)
        K = curvature(l)
        weights = cot_weights(l)
        edge, min_mu = weights.min_interior()
        min_angle = float(corner_angles(l).angles.min())

        rows = [
            ("vertices", len(T.vertices)),
            ("interior vertices", len(T.interior_vertices)),
            ("faces", len(T.faces)),
            ("classification", str(report)),
            ("epsilon*", report.epsilon_star),
            ("min angle", min_angle),
            ("max |K|", K.max_abs()),
            ("total curvature", K.total()),
            ("min interior mu", "-" if edge is None else f"{min_mu!r} at {edge}"),
        ]
        if epsilon is not None:
            angles = validate_nondegeneracy(l, epsilon)
            rows.append(
                (
                    "angles >= epsilon",
                    "yes"
                    if angles.ok
                    else f"no (vertex {angles.vertex} of face {angles.face})",
                )
            )
        prettyprint_row(rows)

        if curvature_csv is not None:
            write_curvature_csv(curvature_csv, K)
        if weights_csv is not None:
            write_weights_csv(weights_csv, weights)


@cli.command(name="conformal")
@click.argument("mesh_path")
@click.argument("factor_path")
@click.option("-o", "--output", required=True, help="Write the new mesh here.")
def main_conformal(mesh_path, factor_path, *, output):
    """
    Apply a conformal factor to the metric of a mesh.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        u = read_factor(factor_path)
        try:
            l2 = conformal_change(mesh.require_metric(), u)
        except ViolatedTriangleInequalityError as e:
            report_error_and_exit(str(e), exit_code=1)

        write_mesh(output, mesh.triangulation, metric=l2)
        print(f"Wrote conformal metric to {output}.")


@cli.command(name="flow")
@click.argument("mesh_path")
@click.option(
    "--velocity",
    type=click.Choice(["constant", "alternating", "dipole"]),
    default="alternating",
    help=HELP_VELOCITY,
)
@click.option("--t-end", type=float, required=True, help="Time to flow for.")
@click.option(
    "--delta",
    type=float,
    default=0.25,
    show_default=True,
    help="The flow must keep |u| < 2 DELTA.",
)
@click.option("--max-step", type=float, default=0.01, help="Largest time step.")
@click.option("--csv", "csv_path", default=None, help="Write the trajectory here.")
@click.option("--debug", is_flag=True, default=False, help=HELP_DEBUG)
def main_flow(mesh_path, *, velocity, t_end, delta, max_step, csv_path, debug):
    """
    Run the conformal flow with a constant boundary velocity.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        T = mesh.triangulation
        if velocity == "constant":
            v = {i: 1.0 for i in T.boundary_vertices}
        elif velocity == "alternating":
            v = {i: float((-1) ** k) for k, i in enumerate(T.boundary_cycle())}
        else:
            angles = boundary_angles(mesh.require_embedding())
            v = {i: math.cos(theta) for i, theta in angles.items()}

        trajectory = conformal_flow(
            mesh.require_metric(), v, t_end, delta, max_step=max_step, debug=debug
        )
        prettyprint_rows(
            [
                {"t": state.time, "|u|": state.norm, "max |K|": state.flatness}
                for state in trajectory.states
            ]
        )
        print()
        steps = len(trajectory.states) - 1
        print(f"{pluralize(steps, 'step')}, {trajectory.termination}.")

        if csv_path is not None:
            write_trajectory_csv(csv_path, trajectory)


@cli.command(name="yamabe")
@click.argument("mesh_path")
@click.option(
    "--profile", type=click.Choice(PROFILES), required=True, help="Boundary profile."
)
@click.option("--amplitude", type=float, default=0.1, help="Profile amplitude.")
@click.option("-o", "--output", default=None, help="Write the factor here.")
@click.option("--debug", is_flag=True, default=False, help=HELP_DEBUG)
def main_yamabe(mesh_path, *, profile, amplitude, output, debug):
    """
    Find the flat metric conformal to the mesh with a prescribed boundary factor.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        T = mesh.triangulation
        boundary_profile = profile_function(profile, amplitude)
        if profile in ("zero", "constant"):
            angles = {i: 0.0 for i in T.boundary_vertices}
        else:
            angles = boundary_angles(mesh.require_embedding())

        boundary_u = {i: boundary_profile(theta) for i, theta in angles.items()}
        solution = yamabe_solve(mesh.require_metric(), boundary_u, debug=debug)
        prettyprint_row(
            [
                ("iterations", solution.iterations),
                ("residual", solution.residual),
                ("min u", min(solution.u.values())),
                ("max u", max(solution.u.values())),
            ]
        )

        if output is not None:
            write_factor(output, solution.u)


@cli.command(name="vel")
@click.argument("mesh_path")
@click.option("--inner", type=float, required=True, help=HELP_INNER)
@click.option("--outer", type=float, required=True, help=HELP_OUTER)
@click.option(
    "--mode",
    type=click.Choice(["vertex", "edge"]),
    default="vertex",
    help="Vertex extremal length, or edge extremal length for cotangent weights.",
)
@click.option("--debug", is_flag=True, default=False, help=HELP_DEBUG)
def main_vel(mesh_path, *, inner, outer, mode, debug):
    """
    Extremal length between the vertices near the origin and those far from it.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        V1, V2 = _terminals(mesh, inner, outer)
        if mode == "vertex":
            solution = vertex_modulus(
                mesh.triangulation.vertex_graph(), V1, V2, debug=debug
            )
            modulus = solution.objective
        else:
            graph = WeightedGraph.from_edge_weights(cot_weights(mesh.require_metric()))
            modulus = edge_conductance(graph, V1, V2, debug=debug)

        rows = [
            ("mode", mode),
            ("inner vertices", len(V1)),
            ("outer vertices", len(V2)),
            ("modulus", modulus),
            ("extremal length", 1 / modulus),
        ]
        if 0 < inner < outer:
            rows.append(("round annulus modulus", annulus_modulus(inner, outer)))
        prettyprint_row(rows)


@cli.command(name="resistance")
@click.argument("mesh_path")
@click.option("--inner", type=float, required=True, help=HELP_INNER)
@click.option("--outer", type=float, required=True, help=HELP_OUTER)
@click.option(
    "--he",
    is_flag=True,
    default=False,
    help="Also compare the vertex extremal length with twice the resistance times "
    + "the largest weight sum.",
)
@click.option("--debug", is_flag=True, default=False, help=HELP_DEBUG)
def main_resistance(mesh_path, *, inner, outer, he, debug):
    """
    Effective resistance for the cotangent weights of the mesh.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        V1, V2 = _terminals(mesh, inner, outer)
        weights = cot_weights(mesh.require_metric())
        graph = WeightedGraph.from_edge_weights(weights)
        resistance = effective_resistance(graph, V1, V2, debug=debug)
        rows = [("resistance", resistance), ("conductance", 1 / resistance)]

        report = None
        if he:
            C = max(weights.vertex_sums().values())
            report = he_inequality_check(graph, V1, V2, C)
            rows += [
                ("weight sum bound", C),
                ("vertex extremal length", report.vel),
                ("2 C resistance", report.bound),
                ("slack", report.slack),
            ]
        prettyprint_row(rows)

        if report is not None and not report.ok:
            report_error_and_exit(
                f"extremal length exceeds the bound by {-report.slack!r}", exit_code=1
            )


@cli.command(name="schwarz")
@click.argument("mesh_path")
@click.argument("factor_path")
@click.option("--epsilon", type=float, required=True, help="Angle bound, <= pi/6.")
@click.option(
    "--center",
    type=int,
    default=None,
    help="Vertex placed at the origin. Defaults to the vertex nearest the origin.",
)
def main_schwarz(mesh_path, factor_path, *, epsilon, center):
    """
    Check the Schwarz lower bound for a mesh and a flat conformal factor.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        phi = mesh.require_embedding()
        T = mesh.triangulation
        u = read_factor(factor_path)
        if center is None:
            center = min(T.vertices, key=lambda i: (abs(phi[i]), i))
        elif center not in T.index:
            report_error_and_exit(f"vertex {center} is not in the mesh", exit_code=2)

        l2 = conformal_change(mesh.require_metric(), u)
        phi2 = develop_flat_metric(l2, anchor=(center, min(T.neighbors[center])))
        origin = phi[center]
        centered = phi.transformed(lambda z: z - origin)
        r = max(abs(centered[i]) for i in T.vertices)
        r2 = containment_radii(phi2, center).r_inner
        report = schwarz_verify(T, centered, phi2, r, r2, epsilon)
        prettyprint_row(
            [
                ("r", r),
                ("r'", r2),
                ("M", report.M),
                ("bound", report.bound),
                ("vertices checked", len(report.checked)),
                ("margin", report.margin),
                ("tightest vertex", report.witness),
            ]
        )


@cli.command(name="suite")
@click.argument("name", type=click.Choice(SUITE_NAMES))
@click.option(
    "--instances",
    type=int,
    default=None,
    help="Number of instances. Each suite has its own default.",
)
@click.option("--seed", type=int, default=0, envvar="DCG_SEED", help=HELP_SEED)
@click.option("--jobs", type=int, default=1, help="Number of worker processes.")
@click.option("-o", "--output", default=None, help="Write the JSON report here.")
@click.option(
    "--artifacts",
    default=ARTIFACT_DIRECTORY,
    show_default=True,
    help="Directory for the inputs of failed instances.",
)
@click.option("--stable-output", is_flag=True, default=False, help=HELP_STABLE_OUTPUT)
def main_suite(name, *, instances, seed, jobs, output, artifacts, stable_output):
    """
    Run a verification suite. The exit code is 1 if any instance fails.
    """
    with reporting_errors():
        names = list(SUITES) if name == "all" else [name]
        reports = [
            run_suite(
                suite,
                instances=instances,
                seed=seed,
                jobs=jobs,
                artifact_dir=artifacts,
            )
            for suite in names
        ]

        prettyprint_rows(
            [
                {
                    "suite": report.suite,
                    "instances": report.instances,
                    "passed": report.count("pass"),
                    "failed": report.count("fail"),
                    "discarded": report.count("discarded"),
                    "result": blue("pass") if report.passed else red("FAIL"),
                }
                for report in reports
            ]
        )

        failures = [(r.suite, f) for r in reports for f in r.failures]
        if failures:
            print()
            for suite, failure in failures:
                print(f"- {suite} #{failure.instance}: {failure.message}")
                for path in failure.artifacts:
                    print(f"  {path}")

        if output is not None:
            with open(output, "w", encoding="utf-8") as f:
                f.write(dump_reports(reports, stable=stable_output))

        if failures:
            sys.exit(1)


@cli.command(name="dilatation")
@click.argument("mesh_path")
@click.argument("image_path")
@click.option("--csv", "csv_path", default=None, help="Write per-face values here.")
def main_dilatation(mesh_path, image_path, *, csv_path):
    """
    Measure the dilatation of the piecewise-linear map between two embeddings of
    the same complex.
    """
    with reporting_errors():
        phi = load_mesh_or_error(mesh_path).require_embedding()
        phi2 = load_mesh_or_error(image_path).require_embedding()
        report = pl_map_dilatation(phi, phi2)
        worst = phi.triangulation.faces[int(report.per_face.argmax())]
        prettyprint_row(
            [
                ("faces", len(report.per_face)),
                ("max dilatation", report.max),
                ("worst face", str(worst)),
            ]
        )

        if csv_path is not None:
            write_dilatation_csv(csv_path, report)


@cli.command(name="render-svg")
@click.argument("mesh_path")
@click.option("-o", "--output", required=True, help="Write the SVG file here.")
@click.option("--values", default=None, help="Color faces by this vertex function.")
def main_render_svg(mesh_path, *, output, values):
    """
    Draw a mesh with positions as an SVG file.
    """
    with reporting_errors():
        mesh = load_mesh_or_error(mesh_path)
        u = read_factor(values) if values is not None else None
        write_svg(mesh.require_embedding(), output, u)
        print(f"Wrote {output}.")


def _terminals(mesh, inner, outer):
    phi = mesh.require_embedding()
    T = mesh.triangulation
    V1 = [i for i in T.vertices if abs(phi[i]) <= inner]
    V2 = [i for i in T.vertices if abs(phi[i]) >= outer]
    if not V1:
        report_error_and_exit(f"no vertex lies within |z| <= {inner!r}", exit_code=2)
    if not V2:
        report_error_and_exit(f"no vertex lies outside |z| >= {outer!r}", exit_code=2)
    if set(V1) & set(V2):
        report_error_and_exit("the terminal sets overlap", exit_code=2)

    return V1, V2


@contextlib.contextmanager
def reporting_errors():
    """
    Report library errors as `Error: ...` and exit: 1 when a statement under test
    fails or its hypotheses do not hold, 3 for numerical failures, 2 otherwise.
    """
    try:
        yield
    except CheckFailedError as e:
        report_error_and_exit(f"check failed: {e}", exit_code=1)
    except HypothesisViolatedError as e:
        report_error_and_exit(f"hypothesis violated: {e}", exit_code=1)
    except NumericalError as e:
        report_error_and_exit(f"numerical failure: {e}", exit_code=3)
    except DcglabError as e:
        report_error_and_exit(str(e), exit_code=2)


def prettyprint_rows(rows):
    headers = list(rows[0].keys())
    print(tabulate([list(row.values()) for row in rows], headers=headers))


def prettyprint_row(row):
    print(tabulate(row))


def red(s):
    return click.style(s, fg="red")


def blue(s):
    return click.style(s, fg="blue")


def pluralize(n, word, plural=None):
    if n == 1:
        return f"{n} {word}"
    else:
        return f"{n} {plural or word + 's'}"


def report_error_and_exit(message, *, exit_code):
    print(f"Error: {message}", file=sys.stderr)
    sys.exit(exit_code)
