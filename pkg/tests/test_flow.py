import math
import unittest

from dcglab import DcglabApiError, HypothesisViolatedError, PLMetric
from dcglab.flow import (
    boundary_angles,
    conformal_flow,
    flow_toward,
    normalized_boundary_velocity,
    profile_function,
    rigidity_experiment,
    yamabe_solve,
)
from dcglab.metric import conformal_change, curvature

from . import meshes


def alternating(T):
    return {i: float((-1) ** k) for k, i in enumerate(T.boundary_cycle())}


class ConformalFlowTests(unittest.TestCase):
    def test_zero_velocity(self):
        T, _, l = meshes.hex_metric(2)

        still = {i: 0.0 for i in T.boundary_vertices}

        trajectory = conformal_flow(l, still, 0.05, 0.05)
        for value in trajectory.final.u.values():
            self.assertEqual(value, 0.0)

    def test_constant_velocity_scales(self):
        T, _, l = meshes.hex_metric(2)

        outward = {i: 1.0 for i in T.boundary_vertices}

        trajectory = conformal_flow(l, outward, 0.05, 0.05)
        self.assertEqual(trajectory.termination, "completed")
        self.assertAlmostEqual(trajectory.times[-1], 0.05, places=15)
        for state in trajectory.states:
            for value in state.u.values():
                self.assertAlmostEqual(value, state.time, places=10)

    def test_flatness_is_kept(self):
        T, _, l = meshes.hex_metric(3)

        trajectory = conformal_flow(l, alternating(T), 0.05, 0.05)
        for state in trajectory.states:
            self.assertLessEqual(state.flatness, 1e-8)
            self.assertLess(state.norm, 0.1)
            for i in T.boundary_vertices:
                self.assertAlmostEqual(
                    state.u[i], state.time * trajectory.boundary_velocity[i], places=12
                )

    def test_velocity_is_bounded_by_boundary_velocity(self):
        T, _, l = meshes.hex_metric(3)

        trajectory = conformal_flow(l, alternating(T), 0.05, 0.05)
        for state in trajectory.states:
            for value in state.velocity.values():
                self.assertLessEqual(abs(value), 1 + 1e-10)

    def test_factor_grows_at_most_linearly(self):
        T, phi, l = meshes.hex_metric(3)
        v = {i: 0.5 * math.cos(theta) for i, theta in boundary_angles(phi).items()}

        trajectory = conformal_flow(l, v, 0.05, 0.05)
        for state in trajectory.states:
            self.assertLessEqual(state.norm, state.time * 0.5 + 1e-8)

    def test_projection_barely_moves_the_endpoint(self):
        T, _, l = meshes.hex_metric(2)
        v = alternating(T)

        projected = conformal_flow(l, v, 0.05, 0.05, max_step=0.0125).final.u
        free = conformal_flow(
            l, v, 0.05, 0.05, max_step=0.0125, project=False
        ).final.u
        for i in T.vertices:
            self.assertAlmostEqual(projected[i], free[i], places=6)

    def test_arguments(self):
        T, _, l = meshes.hex_metric(1)
        v = {i: 1.0 for i in T.boundary_vertices}

        with self.assertRaises(DcglabApiError):
            conformal_flow(l, {i: 2.0 for i in T.boundary_vertices}, 0.05, 0.05)

        with self.assertRaises(DcglabApiError):
            conformal_flow(l, v, 0.1, 0.05)

        with self.assertRaises(DcglabApiError):
            conformal_flow(l, v, 0.05, 0.0)

    def test_curved_metric(self):
        l = meshes.five_fan_metric()

        with self.assertRaises(HypothesisViolatedError):
            conformal_flow(l, {i: 1.0 for i in range(1, 6)}, 0.01, 0.05)


class YamabeTests(unittest.TestCase):
    def test_zero_boundary(self):
        T, _, l = meshes.hex_metric(3)

        solution = yamabe_solve(l, {i: 0.0 for i in T.boundary_vertices})
        for value in solution.u.values():
            self.assertAlmostEqual(value, 0.0, places=12)

    def test_constant_boundary(self):
        T, _, l = meshes.hex_metric(3)

        solution = yamabe_solve(l, {i: 0.1 for i in T.boundary_vertices})
        for value in solution.u.values():
            self.assertAlmostEqual(value, 0.1, places=10)

    def test_dipole_boundary(self):
        T, phi, l = meshes.hex_metric(4)
        boundary_u = {
            i: 0.1 * math.cos(theta) for i, theta in boundary_angles(phi).items()
        }

        solution = yamabe_solve(l, boundary_u)
        self.assertLessEqual(solution.residual, 1e-10)
        self.assertEqual(solution.history[-1], solution.residual)

        K = curvature(conformal_change(l, solution.u))
        self.assertLessEqual(K.max_abs(), 1e-10)

    def test_newton_converges_quadratically(self):
        T, _, l = meshes.hex_metric(3)
        boundary_u = {i: 0.2 * x for i, x in alternating(T).items()}

        history = yamabe_solve(l, boundary_u).history
        self.assertGreaterEqual(len(history), 3)

        tail = [
            (before, after)
            for before, after in zip(history, history[1:])
            if before <= 1e-3
        ]
        self.assertTrue(tail)
        for before, after in tail:
            # Below 1e-12 the residual is rounding noise.
            self.assertLessEqual(after, max(100 * before**2, 1e-12))

    def test_agrees_with_flow(self):
        T, phi, l = meshes.hex_metric(4)
        direction = {i: math.cos(theta) for i, theta in boundary_angles(phi).items()}

        flowed = conformal_flow(l, direction, 0.1, 0.1).final.u
        solution = yamabe_solve(l, {i: 0.1 * x for i, x in direction.items()})
        for i in T.vertices:
            self.assertAlmostEqual(flowed[i], solution.u[i], delta=1e-6)

    def test_non_delaunay_metric(self):
        T, phi = meshes.kite()

        with self.assertRaises(HypothesisViolatedError):
            yamabe_solve(PLMetric.from_embedding(phi), {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.0})


class RigidityTests(unittest.TestCase):
    def test_constant_profile(self):
        report = rigidity_experiment([2, 4], "constant")

        self.assertEqual([row.radius for row in report.rows], [2, 4])
        self.assertEqual([row.vertices for row in report.rows], [19, 61])
        for row in report.rows:
            self.assertLessEqual(row.oscillation, 1e-10)

    def test_dipole_profile(self):
        report = rigidity_experiment([2, 4, 8], "dipole", amplitude=0.1)

        self.assertEqual(report.center_radius, 1.0)
        for row in report.rows:
            self.assertGreater(row.oscillation, 0)
            self.assertLess(row.oscillation, 0.2)
            self.assertLessEqual(row.residual, 1e-10)

        self.assertTrue(report.strictly_decreasing)

    def test_oscillation_is_measured_on_a_fixed_region(self):
        wide = rigidity_experiment([2, 4], "dipole", center_radius=2.0)
        narrow = rigidity_experiment([2, 4], "dipole")

        self.assertEqual(wide.center_radius, 2.0)
        # The wider region holds the boundary vertices at 2 and -2 of the first patch.
        self.assertGreaterEqual(wide.rows[0].oscillation, 0.2 - 1e-12)
        self.assertLess(narrow.rows[0].oscillation, wide.rows[0].oscillation)

        with self.assertRaises(DcglabApiError):
            rigidity_experiment([2], "dipole", center_radius=0.0)

    def test_profiles(self):
        self.assertEqual(profile_function("zero", 0.1)(1.0), 0.0)
        self.assertEqual(profile_function("constant", 0.1)(1.0), 0.1)
        self.assertAlmostEqual(profile_function("dipole", 0.1)(math.pi), -0.1)
        self.assertAlmostEqual(profile_function("quadrupole", 0.1)(math.pi / 2), -0.1)

        with self.assertRaises(DcglabApiError):
            profile_function("octupole", 0.1)

        with self.assertRaises(DcglabApiError):
            profile_function("dipole", 0.5)

        with self.assertRaises(DcglabApiError):
            rigidity_experiment([], "zero")


class FlowTowardTests(unittest.TestCase):
    def test_normalized_velocity(self):
        self.assertEqual(
            normalized_boundary_velocity({1: 0.2, 2: -0.4}), {1: 0.5, 2: -1.0}
        )
        self.assertEqual(normalized_boundary_velocity({1: 0.0}), {1: 0.0})

    def test_gap_shrinks_by_delta(self):
        T, phi, l = meshes.hex_metric(2)
        target = {i: 0.1 * math.cos(theta) for i, theta in boundary_angles(phi).items()}

        trajectory, report = flow_toward(l, target, 0.05)
        self.assertTrue(report.applicable)
        self.assertTrue(report.ok)
        self.assertAlmostEqual(report.bound, 0.05, places=12)
        self.assertLessEqual(report.max_gap, 0.05 + 1e-10)

    def test_small_target(self):
        T, _, l = meshes.hex_metric(2)

        _, report = flow_toward(l, {i: 0.01 for i in T.boundary_vertices}, 0.05)
        self.assertFalse(report.applicable)
        self.assertTrue(report.ok)
