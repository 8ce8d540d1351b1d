"""Tests for the rotation and frame-transform utilities."""
import unittest

import numpy as np

from exceptions import FrameMismatchError
from geometry.rotations import (UnitQuaternion, quat_exp, quat_log, right_jacobian, right_jacobian_inv,
                                rot_z, skew, so3_exp, so3_log)
from geometry.transforms import FrameId, FramedVector, RigidTransform, transform_point


class TestRotations(unittest.TestCase):
    """Tests for quaternions and SO(3) helpers."""

    def test_skew_is_cross_product(self):
        """skew(a) @ b equals a x b."""
        a = np.array([0.3, -1.2, 2.0])
        b = np.array([1.5, 0.4, -0.7])
        np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-15)

    def test_identity_rotates_nothing(self):
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(UnitQuaternion.identity().rotate(v), v)

    def test_coefficients_are_normalized(self):
        q = UnitQuaternion(np.array([2.0, 0.0, 0.0, 0.0]))
        self.assertAlmostEqual(q.w, 1.0)
        with self.assertRaises(ValueError):
            UnitQuaternion(np.zeros(4))

    def test_quarter_turn_about_z(self):
        """Hamilton convention: a +90 deg yaw maps x onto y."""
        q = quat_exp(np.array([0.0, 0.0, np.pi / 2]))
        np.testing.assert_allclose(q.rotate([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(q.as_matrix(), rot_z(np.pi / 2), atol=1e-12)

    def test_product_matches_matrix_product(self):
        a = UnitQuaternion.from_euler(0.1, -0.4, 1.2)
        b = UnitQuaternion.from_euler(-0.7, 0.2, 0.3)
        np.testing.assert_allclose((a * b).as_matrix(), a.as_matrix() @ b.as_matrix(), atol=1e-12)

    def test_inverse(self):
        q = UnitQuaternion.from_euler(0.3, 0.2, -0.9)
        self.assertTrue((q * q.inverse()).is_close(UnitQuaternion.identity()))

    def test_matrix_roundtrip_all_branches(self):
        """from_matrix covers every branch of the conversion, including near-pi rotations."""
        for phi in ([0.2, -0.1, 0.3], [3.1, 0.0, 0.0], [0.0, 3.1, 0.0], [0.0, 0.0, 3.1], [2.0, 2.0, 0.5]):
            q = quat_exp(np.array(phi))
            recovered = UnitQuaternion.from_matrix(q.as_matrix())
            self.assertTrue(recovered.is_close(q), msg=f"failed for {phi}")

    def test_canonical_and_double_cover(self):
        q = UnitQuaternion(np.array([-0.5, 0.5, 0.5, 0.5]))
        self.assertGreaterEqual(q.canonical().w, 0.0)
        self.assertTrue(q.is_close(UnitQuaternion(-q.coeffs)))

    def test_half_turn_log_ignores_sign(self):
        for coeffs in ([0.0, 0.0, 0.0, 1.0], [0.0, -0.6, 0.8, 0.0], [0.0, 0.0, -1.0, 0.0]):
            q = UnitQuaternion(np.array(coeffs))
            minus = UnitQuaternion(-q.coeffs)
            np.testing.assert_array_equal(q.canonical().coeffs, minus.canonical().coeffs)
            np.testing.assert_allclose(quat_log(q), quat_log(minus), atol=1e-15)
            self.assertAlmostEqual(np.linalg.norm(quat_log(q)), np.pi)
        np.testing.assert_allclose(quat_log(UnitQuaternion(np.array([0.0, 0.0, 0.0, -1.0]))),
                                   [0.0, 0.0, np.pi], atol=1e-15)

    def test_euler_roundtrip(self):
        angles = np.array([0.2, -0.35, 2.5])
        np.testing.assert_allclose(UnitQuaternion.from_euler(*angles).as_euler(), angles, atol=1e-12)

    def test_exp_log_roundtrip(self):
        for phi in ([1e-12, 0.0, -2e-12], [0.4, -0.2, 0.1], [0.0, 0.0, 3.0]):
            phi = np.array(phi)
            np.testing.assert_allclose(quat_log(quat_exp(phi)), phi, atol=1e-12)

    def test_log_uses_principal_branch(self):
        phi = np.array([0.0, 0.0, 1.5 * np.pi])
        result = quat_log(quat_exp(phi))
        self.assertLessEqual(np.linalg.norm(result), np.pi + 1e-12)
        np.testing.assert_allclose(result, [0.0, 0.0, -0.5 * np.pi], atol=1e-12)

    def test_so3_exp_matches_quaternion(self):
        phi = np.array([0.3, -0.5, 0.8])
        np.testing.assert_allclose(so3_exp(phi), quat_exp(phi).as_matrix(), atol=1e-12)
        np.testing.assert_allclose(so3_log(so3_exp(phi)), phi, atol=1e-12)

    def test_right_jacobian_first_order(self):
        """Exp(phi + d) ~ Exp(phi) Exp(Jr(phi) d) for small d."""
        phi = np.array([0.4, -0.3, 0.6])
        delta = 1e-6 * np.array([1.0, -2.0, 0.5])
        lhs = so3_exp(phi + delta)
        rhs = so3_exp(phi) @ so3_exp(right_jacobian(phi) @ delta)
        np.testing.assert_allclose(lhs, rhs, atol=1e-11)

    def test_right_jacobian_inverse(self):
        for phi in ([0.4, -0.3, 0.6], [1e-8, 0.0, 0.0]):
            phi = np.array(phi)
            np.testing.assert_allclose(right_jacobian(phi) @ right_jacobian_inv(phi), np.eye(3), atol=1e-10)


class TestTransforms(unittest.TestCase):
    """Tests for frame-tagged vectors and rigid transforms."""

    def setUp(self):
        """Body-in-world pose and a camera-in-body mount."""
        self.world_body = RigidTransform(UnitQuaternion.from_euler(0.0, 0.0, np.pi / 2),
                                         np.array([1.0, 2.0, 3.0]), FrameId.BODY, FrameId.WORLD)
        self.body_camera = RigidTransform(UnitQuaternion.from_euler(0.1, 0.0, 0.0),
                                          np.array([0.3, 0.0, 0.04]), FrameId.CAMERA, FrameId.BODY)

    def test_framed_vector_arithmetic(self):
        a = FramedVector(np.array([1.0, 2.0, 3.0]), FrameId.BODY)
        b = FramedVector(np.array([0.5, 0.5, 0.5]), FrameId.BODY)
        np.testing.assert_allclose((a + b).value, [1.5, 2.5, 3.5])
        np.testing.assert_allclose((a - b).value, [0.5, 1.5, 2.5])
        self.assertAlmostEqual(a.dot(b), 3.0)
        np.testing.assert_allclose(a.scale(2.0).value, [2.0, 4.0, 6.0])

    def test_mixing_frames_raises(self):
        a = FramedVector(np.ones(3), FrameId.BODY)
        b = FramedVector(np.ones(3), FrameId.WORLD)
        with self.assertRaises(FrameMismatchError):
            a + b
        with self.assertRaises(FrameMismatchError):
            a.dot(b)

    def test_apply(self):
        point = FramedVector(np.array([1.0, 0.0, 0.0]), FrameId.BODY)
        result = self.world_body.apply(point)
        self.assertIs(result.frame, FrameId.WORLD)
        np.testing.assert_allclose(result.value, [1.0, 3.0, 3.0], atol=1e-12)

    def test_apply_wrong_frame_raises(self):
        with self.assertRaises(FrameMismatchError):
            self.world_body.apply(FramedVector(np.zeros(3), FrameId.CAMERA))

    def test_rotate_ignores_translation(self):
        vector = FramedVector(np.array([1.0, 0.0, 0.0]), FrameId.BODY)
        np.testing.assert_allclose(self.world_body.rotate(vector).value, [0.0, 1.0, 0.0], atol=1e-12)

    def test_compose_chains_frames(self):
        world_camera = self.world_body @ self.body_camera
        self.assertIs(world_camera.source, FrameId.CAMERA)
        self.assertIs(world_camera.target, FrameId.WORLD)
        p = FramedVector(np.array([0.2, -0.1, 1.5]), FrameId.CAMERA)
        np.testing.assert_allclose(world_camera.apply(p).value,
                                   self.world_body.apply(self.body_camera.apply(p)).value, atol=1e-12)

    def test_compose_mismatch_raises(self):
        with self.assertRaises(FrameMismatchError):
            self.body_camera @ self.world_body

    def test_inverse(self):
        identity = self.world_body @ self.world_body.inverse()
        self.assertTrue(identity.is_close(RigidTransform.identity(FrameId.WORLD, FrameId.WORLD)))

    def test_transform_point_checks_frames(self):
        point = np.array([0.0, 0.0, 1.0])
        np.testing.assert_allclose(
            transform_point(self.body_camera, point, FrameId.CAMERA, FrameId.BODY),
            self.body_camera.apply(FramedVector(point, FrameId.CAMERA)).value)
        with self.assertRaises(FrameMismatchError):
            transform_point(self.body_camera, point, FrameId.BODY, FrameId.WORLD)


if __name__ == "__main__":
    unittest.main()
