import copy
import os
import unittest

import numpy as np

from src.geometry.transforms import RigidTransform, Rotation
from src.kinematics.chain import forward_kinematics
from src.kinematics.chain_loader import REPO_ROOT, load_bundled_chain
from src.observation.detections import (
    DetectionFrame,
    MarkerDetection,
    ObservationSet,
    build_observation_set,
    link_pose_from_marker,
    load_detection_file,
    load_encoder_file,
    parse_encoders,
)
from src.observation.registry import ExoskeletonRegistry, load_bundled_registry
from src.utils.exceptions import BaseUnobservedError, ParseError, UnknownMarkerError, ValidationError

SAMPLE_FRAME = os.path.join(REPO_ROOT, "data", "frames", "sample_frame.json")
SAMPLE_ENCODERS = os.path.join(REPO_ROOT, "data", "frames", "sample_encoders.json")


class TestRegistry(unittest.TestCase):
    """外骨骼注册表测试"""

    def setUp(self):
        self.chain = load_bundled_chain()
        self.registry = load_bundled_registry(self.chain)
        self.document = self.registry.to_dict()

    def test_bundled_registry(self):
        self.assertEqual(self.registry.marker_ids, list(range(7)))
        self.assertEqual(len(self.registry.base_entries()), 1)
        self.assertEqual(self.registry.entry_for_marker(3).link_name, "lower_arm")

    def test_unknown_marker(self):
        with self.assertRaises(UnknownMarkerError) as ctx:
            self.registry.entry_for_marker(42)
        self.assertEqual(ctx.exception.marker_id, 42)
        self.assertIn("unknown marker", str(ctx.exception))

    def test_duplicate_marker_id(self):
        self.document["entries"][2]["marker_id"] = 1
        with self.assertRaises(ValidationError):
            ExoskeletonRegistry.from_dict(self.document)

    def test_link_not_in_chain(self):
        self.document["entries"][3]["link_name"] = "tentacle"
        registry = ExoskeletonRegistry.from_dict(self.document)
        with self.assertRaises(ValidationError) as ctx:
            registry.validate_against(self.chain)
        self.assertEqual(ctx.exception.subject, "tentacle")

    def test_missing_base_entry(self):
        self.document["entries"] = self.document["entries"][1:]
        with self.assertRaises(ValidationError):
            ExoskeletonRegistry.from_dict(self.document).validate_against(self.chain)

    def test_parse_error_location(self):
        del self.document["entries"][1]["t_exo_link"]
        with self.assertRaises(ParseError) as ctx:
            ExoskeletonRegistry.from_dict(self.document, source="registry.json")
        self.assertEqual(ctx.exception.location, "entries[1].t_exo_link")

    def test_marker_to_link(self):
        entry = self.registry.entry_for_marker(0)
        expected = entry.t_aruco_exo.compose(entry.t_exo_link)
        self.assertTrue(entry.marker_to_link.almost_equal(expected))


class TestDetectionFiles(unittest.TestCase):
    """检测帧和编码器读数文件"""

    def test_sample_frame(self):
        frame = load_detection_file(SAMPLE_FRAME)
        self.assertEqual(frame.frame_id, "sample_000")
        self.assertEqual(sorted(d.marker_id for d in frame.detections), list(range(7)))

    def test_marker_id_must_be_integer(self):
        with self.assertRaises(ParseError) as ctx:
            DetectionFrame.from_dict({"frame_id": "f", "detections": [
                {"marker_id": "3", "translation": [0, 0, 0], "quaternion": [1, 0, 0, 0]}]})
        self.assertEqual(ctx.exception.location, "detections[0].marker_id")

    def test_confidence_out_of_range(self):
        with self.assertRaises(ParseError):
            DetectionFrame.from_dict({"frame_id": "f", "detections": [
                {"marker_id": 3, "translation": [0, 0, 0], "quaternion": [1, 0, 0, 0], "confidence": 1.5}]})

    def test_encoders(self):
        encoders = load_encoder_file(SAMPLE_ENCODERS, 6)
        self.assertEqual(encoders.to_list(), [0.02, -0.01, 0.03, 0.0, -0.02, 0.01])
        self.assertEqual(parse_encoders([0.1, 0.2]).to_list(), [0.1, 0.2])
        with self.assertRaises(ValidationError):
            parse_encoders({"encoders": [0.1, 0.2]}, dof=6)
        with self.assertRaises(ParseError):
            parse_encoders({"encoders": "0.1"})


class TestObservationSet(unittest.TestCase):
    """由检测构造观测集合"""

    def setUp(self):
        self.chain = load_bundled_chain()
        self.registry = load_bundled_registry(self.chain)
        self.frame = load_detection_file(SAMPLE_FRAME)

    def test_sample_frame_matches_zero_configuration(self):
        obs = build_observation_set(self.frame.detections, self.registry, self.chain, frame_id="sample_000")
        self.assertEqual(obs.visible_links, [1, 2, 3, 4, 5, 6])
        self.assertTrue(obs.camera_pose.almost_equal(RigidTransform.identity()))
        for j, expected in enumerate(forward_kinematics(self.chain, np.zeros(self.chain.dof)), start=1):
            self.assertTrue(obs.pose(j).almost_equal(expected), f"link {j}")

    def test_independent_of_camera_placement(self):
        reference = build_observation_set(self.frame.detections, self.registry, self.chain)
        rng = np.random.default_rng(4)
        for _ in range(20):
            g = RigidTransform.random(rng)
            moved = [d.premultiplied(g) for d in self.frame.detections]
            obs = build_observation_set(moved, self.registry, self.chain)
            for j in obs.visible_links:
                self.assertTrue(obs.pose(j).almost_equal(reference.pose(j)))
            self.assertTrue(obs.camera_pose.almost_equal(reference.camera_pose.compose(g.inverse())))

    def test_missing_base_marker(self):
        dets = [d for d in self.frame.detections if d.marker_id != 0]
        with self.assertRaises(BaseUnobservedError):
            build_observation_set(dets, self.registry, self.chain)

    def test_empty_frame(self):
        obs = build_observation_set([], self.registry, self.chain)
        self.assertEqual(obs.visible_links, [])
        self.assertIsNone(obs.camera_pose)

    def test_unknown_marker_is_skipped(self):
        stray = MarkerDetection(99, RigidTransform.identity())
        with self.assertLogs("src.observation.detections", level="WARNING"):
            obs = build_observation_set(list(self.frame.detections) + [stray], self.registry, self.chain)
        self.assertEqual(obs.visible_links, [1, 2, 3, 4, 5, 6])
        with self.assertRaises(UnknownMarkerError):
            link_pose_from_marker(stray, self.registry)

    def test_confidence_threshold(self):
        dets = [MarkerDetection(d.marker_id, d.t_cam_aruco, 0.3 if d.marker_id == 4 else 1.0)
                for d in self.frame.detections]
        obs = build_observation_set(dets, self.registry, self.chain, confidence_threshold=0.5)
        self.assertEqual(obs.visible_links, [1, 2, 3, 5, 6])

    def test_best_detection_per_link(self):
        registry_doc = copy.deepcopy(self.registry.to_dict())
        extra = copy.deepcopy(registry_doc["entries"][3])
        extra["marker_id"] = 30
        registry_doc["entries"].append(extra)
        registry = ExoskeletonRegistry.from_dict(registry_doc)
        bogus = MarkerDetection(30, RigidTransform.from_translation(1.0, 1.0, 1.0), 0.9)
        obs = build_observation_set(list(self.frame.detections) + [bogus], registry, self.chain)
        expected = forward_kinematics(self.chain, np.zeros(self.chain.dof))[2]
        self.assertTrue(obs.pose(3).almost_equal(expected))

    def test_masked(self):
        obs = build_observation_set(self.frame.detections, self.registry, self.chain)
        masked = obs.masked([2, 5])
        self.assertEqual(masked.visible_links, [1, 3, 4, 6])
        self.assertEqual(obs.visible_links, [1, 2, 3, 4, 5, 6])
        self.assertIsNotNone(masked.camera_pose)

    def test_from_link_poses(self):
        poses = forward_kinematics(self.chain, np.full(self.chain.dof, 0.1))
        obs = ObservationSet.from_link_poses(self.chain, [None] + poses[1:])
        self.assertEqual(obs.visible_links, [2, 3, 4, 5, 6])
        with self.assertRaises(ValidationError):
            ObservationSet.from_link_poses(self.chain, poses[:3])

    def test_link_pose_from_marker(self):
        entry = self.registry.entry_for_marker(2)
        marker = RigidTransform(Rotation.about_axis([0.0, 1.0, 0.0], 0.4), np.array([0.1, 0.2, 0.3]))
        pose = link_pose_from_marker(MarkerDetection(2, marker), self.registry)
        self.assertTrue(pose.almost_equal(marker @ entry.t_aruco_exo @ entry.t_exo_link))


if __name__ == '__main__':
    unittest.main()
