import numpy as np
import pytest

from panoexplore import geometry as G
from panoexplore import world as W
from panoexplore.errors import DomainError, NoFreePathError, RenderError
from panoexplore.metrics import psnr


def eye(scene, x=0.0, z=0.0, yaw=0.0):
    return W.Pose((x, scene.ground_height + W.CAMERA_HEIGHT, z), yaw)


class TestSceneGeneration:
    def test_determinism(self):
        a = W.generate_scene(7)
        b = W.generate_scene(7)
        assert a.dumps() == b.dumps()

    def test_zero_density(self):
        scene = W.generate_scene(3, W.SceneParams(density=0.0))
        assert scene.primitives == []

    def test_counts_within_bounds(self):
        params = W.SceneParams()
        lo, hi = params.count_bounds()
        for seed in range(100):
            n = len(W.generate_scene(seed, params).primitives)
            assert lo <= n <= hi

    def test_spawn_region_clear(self):
        for seed in range(20):
            scene = W.generate_scene(seed)
            pose = eye(scene)
            assert not W.check_collision(scene, pose, pose, scene.spawn_clearance)

    def test_serialization_round_trip(self, default_scene):
        doc = default_scene.dumps()
        again = W.Scene.loads(doc)
        assert again.dumps() == doc

    def test_extent_must_be_positive(self):
        with pytest.raises(DomainError):
            W.generate_scene(0, W.SceneParams(extent=0.0))

    def test_primitive_validation(self):
        with pytest.raises(DomainError):
            W.Primitive("box", (0, 0, 0), (1.0, -1.0, 1.0), (1, 1, 1))
        with pytest.raises(DomainError):
            W.Primitive("cone", (0, 0, 0), (1.0,), (1, 1, 1))


class TestRenderer:
    def test_empty_scene_horizon(self, empty_scene):
        pose = eye(empty_scene)
        img = W.render_panorama(empty_scene, pose, 128, 64)
        assert np.allclose(img[:32], np.array(empty_scene.sky_color))
        ground = W.shaded_color(empty_scene.ground_color, [0, 1, 0])
        assert np.allclose(img[32:], ground)

    def test_determinism(self, default_scene):
        pose = eye(default_scene, yaw=0.4)
        a = W.render_panorama(default_scene, pose, 256, 128)
        b = W.render_panorama(default_scene, pose, 256, 128)
        assert np.array_equal(a, b)

    def test_rotation_equivariance(self, default_scene, rng):
        for _ in range(3):
            pose = W.sample_free_pose(default_scene, rng)
            base = W.render_panorama(default_scene, pose, 1024, 512)
            alpha = float(rng.uniform(-np.pi, np.pi))
            turned = W.render_panorama(default_scene, W.Pose(pose.position, pose.yaw + alpha),
                                       1024, 512)
            expected = G.rotate_panorama(base, G.RotationSpec(-alpha))
            assert psnr(turned, expected) > 40.0

    def test_pose_inside_primitive_rejected(self):
        box = W.Primitive("box", (0.0, 1.0, 0.0), (4.0, 2.0, 4.0), (1, 0, 0))
        scene = W.build_scene(primitives=[box])
        with pytest.raises(RenderError):
            W.render_panorama(scene, W.Pose((0.0, 1.0, 0.0), 0.0), 64, 32)

    def test_culling_matches_bruteforce(self, rng):
        for seed in (5, 21):
            scene = W.generate_scene(seed)
            pose = W.sample_free_pose(scene, rng)
            fast = W._raycast(scene, pose, 128, 64, cull=True)
            slow = W._raycast(scene, pose, 128, 64, cull=False)
            for a, b in zip(fast, slow):
                assert np.array_equal(a, b)


class TestDepth:
    def test_box_face_distance(self):
        box = W.Primitive("box", (6.0, 1.6, 0.0), (2.0, 2.0, 2.0), (1, 0, 0))
        scene = W.build_scene(primitives=[box])
        # image centre looks along +X at the box face at x = 5
        depth = W.render_depth(scene, W.Pose((0.0, 1.6, 0.0), 0.0), 1024, 512)
        # centre falls between pixels for even dims; probe the two middle columns
        for u in (511, 512):
            for v in (255, 256):
                d = depth[v, u]
                phi, theta = G.pixel_to_sphere(u + 0.5, v + 0.5, 1024, 512)
                expected = 5.0 / (np.cos(theta) * np.cos(phi))
                assert d == pytest.approx(expected, abs=1e-6)

    def test_sky_is_inf(self, empty_scene):
        depth = W.render_depth(empty_scene, eye(empty_scene), 128, 64)
        assert np.all(np.isinf(depth[:32]))

    def test_ground_follows_analytic_formula(self, empty_scene):
        h = W.CAMERA_HEIGHT
        depth = W.render_depth(empty_scene, eye(empty_scene), 128, 64)
        theta = np.pi / 2 - np.pi * (np.arange(64) + 0.5) / 64
        for j in range(40, 64):
            # vertical-plane ray at the column whose longitude is -pi/2+...
            expected = h / np.sin(-theta[j])
            # depth varies with longitude only via the unit direction; at any
            # column the hit distance is h / -dir_y
            assert depth[j, 0] == pytest.approx(expected, rel=1e-3)

    def test_depth_and_color_agree(self, default_scene, rng):
        pose = W.sample_free_pose(default_scene, rng)
        img = W.render_panorama(default_scene, pose, 128, 64)
        depth = W.render_depth(default_scene, pose, 128, 64)
        sky = np.all(np.isclose(img, np.array(default_scene.sky_color)), axis=-1)
        # depth is finite exactly where something was shaded
        assert np.array_equal(np.isfinite(depth), ~sky)


class TestCollision:
    def test_empty_space(self, empty_scene):
        a = eye(empty_scene)
        assert W.check_collision(empty_scene, a, a.moved(10), 0.5) is False

    def test_through_box_center(self):
        box = W.Primitive("box", (5.0, 1.0, 0.0), (2.0, 2.0, 2.0), (1, 0, 0))
        scene = W.build_scene(primitives=[box])
        a = W.Pose((0.0, 1.0, 0.0), 0.0)
        assert W.check_collision(scene, a, a.moved(10), 0.5) is True

    def test_exact_tangency_counts(self):
        box = W.Primitive("box", (5.0, 1.0, 0.0), (2.0, 2.0, 2.0), (1, 0, 0))
        scene = W.build_scene(primitives=[box])
        # segment parallel to the +Z face at exactly clearance distance
        a = W.Pose((0.0, 1.0, 1.5), 0.0)
        b = W.Pose((10.0, 1.0, 1.5), 0.0)
        assert W.check_collision(scene, a, b, 0.5) is True
        # a hair farther: no collision
        a2 = W.Pose((0.0, 1.0, 1.5 + 1e-9), 0.0)
        b2 = W.Pose((10.0, 1.0, 1.5 + 1e-9), 0.0)
        assert W.check_collision(scene, a2, b2, 0.5) is False

    def test_cylinder_and_sphere(self):
        cyl = W.Primitive("cylinder", (4.0, 2.0, 0.0), (1.0, 4.0), (1, 1, 0))
        sph = W.Primitive("sphere", (-4.0, 1.0, 0.0), (1.0,), (0, 1, 1))
        scene = W.build_scene(primitives=[cyl, sph])
        a = W.Pose((4.0, 1.0, -5.0), 0.0)
        b = W.Pose((4.0, 1.0, 5.0), 0.0)
        assert W.check_collision(scene, a, b, 0.25) is True
        c = W.Pose((-4.0, 1.0, -5.0), 0.0)
        d = W.Pose((-4.0, 1.0, 5.0), 0.0)
        assert W.check_collision(scene, c, d, 0.25) is True
        assert W.check_collision(scene, c, d, 0.0) is True  # through the solid

    def test_negative_clearance_rejected(self, empty_scene):
        a = eye(empty_scene)
        with pytest.raises(DomainError):
            W.check_collision(empty_scene, a, a, -0.1)


class TestPathSampling:
    def test_empty_scene_spacing(self, empty_scene, rng):
        path = W.sample_straight_path(empty_scene, rng)
        poses = path.poses
        assert len(poses) == 50
        gaps = [np.linalg.norm(b.xyz - a.xyz) for a, b in zip(poses, poses[1:])]
        assert all(g == pytest.approx(20.0 / 49.0, abs=1e-12) for g in gaps)

    def test_blocked_scene_raises(self):
        boxes = [W.Primitive("box", (x, 5.0, z), (10.0, 10.0, 10.0), (0.5, 0.5, 0.5))
                 for x in range(-40, 50, 10) for z in range(-40, 50, 10)]
        scene = W.build_scene(primitives=boxes)
        with pytest.raises(NoFreePathError):
            W.sample_straight_path(scene, np.random.default_rng(0), max_retries=50)

    def test_samples_are_collision_free(self, default_scene):
        rng = np.random.default_rng(11)
        for _ in range(200):
            path = W.sample_straight_path(default_scene, rng)
            assert not W.check_collision(default_scene, path.start,
                                         path.start.moved(path.length))


class TestDataset:
    def test_one_path_video(self, empty_scene, rng, tmp_path):
        results, manifest = W.generate_dataset(empty_scene, 1, rng, 64, 32,
                                               out_dir=tmp_path)
        video, path = results[0]
        assert len(video) == 50
        assert manifest["conditioning"] == {"condition_start_frames": [1, 25],
                                            "target_frames": 25}
        # frame k is exactly the render at pose k
        k = 17
        again = W.render_panorama(empty_scene, path.poses[k], 64, 32)
        assert np.array_equal(video[k], again)
        assert (tmp_path / "manifest.json").exists()
        assert (tmp_path / "path0000_frame000.png").exists()

    def test_navigation_distance_convention(self, empty_scene, rng):
        # 0.4 m of travel per navigation frame (dataset spacing is 20/49)
        from panoexplore.explore import METERS_PER_FRAME

        assert METERS_PER_FRAME == pytest.approx(0.4)
