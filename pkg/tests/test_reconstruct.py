import numpy as np
import pytest

from panoexplore import explore as E
from panoexplore import reconstruct as R
from panoexplore import world as W
from panoexplore.errors import DimensionMismatchError


class TestBackprojection:
    def test_constant_depth_unit_sphere(self):
        pano = np.full((64, 128, 3), 0.5)
        depth = np.ones((64, 128))
        pts, cols = R.pointcloud(pano, depth)
        assert len(pts) == 64 * 128
        assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) < 1e-9

    def test_image_center_forward(self):
        # continuous image-centre coordinate maps to the forward axis
        p = R.backproject(64.0, 32.0, 5.0, 128, 64)
        assert np.allclose(p, [5.0, 0.0, 0.0], atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            R.pointcloud(np.zeros((4, 8, 3)), np.zeros((4, 9)))

    def test_sky_pixels_skipped(self, empty_scene):
        pose = W.Pose((0, 1.6, 0), 0.0)
        img = W.render_panorama(empty_scene, pose, 64, 32)
        depth = W.render_depth(empty_scene, pose, 64, 32)
        pts, cols = R.pointcloud(img, depth)
        assert len(pts) == np.isfinite(depth).sum()

    def test_oracle_points_on_surfaces(self, default_scene, rng):
        pose = W.sample_free_pose(default_scene, rng)
        img = W.render_panorama(default_scene, pose, 256, 128)
        depth = W.render_depth(default_scene, pose, 256, 128)
        pts, cols = R.pointcloud(img, depth)
        world_pts = R.camera_to_world(pts, pose)
        dists = np.array([W.surface_distance(default_scene, p) for p in world_pts[::61]])
        assert dists.max() < 1e-3

    def test_ply_output(self, tmp_path):
        pts = np.array([[0.0, 1.0, 2.0]])
        cols = np.array([[1.0, 0.5, 0.0]])
        out = tmp_path / "p.ply"
        R.write_ply(out, pts, cols)
        text = out.read_text().splitlines()
        assert text[0] == "ply"
        assert "element vertex 1" in text[2]
        assert text[-1] == "0.000000 1.000000 2.000000 255 128 0"


class TestBev:
    @pytest.fixture()
    def box_grid_scene(self):
        boxes = [W.Primitive("box", (x, 1.5, z), (4.0, 3.0, 4.0),
                             (0.8, 0.1 * (abs(x + z) % 5) + 0.1, 0.3))
                 for x in (-10.0, 0.0, 10.0) for z in (-10.0, 10.0)]
        return W.build_scene(seed=3, primitives=boxes)

    def test_height_zero_equals_bottom_face(self, default_scene):
        from panoexplore.geometry import panorama_to_cubemap

        sess = E.ExplorationSession.from_scene(default_scene, W.Pose((0, 1.6, 0), 0.0),
                                               None, 128, 64)
        top_down = R.bev(sess, 0.0)
        direct = panorama_to_cubemap(sess.current_view, 32).faces["bottom"]
        assert np.array_equal(top_down, direct)
        assert sess.history == []  # bev works on a fork

    def test_center_pixel_is_agents_ground_point(self, empty_scene):
        sess = E.ExplorationSession.from_scene(empty_scene, W.Pose((0, 1.6, 0), 0.0),
                                               None, 128, 64)
        top_down = R.bev(sess, 30.0, face_size=64)
        ground = W.shaded_color(empty_scene.ground_color, [0, 1, 0],
                                empty_scene.light_dir)
        center = top_down[32, 32]
        assert np.allclose(center, ground, atol=1e-9)

    def test_boxes_appear_at_plan_positions(self, box_grid_scene):
        height = 30.0
        sess = E.ExplorationSession.from_scene(box_grid_scene, W.Pose((0, 1.6, 0), 0.0),
                                               None, 256, 128)
        face = R.bev(sess, height, face_size=128)
        cam_y = 1.6 + height
        s = face.shape[0]
        # analytic plan projection: BEV pixel (i, j) looks along
        # d = -Y + x*(+Z) - y*(+X); a box top at y=3 is crossed at
        # t = (cam_y - 3) / 1 along -Y, i.e. plan point x = cam_x + (-y)*k
        for prim in box_grid_scene.primitives:
            cx, cy, cz = prim.center
            top_y = cy + prim.dimensions[1] / 2.0
            k = (cam_y - top_y)  # distance along -Y to the top plane (per unit dir)
            # invert: x_img = plan_z / k, y_img = -plan_x / k  (before normalise)
            x_img = cz / k
            y_img = -cx / k
            if abs(x_img) >= 1 or abs(y_img) >= 1:
                continue
            i = int((x_img + 1) / 2 * s)
            j = int((y_img + 1) / 2 * s)
            expected = W.shaded_color(prim.color, [0, 1, 0], box_grid_scene.light_dir)
            assert np.allclose(face[j, i], expected, atol=1e-9), prim.center

    def test_negative_height_rejected(self, empty_scene):
        sess = E.ExplorationSession.from_scene(empty_scene, W.Pose((0, 1.6, 0), 0.0),
                                               None, 64, 32)
        with pytest.raises(Exception):
            R.bev(sess, -1.0)
