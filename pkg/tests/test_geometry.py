import numpy as np
import pytest

from panoexplore import geometry as G
from panoexplore.errors import DomainError
from panoexplore.patterns import harmonic_pattern
from panoexplore.metrics import psnr

W, H = 1024, 512


class TestCoordinateTransforms:
    def test_center_maps_to_image_center(self):
        assert G.sphere_to_pixel(0.0, 0.0, W, H) == (512.0, 256.0)

    def test_corner(self):
        assert G.sphere_to_pixel(-np.pi, np.pi / 2, W, H) == (0.0, 0.0)

    def test_pixel_to_sphere_origin(self):
        assert G.pixel_to_sphere(0.0, 0.0, W, H) == (-np.pi, np.pi / 2)

    def test_pixel_to_sphere_center(self):
        assert G.pixel_to_sphere(512.0, 256.0, W, H) == (0.0, 0.0)

    def test_pixel_to_sphere_quarter(self):
        phi, theta = G.pixel_to_sphere(256.0, 128.0, W, H)
        assert phi == pytest.approx(-np.pi / 2, abs=1e-15)
        assert theta == pytest.approx(np.pi / 4, abs=1e-15)

    def test_round_trip_100k(self, rng):
        phi = rng.uniform(-np.pi, np.pi - 1e-9, 100000)
        theta = rng.uniform(-np.pi / 2, np.pi / 2, 100000)
        u, v = G.sphere_to_pixel(phi, theta, W, H)
        phi2, theta2 = G.pixel_to_sphere(u, v, W, H)
        assert np.max(np.abs(phi2 - phi)) < 1e-9
        assert np.max(np.abs(theta2 - theta)) < 1e-9

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            G.sphere_to_pixel(np.pi, 0.0, W, H)  # phi = pi is out of [-pi, pi)
        with pytest.raises(DomainError):
            G.sphere_to_pixel(0.0, 2.0, W, H)
        with pytest.raises(DomainError):
            G.pixel_to_sphere(-1.0, 0.0, W, H)
        with pytest.raises(DomainError):
            G.pixel_to_sphere(0.0, H + 1, W, H)


class TestRotateSphere:
    def test_identity(self):
        assert G.rotate_sphere(0.3, 0.1, G.RotationSpec(0.0, 0.0)) == (0.3, 0.1)

    def test_wrap_at_antimeridian(self):
        phi, theta = G.rotate_sphere(np.pi - 0.1, 0.0, G.RotationSpec(0.2))
        assert phi == pytest.approx(-np.pi + 0.1, abs=1e-12)
        assert theta == 0.0

    def test_full3d_inverse_identity(self, rng):
        phi = rng.uniform(-np.pi, np.pi - 1e-9, 10000)
        theta = rng.uniform(-np.pi / 2, np.pi / 2, 10000)
        spec = G.RotationSpec(0.7, -0.4, "full3d")
        p1, t1 = G.rotate_sphere(phi, theta, spec)
        p2, t2 = G.rotate_sphere(p1, t1, spec.inverse())
        # compare directions, not angles: longitude is undefined at the poles
        err = np.linalg.norm(G.unit_vector(p2, t2) - G.unit_vector(phi, theta), axis=-1)
        assert np.max(err) < 1e-9

    def test_yaw_mode_rejects_pitch(self):
        with pytest.raises(DomainError):
            G.RotationSpec(0.1, 0.2, "yaw")


class TestRotatePanorama:
    def test_full_turn_identity(self, rng):
        img = rng.uniform(0, 1, (64, 128, 3))
        out = G.rotate_panorama(img, G.RotationSpec(2 * np.pi))
        assert np.array_equal(out, img)

    def test_half_turn_is_exact_roll(self, rng):
        img = rng.uniform(0, 1, (64, 128, 3))
        out = G.rotate_panorama(img, G.RotationSpec(np.pi))
        assert np.array_equal(out, np.roll(img, 64, axis=1))

    def test_integer_pixel_yaw_bit_exact_invertible(self, rng):
        img = rng.uniform(0, 1, (64, 128, 3))
        shift = 17 * 2 * np.pi / 128
        fwd = G.rotate_panorama(img, G.RotationSpec(shift))
        back = G.rotate_panorama(fwd, G.RotationSpec(-shift))
        assert np.array_equal(back, img)

    def test_yaw_composition_integer_pixels(self, rng):
        img = rng.uniform(0, 1, (64, 128, 3))
        s1 = 5 * 2 * np.pi / 128
        s2 = 9 * 2 * np.pi / 128
        a = G.rotate_panorama(G.rotate_panorama(img, G.RotationSpec(s1)), G.RotationSpec(s2))
        b = G.rotate_panorama(img, G.RotationSpec(s1 + s2))
        assert np.array_equal(a, b)

    def test_full3d_round_trip_psnr(self):
        img = harmonic_pattern(2048, 1024)
        spec = G.RotationSpec(0.37, 0.0, "full3d")
        back = G.rotate_panorama(G.rotate_panorama(img, spec), spec.inverse())
        assert psnr(back, img) > 35.0

    def test_seam_wraps(self):
        # content crossing the seam must come back around, not clamp
        img = np.zeros((8, 16, 3))
        img[:, 0] = 1.0
        out = G.rotate_panorama(img, G.RotationSpec(2 * np.pi / 16))
        assert np.array_equal(out[:, 1], np.ones((8, 3)))
        out2 = G.rotate_panorama(img, G.RotationSpec(-2 * np.pi / 16))
        assert np.array_equal(out2[:, 15], np.ones((8, 3)))


class TestCubemap:
    def test_constant_color_faces(self):
        img = np.full((64, 128, 3), 0.37)
        cube = G.panorama_to_cubemap(img, 32)
        for name, face in cube.faces.items():
            assert face.shape == (32, 32, 3)
            assert np.allclose(face, 0.37), name

    def test_center_pixel_hits_front_only(self):
        img = np.zeros((64, 128, 3))
        img[32, 64] = 1.0
        cube = G.panorama_to_cubemap(img, 32)
        assert cube.faces["front"].sum() > 0
        for name in ("back", "left", "right", "top", "bottom"):
            assert cube.faces[name].sum() == 0, name

    def test_round_trip_psnr(self, small_corpus):
        for img in small_corpus:
            cube = G.panorama_to_cubemap(img, img.shape[1] // 2)
            back = G.cubemap_to_panorama(cube, img.shape[1], img.shape[0])
            assert psnr(back, img) > 40.0

    def test_round_trip_improves_with_face_size(self, small_corpus):
        img = small_corpus[0]
        h = img.shape[0]
        scores = []
        for fs in (h // 2, h, 2 * h):
            cube = G.panorama_to_cubemap(img, fs)
            back = G.cubemap_to_panorama(cube, img.shape[1], h)
            scores.append(psnr(back, img))
        assert scores[0] <= scores[1] <= scores[2]

    def test_six_solid_faces_partition_panorama(self):
        colors = {name: np.full((16, 16, 3), (i + 1) / 6)
                  for i, name in enumerate(G.FACE_ORDER)}
        cube = G.CubeMap(colors)
        pano = G.cubemap_to_panorama(cube, 128, 64)
        # each face axis direction shows its own solid colour
        for i, name in enumerate(G.FACE_ORDER):
            axis, _, _ = G.FACE_FRAMES[name]
            phi, theta = G.vector_to_sphere(axis)
            u, v = G.sphere_to_pixel(phi, theta, 128, 64)
            px = pano[min(int(v), 63), int(u) % 128]
            assert np.allclose(px, (i + 1) / 6), name
        # regions are solid: away from face boundaries the values are pure
        pure = np.isclose(pano[..., 0][:, :, None],
                          np.array([(i + 1) / 6 for i in range(6)])).any(axis=-1)
        assert pure.mean() > 0.8
        # and every face owns a solid region of real size
        for i in range(6):
            assert np.isclose(pano[..., 0], (i + 1) / 6).mean() > 0.05

    def test_mismatched_faces_rejected(self):
        faces = {name: np.zeros((8, 8, 3)) for name in G.FACE_ORDER}
        faces["top"] = np.zeros((4, 4, 3))
        with pytest.raises(DomainError):
            G.CubeMap(faces)


class TestPerspective:
    def test_front_face_equals_perspective(self, small_corpus):
        img = small_corpus[1]
        cube = G.panorama_to_cubemap(img, 64)
        view = G.perspective_view(img, 0.0, 0.0, np.pi / 2, 64, 64)
        assert np.allclose(view, cube.faces["front"], atol=1e-9)

    def test_right_face_equals_perspective_at_quarter_turn(self, small_corpus):
        img = small_corpus[1]
        cube = G.panorama_to_cubemap(img, 64)
        view = G.perspective_view(img, np.pi / 2, 0.0, np.pi / 2, 64, 64)
        assert np.allclose(view, cube.faces["right"], atol=1e-9)

    def test_small_fov_constant(self):
        img = np.full((64, 128, 3), 0.42)
        view = G.perspective_view(img, 1.0, 0.2, 0.05, 32, 24)
        assert np.allclose(view, 0.42)

    def test_fov_domain(self):
        img = np.zeros((8, 16, 3))
        with pytest.raises(DomainError):
            G.perspective_view(img, 0, 0, 0.0, 8, 8)
        with pytest.raises(DomainError):
            G.perspective_view(img, 0, 0, np.pi, 8, 8)


class TestPanoramaValidation:
    def test_bad_shape(self):
        with pytest.raises(DomainError):
            G.check_panorama(np.zeros((4, 4)))

    def test_bad_range(self):
        with pytest.raises(DomainError):
            G.check_panorama(np.full((4, 8, 3), 1.5))

    def test_nonspherical_warns(self):
        with pytest.warns(UserWarning):
            G.check_panorama(np.zeros((4, 9, 3)))
