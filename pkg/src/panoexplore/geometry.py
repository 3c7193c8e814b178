"""Equirectangular panorama geometry.

Coordinate conventions used everywhere in this package:

* Spherical: longitude ``phi`` in [-pi, pi), latitude ``theta`` in
  [-pi/2, pi/2].  ``phi=0, theta=0`` is the forward direction.
* Pixel: continuous coordinates ``u`` in [0, W) (wraps), ``v`` in [0, H].
  Coordinate ``(u, v)`` addresses the centre of pixel ``(floor(u), floor(v))``
  offset by 0.5, i.e. pixel index ``i`` has continuous coordinate ``i + 0.5``.
* Unit vectors: ``dir(phi, theta) = (cos t cos p, sin t, cos t sin p)``.
  +X is forward (image centre), +Y is up, +Z is the right side of the image
  (longitude +pi/2).

Cube face table (all projections share it):

    face    axis   right  up
    front   +X     +Z     +Y
    right   +Z     -X     +Y
    back    -X     -Z     +Y
    left    -Z     +X     +Y
    top     +Y     +Z     -X
    bottom  -Y     +Z     +X

Panoramas are ``(H, W, 3)`` float64 arrays with values in [0, 1].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

DEFAULT_WIDTH = 1024
DEFAULT_HEIGHT = 512

TWO_PI = 2.0 * np.pi


def wrap_angle(phi):
    """Wrap an angle (scalar or array) into [-pi, pi).

    Angles already in range pass through bit-identically (the mod roundtrip
    is not exact in floats), which keeps repeated wrapping idempotent.
    """
    phi = np.asarray(phi, dtype=np.float64)
    wrapped = np.where((phi >= -np.pi) & (phi < np.pi), phi,
                       (phi + np.pi) % TWO_PI - np.pi)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped


def check_panorama(img: np.ndarray, name: str = "panorama") -> np.ndarray:
    """Validate the panorama array convention; returns the array unchanged.

    A width != 2 * height is allowed but flagged, since the image then does
    not cover the sphere with square pixels.
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DomainError(f"{name} must have shape (H, W, 3), got {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DomainError(f"{name} has empty dimensions {img.shape}")
    lo, hi = float(np.min(img)), float(np.max(img))
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo < -1e-9 or hi > 1 + 1e-9:
        raise DomainError(f"{name} channel values must lie in [0, 1], got [{lo}, {hi}]")
    if img.shape[1] != 2 * img.shape[0]:
        warnings.warn(
            f"{name} is {img.shape[1]}x{img.shape[0]}; width != 2*height is a "
            "non-spherical aspect ratio",
            stacklevel=2,
        )
    return img


def sphere_to_pixel(phi, theta, width: int, height: int):
    """Map spherical (phi, theta) to continuous pixel coordinates (u, v)."""
    if width < 1 or height < 1:
        raise DomainError("width and height must be >= 1")
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(phi < -np.pi) or np.any(phi >= np.pi):
        raise DomainError("phi out of range [-pi, pi)")
    if np.any(theta < -np.pi / 2 - 1e-12) or np.any(theta > np.pi / 2 + 1e-12):
        raise DomainError("theta out of range [-pi/2, pi/2]")
    u = (width / TWO_PI) * (phi + np.pi)
    v = (height / np.pi) * (np.pi / 2 - theta)
    if u.ndim == 0:
        return float(u), float(v)
    return u, v


def pixel_to_sphere(u, v, width: int, height: int):
    """Map continuous pixel coordinates (u, v) back to spherical (phi, theta)."""
    if width < 1 or height < 1:
        raise DomainError("width and height must be >= 1")
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any(u < 0) or np.any(u >= width):
        raise DomainError("u out of range [0, W)")
    if np.any(v < 0) or np.any(v > height):
        raise DomainError("v out of range [0, H]")
    phi = TWO_PI * u / width - np.pi
    theta = np.pi / 2 - np.pi * v / height
    if phi.ndim == 0:
        return float(phi), float(theta)
    return phi, theta


def unit_vector(phi, theta) -> np.ndarray:
    """Unit direction(s) for spherical coordinates, stacked on the last axis."""
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    ct = np.cos(theta)
    return np.stack([ct * np.cos(phi), np.sin(theta) * np.ones_like(phi), ct * np.sin(phi)], axis=-1)


def vector_to_sphere(vec: np.ndarray):
    """Inverse of :func:`unit_vector`; input need not be normalised.

    At the poles (x = z = 0) the longitude is defined as 0.
    """
    vec = np.asarray(vec, dtype=np.float64)
    x, y, z = vec[..., 0], vec[..., 1], vec[..., 2]
    norm = np.sqrt(x * x + y * y + z * z)
    theta = np.arcsin(np.clip(y / np.where(norm == 0, 1.0, norm), -1.0, 1.0))
    phi = wrap_angle(np.arctan2(z, x))
    if np.ndim(phi) == 0:
        return float(phi), float(theta)
    return phi, theta


@dataclass(frozen=True)
class RotationSpec:
    """A view rotation: yaw ``delta_phi`` then pitch ``delta_theta``.

    ``mode="yaw"`` is the lossless horizontal roll used by navigation view
    updates and requires ``delta_theta == 0``.  ``mode="full3d"`` applies the
    proper rigid rotation (yaw about +Y, then pitch about +Z), which stays
    well defined at the poles.  ``inverse()`` flips the composition order so
    rotate-then-inverse is the exact identity map on the sphere.
    """

    delta_phi: float
    delta_theta: float = 0.0
    mode: str = "yaw"
    reversed_order: bool = False

    def __post_init__(self):
        if self.mode not in ("yaw", "full3d"):
            raise DomainError(f"unknown rotation mode {self.mode!r}")
        if self.mode == "yaw" and self.delta_theta != 0.0:
            raise DomainError("yaw-only rotation requires delta_theta == 0")

    def inverse(self) -> "RotationSpec":
        return RotationSpec(-self.delta_phi, -self.delta_theta, self.mode,
                            not self.reversed_order)


def rotation_matrix(spec: RotationSpec) -> np.ndarray:
    """3x3 matrix for yaw about +Y then pitch about +Z (order flipped for
    inverse specs, so that the product with the original is the identity)."""
    cp, sp = np.cos(spec.delta_phi), np.sin(spec.delta_phi)
    ct, st = np.cos(spec.delta_theta), np.sin(spec.delta_theta)
    # yaw: adds delta_phi to longitude, i.e. X -> (cos, 0, sin)
    yaw = np.array([[cp, 0.0, -sp], [0.0, 1.0, 0.0], [sp, 0.0, cp]])
    # pitch: lifts the forward axis, X -> (cos, sin, 0)
    pitch = np.array([[ct, -st, 0.0], [st, ct, 0.0], [0.0, 0.0, 1.0]])
    return yaw @ pitch if spec.reversed_order else pitch @ yaw


def rotate_sphere(phi, theta, spec: RotationSpec):
    """Rotate spherical coordinates by the given spec."""
    if spec.mode == "yaw":
        phi2 = wrap_angle(np.asarray(phi, dtype=np.float64) + spec.delta_phi)
        theta2 = np.asarray(theta, dtype=np.float64)
        if np.ndim(phi2) == 0:
            return float(phi2), float(theta2)
        return phi2, theta2
    vec = unit_vector(phi, theta)
    rotated = vec @ rotation_matrix(spec).T
    return vector_to_sphere(rotated)


@lru_cache(maxsize=16)
def _pixel_center_lonlat(width: int, height: int):
    """(phi[W], theta[H]) at pixel centres, cached per image size."""
    phi = TWO_PI * (np.arange(width) + 0.5) / width - np.pi
    theta = np.pi / 2 - np.pi * (np.arange(height) + 0.5) / height
    return phi, theta


def _bilinear(img: np.ndarray, u, v, wrap_u: bool = True) -> np.ndarray:
    """Bilinear sample at continuous coords; u wraps (seam-aware), v clamps."""
    h, w = img.shape[:2]
    x = np.asarray(u, dtype=np.float64) - 0.5
    y = np.asarray(v, dtype=np.float64) - 0.5
    y = np.clip(y, 0.0, h - 1.0)
    if not wrap_u:
        x = np.clip(x, 0.0, w - 1.0)
    x0f = np.floor(x)
    y0f = np.floor(y)
    fx = x - x0f
    fy = y - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    if wrap_u:
        x0 %= w
        x1 = (x0 + 1) % w
    else:
        x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)

    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    if img.ndim == 3:
        w00, w10, w01, w11 = (a[..., None] for a in (w00, w10, w01, w11))
    return img[y0, x0] * w00 + img[y0, x1] * w10 + img[y1, x0] * w01 + img[y1, x1] * w11


def sample_panorama(img: np.ndarray, u, v) -> np.ndarray:
    """Wrap-aware bilinear lookup at continuous pixel coordinates."""
    return _bilinear(img, u, v, wrap_u=True)


def rotate_panorama(img: np.ndarray, spec: RotationSpec) -> np.ndarray:
    """Rotate a panorama; pixel (u, v) of the output samples the input at T^-1(u, v).

    Yaw rotations by an exact multiple of one pixel column are performed as a
    lossless horizontal roll, so they are bit-exact and invertible.
    """
    h, w = img.shape[:2]
    if spec.mode == "yaw":
        shift = spec.delta_phi * w / TWO_PI
        k = round(shift)
        if abs(shift - k) < 1e-9:
            return np.roll(img, int(k) % w, axis=1)
        cols = (np.arange(w) + 0.5) - shift
        rows = (np.arange(h) + 0.5)[:, None]
        return _bilinear(img, np.broadcast_to(cols, (h, w)), np.broadcast_to(rows, (h, w)))
    phi, theta = _pixel_center_lonlat(w, h)
    dirs = unit_vector(phi[None, :] * np.ones((h, 1)), theta[:, None] * np.ones((1, w)))
    src = dirs @ rotation_matrix(spec.inverse()).T
    sphi, stheta = vector_to_sphere(src)
    u = (w / TWO_PI) * (sphi + np.pi)
    v = (h / np.pi) * (np.pi / 2 - stheta)
    return _bilinear(img, u, v)


# --- cube faces ----------------------------------------------------------

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])

#: face -> (axis, right, up); see the module docstring table.
FACE_FRAMES = {
    "front": (_X, _Z, _Y),
    "right": (_Z, -_X, _Y),
    "back": (-_X, -_Z, _Y),
    "left": (-_Z, _X, _Y),
    "top": (_Y, _Z, -_X),
    "bottom": (-_Y, _Z, _X),
}

FACE_ORDER = ("front", "right", "back", "left", "top", "bottom")


@dataclass
class CubeMap:
    """Six square faces, keyed per :data:`FACE_FRAMES`."""

    faces: dict

    def __post_init__(self):
        sizes = {f.shape[0] for f in self.faces.values()} | {f.shape[1] for f in self.faces.values()}
        if set(self.faces) != set(FACE_ORDER):
            raise DomainError(f"cubemap must have faces {FACE_ORDER}")
        if len(sizes) != 1:
            raise DomainError("cubemap faces must be square and equally sized")

    @property
    def face_size(self) -> int:
        return self.faces["front"].shape[0]


def _face_grid(face_size: int, axis, right, up) -> np.ndarray:
    """(S, S, 3) direction grid for a 90-degree-FOV face."""
    s = (2.0 * (np.arange(face_size) + 0.5) / face_size) - 1.0
    x = s[None, :, None]
    y = s[:, None, None]
    return axis[None, None, :] + x * right[None, None, :] - y * up[None, None, :]


@lru_cache(maxsize=8)
def _face_lonlat(face_size: int):
    """Per-face (phi, theta) grids, cached; rotation-independent."""
    out = {}
    for name, (axis, right, up) in FACE_FRAMES.items():
        d = _face_grid(face_size, axis, right, up)
        out[name] = vector_to_sphere(d)
    return out


def panorama_to_cubemap(img: np.ndarray, face_size: int) -> CubeMap:
    """Gnomonic 90-degree-FOV projection of the panorama onto six faces."""
    if face_size < 1:
        raise DomainError("face_size must be >= 1")
    h, w = img.shape[:2]
    faces = {}
    for name, (phi, theta) in _face_lonlat(face_size).items():
        u = (w / TWO_PI) * (phi + np.pi)
        v = (h / np.pi) * (np.pi / 2 - theta)
        faces[name] = _bilinear(img, u, v)
    return CubeMap(faces)


def _padded_face(cube: "CubeMap", name: str) -> np.ndarray:
    """Face with a one-texel border synthesised from the adjacent faces.

    Bilinear taps near a face edge then read real neighbour content instead
    of clamping, which keeps the cubemap->panorama composition second-order
    accurate across face seams.
    """
    s = cube.face_size
    axis, right, up = FACE_FRAMES[name]
    out = np.empty((s + 2, s + 2, 3))
    out[1:-1, 1:-1] = cube.faces[name]
    coords = 2.0 * (np.arange(-1, s + 1) + 0.5) / s - 1.0
    # (row indices, col indices) of the four border strips incl. corners
    idx = np.arange(s + 2)
    strips = [(np.zeros(s + 2, dtype=int), idx), (np.full(s + 2, s + 1), idx),
              (idx, np.zeros(s + 2, dtype=int)), (idx, np.full(s + 2, s + 1))]
    for rows, cols in strips:
        x = coords[cols]
        y = coords[rows]
        d = (axis[None, :] + x[:, None] * right[None, :] - y[:, None] * up[None, :])
        out[rows, cols] = _sample_cube_nearest_face(cube, d, exclude=name)
    return out


def _sample_cube_nearest_face(cube: "CubeMap", dirs: np.ndarray, exclude: str) -> np.ndarray:
    """Sample directions from their dominant face (excluding one), clamped."""
    result = np.zeros(dirs.shape)
    best_dot = np.full(dirs.shape[:-1], -np.inf)
    choice = np.zeros(dirs.shape[:-1], dtype=int)
    names = [n for n in FACE_ORDER if n != exclude]
    for i, n in enumerate(names):
        axis, _, _ = FACE_FRAMES[n]
        dot = dirs @ axis
        better = dot > best_dot
        best_dot = np.where(better, dot, best_dot)
        choice = np.where(better, i, choice)
    s = cube.face_size
    for i, n in enumerate(names):
        mask = choice == i
        if not mask.any():
            continue
        axis, right, up = FACE_FRAMES[n]
        dm = dirs[mask]
        p = dm / (dm @ axis)[:, None]
        u = ((p @ right) + 1.0) / 2.0 * s
        v = (-(p @ up) + 1.0) / 2.0 * s
        result[mask] = _bilinear(cube.faces[n], u, v, wrap_u=False)
    return result


@lru_cache(maxsize=8)
def _pano_face_lookup(width: int, height: int):
    """For each panorama pixel: face index + in-face continuous coords."""
    phi, theta = _pixel_center_lonlat(width, height)
    d = unit_vector(np.broadcast_to(phi[None, :], (height, width)),
                    np.broadcast_to(theta[:, None], (height, width)))
    ax, ay, az = np.abs(d[..., 0]), np.abs(d[..., 1]), np.abs(d[..., 2])
    # dominant-axis face selection
    face_idx = np.full((height, width), -1, dtype=np.int8)
    x_dom = (ax >= ay) & (ax >= az)
    z_dom = ~x_dom & (az >= ay)
    y_dom = ~x_dom & ~z_dom
    face_idx[x_dom & (d[..., 0] >= 0)] = FACE_ORDER.index("front")
    face_idx[x_dom & (d[..., 0] < 0)] = FACE_ORDER.index("back")
    face_idx[z_dom & (d[..., 2] >= 0)] = FACE_ORDER.index("right")
    face_idx[z_dom & (d[..., 2] < 0)] = FACE_ORDER.index("left")
    face_idx[y_dom & (d[..., 1] >= 0)] = FACE_ORDER.index("top")
    face_idx[y_dom & (d[..., 1] < 0)] = FACE_ORDER.index("bottom")

    fx = np.zeros((height, width))
    fy = np.zeros((height, width))
    for i, name in enumerate(FACE_ORDER):
        axis, right, up = FACE_FRAMES[name]
        mask = face_idx == i
        dm = d[mask]
        p = dm / (dm @ axis)[:, None]
        fx[mask] = p @ right
        fy[mask] = -(p @ up)
    return face_idx, fx, fy


def cubemap_to_panorama(cube: CubeMap, width: int, height: int) -> np.ndarray:
    """Compose a panorama by sampling each pixel from the face its ray hits.

    Faces are padded with one texel of neighbour content first, so taps near
    face seams interpolate real data rather than clamping.
    """
    face_idx, fx, fy = _pano_face_lookup(width, height)
    s = cube.face_size
    out = np.zeros((height, width, 3))
    for i, name in enumerate(FACE_ORDER):
        mask = face_idx == i
        padded = _padded_face(cube, name)
        u = (fx[mask] + 1.0) / 2.0 * s + 1.0
        v = (fy[mask] + 1.0) / 2.0 * s + 1.0
        out[mask] = _bilinear(padded, u, v, wrap_u=False)
    return out


def perspective_view(img: np.ndarray, heading_phi: float, heading_theta: float,
                     fov: float, out_w: int, out_h: int) -> np.ndarray:
    """Gnomonic (rectilinear) viewport centred on the given heading.

    ``fov`` is the horizontal field of view in radians, 0 < fov < pi.
    """
    if not 0.0 < fov < np.pi:
        raise DomainError("fov must lie in (0, pi)")
    if abs(heading_theta) >= np.pi / 2:
        raise DomainError("perspective heading must not point at a pole")
    h, w = img.shape[:2]
    axis = unit_vector(heading_phi, heading_theta)
    right = np.array([-np.sin(heading_phi), 0.0, np.cos(heading_phi)])
    up = np.cross(right, axis)
    half = np.tan(fov / 2.0)
    half_v = half * out_h / out_w
    xs = (2.0 * (np.arange(out_w) + 0.5) / out_w - 1.0) * half
    ys = (2.0 * (np.arange(out_h) + 0.5) / out_h - 1.0) * half_v
    d = (axis[None, None, :]
         + xs[None, :, None] * right[None, None, :]
         - ys[:, None, None] * up[None, None, :])
    phi, theta = vector_to_sphere(d)
    u = (w / TWO_PI) * (phi + np.pi)
    v = (h / np.pi) * (np.pi / 2 - theta)
    return _bilinear(img, u, v)
