"""Depth back-projection to egocentric point clouds and bird's-eye views."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, DomainError
from .explore import ExplorationConfig, ExplorationSession
from .geometry import panorama_to_cubemap
from .world import Pose


def backproject(u, v, depth, width: int, height: int) -> np.ndarray:
    """One pixel (continuous coords) + depth -> camera-frame 3D point.

    Angles: lon = 2*pi*u/W - pi, lat = pi*(1 - v/H) - pi/2; the point is
    (D cos(lat) cos(lon), D sin(lat), D cos(lat) sin(lon)).
    """
    lon = 2.0 * np.pi * np.asarray(u) / width - np.pi
    lat = np.pi * (1.0 - np.asarray(v) / height) - np.pi / 2.0
    d = np.asarray(depth, dtype=np.float64)
    cl = np.cos(lat)
    return np.stack([d * cl * np.cos(lon), d * np.sin(lat), d * cl * np.sin(lon)], axis=-1)


def pointcloud(pano: np.ndarray, depth: np.ndarray):
    """Back-project every finite-depth pixel; returns (points, colors).

    Pixel centres are used, matching the renderer's ray directions, so points
    from an oracle render + depth lie exactly on scene surfaces.
    """
    if pano.shape[:2] != depth.shape:
        raise DimensionMismatchError(f"panorama {pano.shape[:2]} vs depth {depth.shape}")
    h, w = depth.shape
    u = (np.arange(w) + 0.5)[None, :].repeat(h, axis=0)
    v = (np.arange(h) + 0.5)[:, None].repeat(w, axis=1)
    finite = np.isfinite(depth)
    pts = backproject(u[finite], v[finite], depth[finite], w, h)
    return pts, pano[finite]


def camera_to_world(points: np.ndarray, pose: Pose) -> np.ndarray:
    """Camera-frame points -> world frame (yaw rotation + translation)."""
    c, s = np.cos(pose.yaw), np.sin(pose.yaw)
    rot = np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    return points @ rot.T + pose.xyz


def write_ply(path, points: np.ndarray, colors: np.ndarray) -> None:
    """ASCII PLY with per-vertex 8-bit colour."""
    if len(points) != len(colors):
        raise DimensionMismatchError("points/colors length mismatch")
    rgb = np.rint(np.clip(colors, 0, 1) * 255).astype(np.uint8)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(points)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write("end_header\n")
        for p, c in zip(points, rgb):
            fh.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]} {c[1]} {c[2]}\n")


def bev(session: ExplorationSession, height: float, face_size: int | None = None) -> np.ndarray:
    """Bird's-eye view: climb straight up by ``height`` on a forked session,
    then read the bottom cube face (its centre looks straight down at the
    agent's ground point; image-up is the agent's forward direction)."""
    if height < 0:
        raise DomainError("height must be >= 0")
    child = session.fork()
    if height > 0:
        child.step(ExplorationConfig(0.0, 0.0, frame_count=1, vertical=height))
    face_size = face_size or child.height // 2
    return panorama_to_cubemap(child.current_view, face_size).faces["bottom"]
