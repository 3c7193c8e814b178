"""Procedural 3D scenes and the exact ray-cast panorama/depth renderer.

The world frame matches the camera frame of a yaw-0 pose at the origin:
+X forward, +Y up, +Z to the right (see :mod:`panoexplore.geometry`).  The
ground is the plane y = ground_height; cameras sit ``CAMERA_HEIGHT`` above it
unless posed otherwise.  Rendering is a pure function of (scene, pose, W, H):
same inputs, bit-identical output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, NoFreePathError, RenderError
from .geometry import _pixel_center_lonlat, wrap_angle

CAMERA_HEIGHT = 1.6
DEFAULT_CLEARANCE = 0.5

# fixed directional light; ambient + diffuse never exceeds 1
LIGHT_DIR = np.array([0.45, 0.80, 0.30])
LIGHT_DIR = LIGHT_DIR / np.linalg.norm(LIGHT_DIR)
AMBIENT = 0.4
DIFFUSE = 0.6

#: albedos for tagged entities used by perception and scenario building
ENTITY_COLORS = {
    "ambulance": (0.95, 0.12, 0.12),
    "taxi": (0.98, 0.84, 0.10),
    "bus": (0.15, 0.35, 0.90),
    "car": (0.15, 0.80, 0.30),
}

_GRAYS = [(0.52, 0.52, 0.55), (0.66, 0.64, 0.60), (0.42, 0.45, 0.48),
          (0.58, 0.50, 0.44), (0.72, 0.70, 0.66), (0.35, 0.38, 0.40)]


def shaded_color(albedo, normal, light_dir=None) -> np.ndarray:
    """Flat shading: albedo * (ambient + diffuse * max(0, n . light))."""
    albedo = np.asarray(albedo, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    light = LIGHT_DIR if light_dir is None else np.asarray(light_dir, dtype=np.float64)
    return albedo * (AMBIENT + DIFFUSE * max(0.0, float(n @ light)))


@dataclass(frozen=True)
class Pose:
    """Agent position (metres) and heading (radians, wrapped to [-pi, pi))."""

    position: tuple
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "yaw", float(wrap_angle(self.yaw)))
        if len(self.position) != 3:
            raise DomainError("position must be (x, y, z)")

    @property
    def xyz(self) -> np.ndarray:
        return np.array(self.position)

    def forward(self) -> np.ndarray:
        return np.array([np.cos(self.yaw), 0.0, np.sin(self.yaw)])

    def moved(self, distance: float, vertical: float = 0.0) -> "Pose":
        p = self.xyz + distance * self.forward() + np.array([0.0, vertical, 0.0])
        return Pose(tuple(p), self.yaw)

    def turned(self, delta: float) -> "Pose":
        return Pose(self.position, self.yaw + delta)

    def to_json(self) -> dict:
        return {"position": list(self.position), "yaw": self.yaw}

    @classmethod
    def from_json(cls, doc: dict) -> "Pose":
        return cls(tuple(doc["position"]), float(doc["yaw"]))


@dataclass(frozen=True)
class Primitive:
    """One solid: box (full extents), cylinder (radius, height; axis +Y) or sphere (radius)."""

    kind: str
    center: tuple
    dimensions: tuple
    color: tuple
    entity_tag: str | None = None

    def __post_init__(self):
        if self.kind not in ("box", "cylinder", "sphere"):
            raise DomainError(f"unknown primitive kind {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "dimensions", tuple(float(d) for d in self.dimensions))
        object.__setattr__(self, "color", tuple(float(c) for c in self.color))
        need = {"box": 3, "cylinder": 2, "sphere": 1}[self.kind]
        if len(self.dimensions) != need:
            raise DomainError(f"{self.kind} needs {need} dimensions")
        if any(d <= 0 for d in self.dimensions):
            raise DomainError("dimensions must be strictly positive")

    def to_json(self) -> dict:
        doc = {"kind": self.kind, "center": list(self.center),
               "dimensions": list(self.dimensions), "color": list(self.color)}
        if self.entity_tag:
            doc["entity_tag"] = self.entity_tag
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Primitive":
        return cls(doc["kind"], tuple(doc["center"]), tuple(doc["dimensions"]),
                   tuple(doc["color"]), doc.get("entity_tag"))


@dataclass(frozen=True)
class Slot:
    """A tagged scene location that may hold one entity (or be empty)."""

    anchor: tuple
    candidates: tuple
    actual: str = "empty"

    def to_json(self) -> dict:
        return {"anchor": list(self.anchor), "candidates": list(self.candidates),
                "actual": self.actual}

    @classmethod
    def from_json(cls, doc: dict) -> "Slot":
        return cls(tuple(doc["anchor"]), tuple(doc["candidates"]), doc["actual"])


@dataclass
class Scene:
    """A procedural world: sky + ground plane + solid primitives."""

    seed: int
    extent: float = 40.0
    sky_color: tuple = (0.55, 0.75, 0.95)
    ground_height: float = 0.0
    ground_color: tuple = (0.45, 0.42, 0.38)
    primitives: list = field(default_factory=list)
    slots: dict = field(default_factory=dict)
    spawn_clearance: float = 4.0
    light_dir: tuple = tuple(LIGHT_DIR)

    def untagged(self):
        return [p for p in self.primitives if p.entity_tag is None]

    def to_json(self) -> dict:
        return {
            "schema": "scene/1",
            "seed": int(self.seed),
            "extent": self.extent,
            "sky_color": list(self.sky_color),
            "ground_height": self.ground_height,
            "ground_color": list(self.ground_color),
            "spawn_clearance": self.spawn_clearance,
            "light_dir": list(self.light_dir),
            "primitives": [p.to_json() for p in self.primitives],
            "slots": {k: s.to_json() for k, s in self.slots.items()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, doc: dict) -> "Scene":
        if doc.get("schema") != "scene/1":
            raise DomainError(f"unsupported scene schema {doc.get('schema')!r}")
        return cls(
            seed=doc["seed"],
            extent=doc["extent"],
            sky_color=tuple(doc["sky_color"]),
            ground_height=doc["ground_height"],
            ground_color=tuple(doc["ground_color"]),
            spawn_clearance=doc.get("spawn_clearance", 4.0),
            light_dir=tuple(doc.get("light_dir", tuple(LIGHT_DIR))),
            primitives=[Primitive.from_json(p) for p in doc["primitives"]],
            slots={k: Slot.from_json(s) for k, s in doc.get("slots", {}).items()},
        )

    @classmethod
    def loads(cls, text: str) -> "Scene":
        return cls.from_json(json.loads(text))

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.dumps())
        return path

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.loads(Path(path).read_text())


@dataclass(frozen=True)
class SceneParams:
    """Generation knobs; density is expected primitives per 1000 m^2."""

    density: float = 2.0
    extent: float = 40.0
    palette: tuple = tuple(_GRAYS)
    spawn_clearance: float = 4.0

    def count_bounds(self) -> tuple:
        expected = self.density * (2.0 * self.extent) ** 2 / 1000.0
        if expected <= 0:
            return 0, 0
        return max(0, int(np.floor(0.5 * expected))), int(np.ceil(1.5 * expected))


def generate_scene(seed: int, params: SceneParams = SceneParams()) -> Scene:
    """Deterministic procedural scene; identical seed+params give identical scenes."""
    if params.extent <= 0:
        raise DomainError("extent must be > 0")
    rng = np.random.default_rng(seed)
    lo, hi = params.count_bounds()
    count = 0 if hi == 0 else int(rng.integers(lo, hi + 1))
    scene = Scene(seed=seed, extent=params.extent, spawn_clearance=params.spawn_clearance)
    palette = [tuple(c) for c in params.palette]
    attempts = 0
    while len(scene.primitives) < count and attempts < count * 50 + 100:
        attempts += 1
        kind = rng.choice(["box", "cylinder", "sphere"], p=[0.5, 0.35, 0.15])
        x = float(rng.uniform(-params.extent, params.extent))
        z = float(rng.uniform(-params.extent, params.extent))
        if np.hypot(x, z) < params.spawn_clearance + 4.0:
            continue  # keep the agent spawn region open
        color = palette[int(rng.integers(len(palette)))]
        g = scene.ground_height
        if kind == "box":
            sx, sy, sz = rng.uniform(2.0, 8.0), rng.uniform(2.0, 12.0), rng.uniform(2.0, 8.0)
            prim = Primitive("box", (x, g + sy / 2.0, z), (sx, sy, sz), color)
        elif kind == "cylinder":
            r, h = rng.uniform(1.0, 3.0), rng.uniform(3.0, 10.0)
            prim = Primitive("cylinder", (x, g + h / 2.0, z), (r, h), color)
        else:
            r = rng.uniform(1.0, 3.0)
            prim = Primitive("sphere", (x, g + r, z), (r,), color)
        scene.primitives.append(prim)
    return scene


# --- ray casting ----------------------------------------------------------

def _ray_box(origin, dirs, prim):
    """Slab test; returns (t, normal) arrays with t=inf where missed."""
    c = np.array(prim.center)
    half = np.array(prim.dimensions) / 2.0
    lo, hi = c - half, c + half
    # nudge exactly-parallel components so the slab test never produces NaN
    safe = np.where(np.abs(dirs) < 1e-15, np.where(dirs < 0, -1e-15, 1e-15), dirs)
    inv = 1.0 / safe
    t_lo = (lo - origin) * inv
    t_hi = (hi - origin) * inv
    t_near = np.minimum(t_lo, t_hi)
    t_far = np.maximum(t_lo, t_hi)
    t_enter = np.max(t_near, axis=-1)
    t_exit = np.min(t_far, axis=-1)
    hit = (t_enter <= t_exit) & (t_exit > 1e-9) & (t_enter > 1e-9)
    t = np.where(hit, t_enter, np.inf)
    # entering axis and side
    axis = np.argmax(t_near, axis=-1)
    sel = axis[..., None] == np.arange(3)
    normal = np.where(sel, -np.sign(safe), 0.0)
    return t, normal


def _ray_cylinder(origin, dirs, prim):
    cx, cy, cz = prim.center
    radius, height = prim.dimensions
    y_lo, y_hi = cy - height / 2.0, cy + height / 2.0
    ox, oy, oz = origin
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    fx, fz = ox - cx, oz - cz

    with np.errstate(divide="ignore", invalid="ignore"):
        a = dx * dx + dz * dz
        b = 2.0 * (fx * dx + fz * dz)
        cq = fx * fx + fz * fz - radius * radius
        disc = b * b - 4.0 * a * cq
        sq = np.sqrt(np.maximum(disc, 0.0))
        t_side = (-b - sq) / (2.0 * a)
        y_at = oy + t_side * dy
        side_ok = (disc >= 0) & (a > 1e-18) & (t_side > 1e-9) & (y_at >= y_lo) & (y_at <= y_hi)
        t_side = np.where(side_ok, t_side, np.inf)

        # caps
        t_top = (y_hi - oy) / dy
        t_bot = (y_lo - oy) / dy

        def cap_ok(t):
            px = ox + t * dx - cx
            pz = oz + t * dz - cz
            return (t > 1e-9) & (px * px + pz * pz <= radius * radius)

        t_top = np.where(cap_ok(t_top), t_top, np.inf)
        t_bot = np.where(cap_ok(t_bot), t_bot, np.inf)

        t = np.minimum(t_side, np.minimum(t_top, t_bot))
        normal = np.zeros(dirs.shape)
        use_side = (t == t_side) & np.isfinite(t)
        use_top = (t == t_top) & np.isfinite(t) & ~use_side
        use_bot = (t == t_bot) & np.isfinite(t) & ~use_side & ~use_top
        px = ox + t * dx - cx
        pz = oz + t * dz - cz
        rn = np.sqrt(px * px + pz * pz)
        rn = np.where((rn == 0) | ~np.isfinite(rn), 1.0, rn)
        normal[..., 0] = np.where(use_side, px / rn, 0.0)
        normal[..., 2] = np.where(use_side, pz / rn, 0.0)
        normal[..., 1] = np.where(use_top, 1.0, np.where(use_bot, -1.0, normal[..., 1]))
    return t, normal


def _ray_sphere(origin, dirs, prim):
    c = np.array(prim.center)
    r = prim.dimensions[0]
    f = origin - c
    b = 2.0 * (dirs @ f)
    cq = float(f @ f) - r * r
    disc = b * b - 4.0 * cq  # a == 1 for unit dirs
    sq = np.sqrt(np.maximum(disc, 0.0))
    t = (-b - sq) / 2.0
    ok = (disc >= 0) & (t > 1e-9)
    t = np.where(ok, t, np.inf)
    with np.errstate(invalid="ignore"):
        p = origin + t[..., None] * dirs
        normal = (p - c) / r
    normal = np.where(np.isfinite(normal), normal, 0.0)
    return t, normal


_INTERSECTORS = {"box": _ray_box, "cylinder": _ray_cylinder, "sphere": _ray_sphere}


def point_inside(prim: Primitive, point) -> bool:
    p = np.asarray(point, dtype=np.float64)
    return primitive_distance(prim, p) <= 0.0


def primitive_distance(prim: Primitive, point) -> float:
    """Signed distance from a point to the primitive surface (negative inside)."""
    p = np.asarray(point, dtype=np.float64)
    c = np.array(prim.center)
    if prim.kind == "box":
        half = np.array(prim.dimensions) / 2.0
        q = np.abs(p - c) - half
        outside = np.linalg.norm(np.maximum(q, 0.0))
        inside = min(float(np.max(q)), 0.0)
        return float(outside + inside)
    if prim.kind == "cylinder":
        radius, height = prim.dimensions
        dr = float(np.hypot(p[0] - c[0], p[2] - c[2])) - radius
        dz = abs(p[1] - c[1]) - height / 2.0
        outside = float(np.hypot(max(dr, 0.0), max(dz, 0.0)))
        inside = min(max(dr, dz), 0.0)
        return outside + inside
    return float(np.linalg.norm(p - c)) - prim.dimensions[0]


def surface_distance(scene: Scene, point) -> float:
    """Unsigned distance to the nearest scene surface (primitives or ground)."""
    p = np.asarray(point, dtype=np.float64)
    best = abs(float(p[1]) - scene.ground_height)
    for prim in scene.primitives:
        best = min(best, abs(primitive_distance(prim, p)))
    return best


def _bounding_radius(prim: Primitive) -> float:
    if prim.kind == "box":
        return float(np.linalg.norm(prim.dimensions) / 2.0)
    if prim.kind == "cylinder":
        r, h = prim.dimensions
        return float(np.hypot(r, h / 2.0))
    return prim.dimensions[0]


def _angular_window(origin, yaw, prim, width, height):
    """(rows slice, column indices | None) covering every pixel whose ray can
    touch the primitive; None columns mean the full width.  Bounds are
    conservative: overcovering is fine, undercovering would drop hits."""
    rel = np.array(prim.center) - origin
    dist = float(np.linalg.norm(rel))
    radius = _bounding_radius(prim)
    if dist <= radius * 1.05 + 1e-9:
        return slice(0, height), None
    alpha = float(np.arcsin(min(1.0, radius / dist))) + 2.0 * np.pi / height
    lat_c = float(np.arcsin(np.clip(rel[1] / dist, -1.0, 1.0)))
    lat_hi = min(np.pi / 2, lat_c + alpha)
    lat_lo = max(-np.pi / 2, lat_c - alpha)
    row_lo = max(0, int(np.floor(height / np.pi * (np.pi / 2 - lat_hi))) - 1)
    row_hi = min(height, int(np.ceil(height / np.pi * (np.pi / 2 - lat_lo))) + 1)
    rows = slice(row_lo, row_hi)
    edge = max(abs(lat_lo), abs(lat_hi))
    if edge >= np.pi / 2 - 1e-9:
        return rows, None  # window touches a pole: take all columns
    dlon = float(np.arcsin(min(1.0, np.sin(alpha) / np.cos(edge))))
    lon_c = float(np.arctan2(rel[2], rel[0])) - yaw
    u_c = width / (2.0 * np.pi) * (lon_c + np.pi)
    half_u = width / (2.0 * np.pi) * dlon + 2.0
    col_lo = int(np.floor(u_c - half_u))
    col_hi = int(np.ceil(u_c + half_u))
    if col_hi - col_lo >= width:
        return rows, None
    cols = np.arange(col_lo, col_hi + 1) % width
    return rows, cols


def _raycast(scene: Scene, pose: Pose, width: int, height: int, cull: bool = True):
    """Shared core; returns (t, albedo, normal, shaded_mask)."""
    origin = pose.xyz
    for prim in scene.primitives:
        if primitive_distance(prim, origin) <= 0.0:
            raise RenderError(f"camera pose is inside a {prim.kind} at {prim.center}")
    if origin[1] <= scene.ground_height:
        raise RenderError("camera pose is at or below the ground plane")

    phi, theta = _pixel_center_lonlat(width, height)
    lon = phi + pose.yaw
    cos_lon, sin_lon = np.cos(lon), np.sin(lon)
    ct, st = np.cos(theta)[:, None], np.sin(theta)[:, None]
    dirs = np.empty((height, width, 3))
    dirs[..., 0] = ct * cos_lon[None, :]
    dirs[..., 1] = st * np.ones((1, width))
    dirs[..., 2] = ct * sin_lon[None, :]

    t_best = np.full((height, width), np.inf)
    albedo = np.empty((height, width, 3))
    albedo[:] = np.array(scene.sky_color)
    normal = np.zeros((height, width, 3))
    shaded = np.zeros((height, width), dtype=bool)

    # ground plane: only the lower half has downward pixel-centre rays
    g_rows = slice((height + 1) // 2, height)
    dy = dirs[g_rows, :, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_g = (scene.ground_height - origin[1]) / dy
    ok = (dy < 0) & (t_g > 0)
    t_best[g_rows] = np.where(ok, t_g, np.inf)
    albedo[g_rows][ok] = np.array(scene.ground_color)  # basic slice: view
    normal[g_rows][ok] = np.array([0.0, 1.0, 0.0])
    shaded[g_rows] |= ok

    for prim in scene.primitives:
        rows, cols = _angular_window(origin, pose.yaw, prim, width, height) if cull \
            else (slice(0, height), None)
        if rows.start >= rows.stop:
            continue
        if cols is None:
            sub_dirs = dirs[rows]
            t, n = _INTERSECTORS[prim.kind](origin, sub_dirs, prim)
            closer = t < t_best[rows]
            if not closer.any():
                continue
            t_best[rows] = np.where(closer, t, t_best[rows])
            albedo[rows][closer] = np.array(prim.color)
            normal[rows][closer] = n[closer]
            shaded[rows] |= closer
        else:
            ix = np.ix_(np.arange(rows.start, rows.stop), cols)
            sub_dirs = dirs[rows][:, cols]
            t, n = _INTERSECTORS[prim.kind](origin, sub_dirs, prim)
            t_sub = t_best[ix]
            closer = t < t_sub
            if not closer.any():
                continue
            t_best[ix] = np.where(closer, t, t_sub)
            sub = albedo[ix]
            sub[closer] = np.array(prim.color)
            albedo[ix] = sub
            sub = normal[ix]
            sub[closer] = n[closer]
            normal[ix] = sub
            sh = shaded[ix]
            sh[closer] = True
            shaded[ix] = sh
    return t_best, albedo, normal, shaded


def render_panorama(scene: Scene, pose: Pose, width: int = 1024, height: int = 512) -> np.ndarray:
    """Exact panorama render at the pose; deterministic per (scene, pose, W, H)."""
    _, albedo, normal, shaded = _raycast(scene, pose, width, height)
    lam = AMBIENT + DIFFUSE * np.maximum(0.0, normal @ np.asarray(scene.light_dir))
    factor = np.where(shaded, lam, 1.0)
    return np.clip(albedo * factor[..., None], 0.0, 1.0)


def render_depth(scene: Scene, pose: Pose, width: int = 1024, height: int = 512) -> np.ndarray:
    """Per-pixel ray-hit distance in metres; inf for sky."""
    t, _, _, _ = _raycast(scene, pose, width, height)
    return t


# --- collision and path sampling ------------------------------------------

def _point_distances(prim: Primitive, points: np.ndarray) -> np.ndarray:
    """Vectorised signed distance from points (N, 3) to the primitive."""
    c = np.array(prim.center)
    if prim.kind == "box":
        half = np.array(prim.dimensions) / 2.0
        q = np.abs(points - c) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside
    if prim.kind == "cylinder":
        radius, height = prim.dimensions
        dr = np.hypot(points[:, 0] - c[0], points[:, 2] - c[2]) - radius
        dz = np.abs(points[:, 1] - c[1]) - height / 2.0
        outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
        inside = np.minimum(np.maximum(dr, dz), 0.0)
        return outside + inside
    return np.linalg.norm(points - c, axis=-1) - prim.dimensions[0]


def _segment_min_distance(prim: Primitive, a: np.ndarray, b: np.ndarray, grid: int = 65) -> float:
    """Min distance from segment ab to the primitive.

    Distance along the segment is convex and 1-Lipschitz in arc length, so a
    coarse grid brackets the minimum; a short ternary refinement makes the
    answer exact to ~1e-12 when the grid alone cannot decide.
    """
    ab = b - a
    length = float(np.linalg.norm(ab))
    ts = np.linspace(0.0, 1.0, grid)
    d = _point_distances(prim, a[None, :] + ts[:, None] * ab[None, :])
    i = int(np.argmin(d))
    best = float(d[i])
    slack = length / (grid - 1) if length > 0 else 0.0
    if slack == 0.0:
        return best
    # refine inside the bracketing interval (convex along the segment)
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, grid - 1)]
    for _ in range(60):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = primitive_distance(prim, a + m1 * ab)
        f2 = primitive_distance(prim, a + m2 * ab)
        if f1 <= f2:
            hi = m2
        else:
            lo = m1
    return min(best, primitive_distance(prim, a + lo * ab))


def check_collision(scene: Scene, start: Pose, end: Pose, clearance: float = DEFAULT_CLEARANCE) -> bool:
    """True iff the swept segment with the clearance radius touches any
    primitive; exact tangency counts as a collision."""
    if clearance < 0:
        raise DomainError("clearance must be >= 0")
    a, b = start.xyz, end.xyz
    ab = b - a
    length = float(np.linalg.norm(ab))
    grid = 65
    ts = np.linspace(0.0, 1.0, grid)
    pts = a[None, :] + ts[:, None] * ab[None, :]
    slack = length / (grid - 1) / 2.0
    for prim in scene.primitives:
        d = _point_distances(prim, pts)
        best = float(np.min(d))
        if best <= clearance:
            return True
        if best - slack > clearance:
            continue  # grid gap cannot hide a closer approach (1-Lipschitz)
        if _segment_min_distance(prim, a, b, grid) <= clearance:
            return True
    return False


def segment_blocked(scene: Scene, a, b, ignore_tagged: bool = True) -> bool:
    """Line-of-sight test: does any (static) primitive cut segment a->b?"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = b - a
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        return False
    dirs = (d / dist)[None, None, :]
    for prim in scene.primitives:
        if ignore_tagged and prim.entity_tag is not None:
            continue
        t, _ = _INTERSECTORS[prim.kind](a, dirs, prim)
        if float(t[0, 0]) < dist - 1e-6:
            return True
    return False


@dataclass(frozen=True)
class PathSample:
    """A straight constant-velocity path: frame_count poses including the start."""

    start: Pose
    length: float
    frame_count: int

    @property
    def poses(self) -> list:
        step = self.length / (self.frame_count - 1)
        return [self.start.moved(step * k) for k in range(self.frame_count)]


def sample_free_pose(scene: Scene, rng, clearance: float = DEFAULT_CLEARANCE,
                     max_retries: int = 1000) -> Pose:
    """Uniform collision-free pose at camera height within the scene extent."""
    for _ in range(max_retries):
        x = float(rng.uniform(-scene.extent, scene.extent))
        z = float(rng.uniform(-scene.extent, scene.extent))
        yaw = float(rng.uniform(-np.pi, np.pi))
        pose = Pose((x, scene.ground_height + CAMERA_HEIGHT, z), yaw)
        if not check_collision(scene, pose, pose, clearance):
            return pose
    raise NoFreePathError("no collision-free pose found")


def sample_straight_path(scene: Scene, rng, length: float = 20.0, frames: int = 50,
                         clearance: float = DEFAULT_CLEARANCE, max_retries: int = 1000) -> PathSample:
    """Random collision-free straight path (rejection sampling, bounded retries)."""
    if frames < 2:
        raise DomainError("frames must be >= 2")
    for _ in range(max_retries):
        x = float(rng.uniform(-scene.extent, scene.extent))
        z = float(rng.uniform(-scene.extent, scene.extent))
        yaw = float(rng.uniform(-np.pi, np.pi))
        start = Pose((x, scene.ground_height + CAMERA_HEIGHT, z), yaw)
        if check_collision(scene, start, start.moved(length), clearance):
            continue
        return PathSample(start, length, frames)
    raise NoFreePathError(f"no free straight path of {length} m after {max_retries} tries")


#: conditioning-window convention for generated datasets: any of frames 1..25
#: may serve as the conditioning image, with the following 25 frames as targets
CONDITIONING_WINDOW = {"condition_start_frames": [1, 25], "target_frames": 25}


def generate_dataset(scene: Scene, n_paths: int, rng, width: int = 1024, height: int = 512,
                     length: float = 20.0, frames: int = 50, out_dir=None):
    """Render straight-path panorama videos; optionally write PNG frames + manifest.

    Returns a list of (frames, PathSample); each video has exactly ``frames``
    panoramas rendered at the path poses.
    """
    results = []
    manifest = {"schema": "dataset/1", "scene_seed": scene.seed, "paths": [],
                "meters_per_frame": length / (frames - 1),
                "conditioning": CONDITIONING_WINDOW}
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_paths):
        path = sample_straight_path(scene, rng, length=length, frames=frames)
        video = [render_panorama(scene, p, width, height) for p in path.poses]
        results.append((video, path))
        entry = {"index": i, "length": path.length, "frame_count": path.frame_count,
                 "poses": [p.to_json() for p in path.poses]}
        if out_dir is not None:
            from .imageio import save_panorama

            frame_files = []
            for k, img in enumerate(video):
                f = out_dir / f"path{i:04d}_frame{k:03d}.png"
                save_panorama(f, img)
                frame_files.append(f.name)
            entry["frames"] = frame_files
        manifest["paths"].append(entry)
    if out_dir is not None:
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return results, manifest


def build_scene(*, seed: int = 0, extent: float = 40.0, sky=(0.55, 0.75, 0.95),
                ground=(0.45, 0.42, 0.38), primitives=(), slots=None,
                light_dir=None) -> Scene:
    """Convenience constructor for hand-built test scenes."""
    scene = Scene(seed=seed, extent=extent, sky_color=tuple(sky), ground_color=tuple(ground),
                  light_dir=tuple(light_dir) if light_dir is not None else tuple(LIGHT_DIR))
    scene.primitives.extend(primitives)
    if slots:
        scene.slots.update(slots)
    return scene
