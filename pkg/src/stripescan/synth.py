"""Synthetic projector-camera renderer with analytic ground-truth depth.

Radiometry is linear and Lambertian per channel: observed intensity is
reflectance times projected illumination plus an ambient floor and optional
Gaussian noise. Geometry is exact: camera rays intersect analytic surfaces,
hit points are projected into the projector and shadow-tested, and the
pattern is sampled bilinearly. The returned buffers (true 3D points, true
projector coordinates, lit mask, reflectance) are the oracle every other
stage is verified against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geometry import CalibrationPair
from .triangulate import RangeImage

_EPS_T = 1e-9
_SHADOW_TOL = 1e-6


# ---------------------------------------------------------------------------
# Surfaces

class Plane:
    """Infinite plane, optionally clipped by half-space constraints a.X <= b."""

    def __init__(self, point, normal, constraints=()):
        self.point = np.asarray(point, dtype=np.float64).reshape(3)
        n = np.asarray(normal, dtype=np.float64).reshape(3)
        self.normal = n / np.linalg.norm(n)
        self.constraints = [
            (np.asarray(a, dtype=np.float64).reshape(3), float(b)) for a, b in constraints
        ]

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        o = np.asarray(origin, dtype=np.float64)
        d = np.asarray(dirs, dtype=np.float64)
        denom = d @ self.normal
        num = (self.point - o) @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(denom) > 1e-15, num / denom, np.inf)
        t = np.where(t > _EPS_T, t, np.inf)
        if self.constraints:
            pts = o + t[..., None] * d
            for a, b in self.constraints:
                t = np.where(pts @ a <= b + 1e-12, t, np.inf)
        return t

    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic in-plane axes used for texture mapping."""
        ref = np.array([0.0, 1.0, 0.0])
        if abs(self.normal @ ref) > 0.99:
            ref = np.array([1.0, 0.0, 0.0])
        u = np.cross(ref, self.normal)
        u /= np.linalg.norm(u)
        v = np.cross(self.normal, u)
        return u, v


class Sphere:
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=np.float64).reshape(3)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        o = np.asarray(origin, dtype=np.float64)
        d = np.asarray(dirs, dtype=np.float64)
        oc = o - self.center
        a = np.sum(d * d, axis=-1)
        b = 2.0 * (d @ oc) if oc.ndim == 1 else 2.0 * np.sum(d * oc, axis=-1)
        c = float(oc @ oc) if oc.ndim == 1 else np.sum(oc * oc, axis=-1)
        disc = b * b - 4.0 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0 = (-b - sq) / (2.0 * a)
        t1 = (-b + sq) / (2.0 * a)
        t = np.where(t0 > _EPS_T, t0, np.where(t1 > _EPS_T, t1, np.inf))
        return np.where(disc >= 0.0, t, np.inf)

    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])


# ---------------------------------------------------------------------------
# Reflectance models

class ConstantReflectance:
    def __init__(self, rgb):
        self.rgb = np.clip(np.asarray(rgb, dtype=np.float64).reshape(3), 0.0, 1.0)

    def sample(self, points: np.ndarray, surface) -> np.ndarray:
        return np.broadcast_to(self.rgb, points.shape).copy()


class CheckerReflectance:
    """2x2 repeating block of four patch colors in the surface's own frame."""

    def __init__(self, colors, patch_m: float, anchor=(0.0, 0.0, 0.0)):
        self.colors = np.clip(np.asarray(colors, dtype=np.float64).reshape(4, 3), 0.0, 1.0)
        self.patch_m = float(patch_m)
        self.anchor = np.asarray(anchor, dtype=np.float64).reshape(3)

    def _uv(self, points: np.ndarray, surface) -> tuple[np.ndarray, np.ndarray]:
        u_ax, v_ax = surface.frame()
        rel = points - self.anchor
        return rel @ u_ax, rel @ v_ax

    def patch_ids(self, points: np.ndarray, surface) -> np.ndarray:
        u, v = self._uv(points, surface)
        iu = np.floor(u / self.patch_m).astype(np.int64)
        iv = np.floor(v / self.patch_m).astype(np.int64)
        return (iu % 2) * 2 + (iv % 2)

    def sample(self, points: np.ndarray, surface) -> np.ndarray:
        return self.colors[self.patch_ids(points, surface)]


class PlanarTexture:
    """Raster texture mapped through the surface frame with wraparound."""

    def __init__(self, texture: np.ndarray, meters_per_texel: float, anchor=(0.0, 0.0, 0.0)):
        self.texture = np.clip(np.asarray(texture, dtype=np.float64), 0.0, 1.0)
        self.m_per_texel = float(meters_per_texel)
        self.anchor = np.asarray(anchor, dtype=np.float64).reshape(3)

    def sample(self, points: np.ndarray, surface) -> np.ndarray:
        u_ax, v_ax = surface.frame()
        rel = points - self.anchor
        tu = np.floor((rel @ u_ax) / self.m_per_texel).astype(np.int64)
        tv = np.floor((rel @ v_ax) / self.m_per_texel).astype(np.int64)
        h, w = self.texture.shape[:2]
        return self.texture[tv % h, tu % w]


def noise_texture(seed: int, cells: int = 12, size: int = 256,
                  low: float = 0.2, high: float = 1.0) -> np.ndarray:
    """Smooth random RGB blobs: a coarse random grid upsampled bilinearly."""
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(low, high, size=(cells, cells, 3))
    ys = np.linspace(0, cells - 1, size)
    xs = np.linspace(0, cells - 1, size)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, cells - 1)
    x1 = np.minimum(x0 + 1, cells - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    a = coarse[y0][:, x0]
    b = coarse[y0][:, x1]
    c = coarse[y1][:, x0]
    d = coarse[y1][:, x1]
    return a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx + c * fy * (1 - fx) + d * fy * fx


# ---------------------------------------------------------------------------
# Scene

@dataclass
class SceneSurface:
    geometry: object
    reflectance: object


@dataclass
class Scene:
    surfaces: list[SceneSurface] = field(default_factory=list)
    ambient: float = 0.0


@dataclass
class RenderResult:
    """Rendered image plus the oracle buffers derived from exact geometry."""

    image: np.ndarray            # (H, W, 3) in [0, 1]
    ground_truth: RangeImage     # exact 3D points + validity
    proj_uv: np.ndarray          # (H, W, 2) continuous projector coords (NaN invalid)
    lit: np.ndarray              # (H, W) bool: in frustum, facing, not shadowed
    reflectance: np.ndarray      # (H, W, 3) sampled S
    surface_id: np.ndarray       # (H, W) int, -1 where no hit


def bilinear_sample(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample a raster at continuous coords (pixel centers at half-integers)."""
    h, w = image.shape[:2]
    px = np.clip(u - 0.5, 0.0, w - 1.0)
    py = np.clip(v - 0.5, 0.0, h - 1.0)
    x0 = np.floor(px).astype(np.int64)
    y0 = np.floor(py).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (px - x0)[..., None]
    fy = (py - y0)[..., None]
    out = (
        image[y0, x0] * (1 - fy) * (1 - fx)
        + image[y0, x1] * (1 - fy) * fx
        + image[y1, x0] * fy * (1 - fx)
        + image[y1, x1] * fy * fx
    )
    return out


def _nearest_hit(scene: Scene, origin: np.ndarray, dirs: np.ndarray):
    t_best = np.full(dirs.shape[:-1], np.inf)
    sid = np.full(dirs.shape[:-1], -1, dtype=np.int64)
    for i, surf in enumerate(scene.surfaces):
        t = surf.geometry.intersect(origin, dirs)
        closer = t < t_best
        t_best = np.where(closer, t, t_best)
        sid = np.where(closer, i, sid)
    return t_best, sid


def shadow_test(scene: Scene, points: np.ndarray, calib: CalibrationPair) -> np.ndarray:
    """True where a nearer surface blocks the projector-to-point segment."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    center = calib.projector_center
    dirs = pts - center
    t_best, _ = _nearest_hit(scene, center, dirs)
    shadowed = t_best < 1.0 - _SHADOW_TOL
    return bool(shadowed[0]) if single else shadowed


def render_scene(
    scene: Scene,
    pattern: np.ndarray,
    calib: CalibrationPair,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> RenderResult:
    """Render the scene under the projected pattern; exact depth as ground truth."""
    pattern = np.asarray(pattern, dtype=np.float64)
    ph, pw = pattern.shape[:2]
    if (pw, ph) != (calib.projector.width, calib.projector.height):
        raise ValueError(
            f"pattern size {(pw, ph)} does not match projector "
            f"{(calib.projector.width, calib.projector.height)}"
        )
    cam = calib.camera
    dirs = cam.ray_directions()
    t, sid = _nearest_hit(scene, np.zeros(3), dirs)
    valid = np.isfinite(t)
    t_safe = np.where(valid, t, 1.0)
    points = t_safe[..., None] * dirs

    refl = np.zeros_like(points)
    for i, surf in enumerate(scene.surfaces):
        mask = sid == i
        if np.any(mask):
            refl[mask] = surf.reflectance.sample(points[mask], surf.geometry)

    proj_pts = calib.to_projector_frame(points)
    u, v, z = calib.projector.project(proj_pts)
    in_front = z > _EPS_T
    in_frustum = in_front & (u >= 0.0) & (u <= pw) & (v >= 0.0) & (v <= ph)

    shadowed = np.zeros(valid.shape, dtype=bool)
    if valid.any():
        shadowed[valid] = shadow_test(scene, points[valid], calib)
    lit = valid & in_frustum & ~shadowed

    illum = np.zeros_like(points)
    if lit.any():
        illum[lit] = bilinear_sample(pattern, u[lit], v[lit])

    image = refl * illum + scene.ambient
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        image = image + rng.normal(0.0, noise_sigma, size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    image[~valid] = np.clip(scene.ambient, 0.0, 1.0)

    proj_uv = np.stack([u, v], axis=-1)
    proj_uv[~(valid & in_front)] = np.nan
    gt = RangeImage(
        points=np.where(valid[..., None], points, 0.0),
        valid=valid,
        confidence=valid.astype(np.float32),
        direction=None,
    )
    return RenderResult(image, gt, proj_uv, lit, refl, sid)


# ---------------------------------------------------------------------------
# Scene files

def _reflectance_from_dict(d: dict):
    kind = d.get("type", "constant")
    if kind == "constant":
        return ConstantReflectance(d.get("rgb", [1.0, 1.0, 1.0]))
    if kind == "checker":
        return CheckerReflectance(
            d["colors"], d["patch_m"], anchor=d.get("anchor", (0.0, 0.0, 0.0))
        )
    if kind == "noise":
        tex = noise_texture(
            int(d.get("seed", 0)), int(d.get("cells", 12)), int(d.get("size", 256)),
            float(d.get("low", 0.2)), float(d.get("high", 1.0)),
        )
        return PlanarTexture(tex, float(d["meters_per_texel"]),
                             anchor=d.get("anchor", (0.0, 0.0, 0.0)))
    if kind == "image":
        from . import images
        tex = images.load_png16(d["path"])
        return PlanarTexture(tex, float(d["meters_per_texel"]),
                             anchor=d.get("anchor", (0.0, 0.0, 0.0)))
    raise ValueError(f"unknown reflectance type: {kind}")


def _surface_from_dict(d: dict):
    kind = d["type"]
    if kind == "plane":
        constraints = [(c["a"], c["b"]) for c in d.get("constraints", [])]
        geom = Plane(d["point"], d["normal"], constraints)
    elif kind == "sphere":
        geom = Sphere(d["center"], d["radius"])
    else:
        raise ValueError(f"unknown surface type: {kind}")
    return SceneSurface(geom, _reflectance_from_dict(d.get("reflectance", {})))


def load_scene(path: str | Path) -> Scene:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"scene file not found: {p}")
    doc = yaml.safe_load(p.read_text())
    surfaces = [_surface_from_dict(s) for s in doc.get("surfaces", [])]
    return Scene(surfaces=surfaces, ambient=float(doc.get("ambient", 0.0)))
