"""Ray-plane triangulation of identified stripes, and the RangeImage type.

Each identified stripe defines a plane through the projector center that
contains the stripe's line on the projector image plane. Intersecting the
camera ray of a pixel with that plane yields the pixel's 3D point in the
camera frame.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometry, SizeMismatch
from .geometry import CalibrationPair
from .pattern import StripeSequence

MIN_RAY_ANGLE_DEG = 2.0


@dataclass
class RangeImage:
    """Per-pixel 3D points in the camera frame with validity and confidence."""

    points: np.ndarray            # (H, W, 3) float64, meters
    valid: np.ndarray             # (H, W) bool
    confidence: np.ndarray        # (H, W) float32
    direction: float | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.confidence = np.asarray(self.confidence, dtype=np.float32)
        if self.points.shape[:2] != self.valid.shape or self.valid.shape != self.confidence.shape:
            raise SizeMismatch("points/valid/confidence shapes disagree")

    @property
    def depth(self) -> np.ndarray:
        return self.points[..., 2]

    def save(self, path: str | Path) -> None:
        np.savez(
            path,
            xyz=self.points.astype(np.float32),
            valid=self.valid,
            confidence=self.confidence,
            direction=np.float64(np.nan if self.direction is None else self.direction),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RangeImage":
        with np.load(path) as z:
            d = float(z["direction"])
            return cls(
                points=z["xyz"].astype(np.float64),
                valid=z["valid"],
                confidence=z["confidence"],
                direction=None if np.isnan(d) else d,
            )


def write_ply(path: str | Path, points: np.ndarray, colors: np.ndarray | None = None) -> None:
    """Binary little-endian PLY: float32 xyz, optional uint8 rgb."""
    pts = np.asarray(points, dtype=np.float32).reshape(-1, 3)
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {len(pts)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if colors is not None:
        cols = np.asarray(colors)
        if cols.dtype != np.uint8:
            cols = np.clip(np.round(np.asarray(cols, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
        cols = cols.reshape(-1, 3)
        if len(cols) != len(pts):
            raise SizeMismatch("colors and points length differ")
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if colors is None:
            f.write(pts.astype("<f4").tobytes())
        else:
            rec = np.empty(len(pts), dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)])
            rec["xyz"] = pts
            rec["rgb"] = cols
            f.write(rec.tobytes())


def read_ply(path: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a PLY written by write_ply (vertices only)."""
    with open(path, "rb") as f:
        data = f.read()
    head_end = data.index(b"end_header\n") + len(b"end_header\n")
    lines = data[:head_end].decode("ascii").splitlines()
    n = next(int(l.split()[-1]) for l in lines if l.startswith("element vertex"))
    has_color = any("uchar red" in l for l in lines)
    body = data[head_end:]
    if has_color:
        rec = np.frombuffer(body, dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)], count=n)
        return rec["xyz"].copy(), rec["rgb"].copy()
    pts = np.frombuffer(body, dtype="<f4", count=n * 3).reshape(n, 3)
    return pts.copy(), None


def _planes_from_s(calib: CalibrationPair, s: np.ndarray, direction: float):
    """Planes through the projector center containing projector-image lines.

    The line is {p : p . n_hat = s} in projector pixel coords, n_hat the
    stripe normal. Returns unit normals (..., 3) and offsets (...,) in the
    camera frame, with plane equation n . X = offset.
    """
    proj = calib.projector
    theta = np.deg2rad(direction)
    nx, ny = np.cos(theta), np.sin(theta)
    s = np.asarray(s, dtype=np.float64)
    # Two points on the line: p0 = s*n_hat, p1 = p0 + tangent.
    p0x, p0y = s * nx, s * ny
    p1x, p1y = p0x - ny, p0y + nx
    d0 = np.stack([(p0x - proj.cx) / proj.fx, (p0y - proj.cy) / proj.fy,
                   np.ones_like(s)], axis=-1)
    d1 = np.stack([(p1x - proj.cx) / proj.fx, (p1y - proj.cy) / proj.fy,
                   np.ones_like(s)], axis=-1)
    n_proj = np.cross(d0, d1)
    n_proj /= np.linalg.norm(n_proj, axis=-1, keepdims=True)
    n_cam = calib.normal_to_camera_frame(n_proj)
    offset = n_cam @ calib.projector_center
    return n_cam, offset


def stripe_plane(
    calib: CalibrationPair,
    stripe_index: int,
    seq: StripeSequence,
    stripe_width_px: int,
    direction: float,
    origin: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Plane of a stripe's center line: s = origin + (index + 0.5) * width."""
    if not 0 <= stripe_index < len(seq):
        raise ValueError(f"stripe index {stripe_index} outside [0, {len(seq)})")
    s = origin + (stripe_index + 0.5) * stripe_width_px
    n, off = _planes_from_s(calib, np.float64(s), direction)
    return n, float(off)


def triangulate_pixel(
    calib: CalibrationPair,
    pixel: tuple[float, float],
    plane: tuple[np.ndarray, float],
) -> np.ndarray:
    """Intersect the camera ray through continuous coords `pixel` with a plane."""
    n, off = plane
    n = np.asarray(n, dtype=np.float64)
    d = calib.camera.pixel_ray(*pixel)
    denom = float(n @ d)
    cosine = abs(denom) / (np.linalg.norm(n) * np.linalg.norm(d))
    if cosine < np.sin(np.deg2rad(MIN_RAY_ANGLE_DEG)):
        raise DegenerateGeometry("camera ray nearly parallel to stripe plane")
    t = float(off) / denom
    if t <= 0.0:
        raise DegenerateGeometry("intersection behind the camera")
    return t * d


def triangulate_image(
    ids,
    calib: CalibrationPair,
    seq: StripeSequence,
    stripe_width_px: int,
    direction: float,
    origin: float = 0.0,
    use_subpixel: bool = True,
) -> RangeImage:
    """Triangulate every identified pixel of a StripeIdMap into a RangeImage."""
    if ids.direction is not None and abs((ids.direction - direction) % 360.0) > 1e-6 \
            and abs((direction - ids.direction) % 360.0) > 1e-6:
        raise ValueError(
            f"id map direction {ids.direction} does not match requested {direction}"
        )
    h, w = ids.index.shape
    valid_in = ids.index >= 0
    frac = ids.frac if use_subpixel else np.full_like(ids.frac, 0.5)
    s = origin + (ids.index.astype(np.float64) + frac.astype(np.float64)) * stripe_width_px

    n, off = _planes_from_s(calib, s, direction)
    dirs = calib.camera.ray_directions()
    denom = np.sum(n * dirs, axis=-1)
    cosine = np.abs(denom) / (np.linalg.norm(dirs, axis=-1) + 1e-300)
    ok_angle = cosine >= np.sin(np.deg2rad(MIN_RAY_ANGLE_DEG))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 1e-300, off / denom, -1.0)
    valid = valid_in & ok_angle & (t > 0.0)
    points = np.where(valid[..., None], t[..., None] * dirs, 0.0)
    conf = np.where(valid, ids.confidence, 0.0).astype(np.float32)
    return RangeImage(points=points, valid=valid, confidence=conf, direction=float(direction))


def predicted_depth_error(
    calib: CalibrationPair, stripe_width_px: int, depth: float
) -> float:
    """Depth uncertainty of one full stripe width at the given depth.

    Standard triangulation sensitivity: dz = z^2 * ds / (f_proj * baseline).
    """
    baseline = float(np.linalg.norm(calib.projector_center))
    f = calib.projector.fx
    return depth * depth * stripe_width_px / (f * baseline)
