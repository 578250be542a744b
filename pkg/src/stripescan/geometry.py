"""Pinhole camera/projector models and the calibrated pair that links them.

All 3D quantities live in the camera frame. Continuous image coordinates put
pixel (ix, iy) over the square [ix, ix+1) x [iy, iy+1), i.e. its center is at
(ix + 0.5, iy + 0.5). Calibration is consumed as input, never estimated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

ORTHONORMAL_TOL = 1e-9


@dataclass
class PinholeCamera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")

    def ray_directions(self) -> np.ndarray:
        """Unnormalized ray directions through all pixel centers, z-component 1."""
        xs = (np.arange(self.width) + 0.5 - self.cx) / self.fx
        ys = (np.arange(self.height) + 0.5 - self.cy) / self.fy
        d = np.empty((self.height, self.width, 3), dtype=np.float64)
        d[..., 0] = xs[None, :]
        d[..., 1] = ys[:, None]
        d[..., 2] = 1.0
        return d

    def pixel_ray(self, u: float, v: float) -> np.ndarray:
        """Ray direction through a continuous image coordinate."""
        return np.array([(u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0])

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Project local-frame points; returns (u, v, z) continuous coords."""
        p = np.asarray(points, dtype=np.float64)
        z = p[..., 2]
        safe = np.where(z != 0, z, 1.0)
        u = self.fx * p[..., 0] / safe + self.cx
        v = self.fy * p[..., 1] / safe + self.cy
        return u, v, z

    def to_dict(self) -> dict:
        return {
            "fx": float(self.fx), "fy": float(self.fy),
            "cx": float(self.cx), "cy": float(self.cy),
            "width": int(self.width), "height": int(self.height),
        }


@dataclass
class CalibrationPair:
    """Camera plus projector (an inverse camera) with their relative pose.

    `rotation`/`translation` map camera-frame points into the projector
    frame: X_proj = R @ X_cam + t.
    """

    camera: PinholeCamera
    projector: PinholeCamera
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise ValueError(f"rotation not orthonormal (max deviation {err:.2e})")
        if np.linalg.norm(self.translation) == 0.0:
            raise ValueError("camera and projector centers coincide (zero baseline)")

    @property
    def projector_center(self) -> np.ndarray:
        """Projector center of projection in the camera frame."""
        return -self.rotation.T @ self.translation

    def to_projector_frame(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def normal_to_camera_frame(self, normals: np.ndarray) -> np.ndarray:
        """Rotate direction vectors from the projector frame into the camera frame."""
        return np.asarray(normals, dtype=np.float64) @ self.rotation


def look_at_rotation(forward: np.ndarray, up_hint=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Rotation whose local +z axis points along `forward` (world-to-local rows)."""
    z = np.asarray(forward, dtype=np.float64)
    z = z / np.linalg.norm(z)
    up = np.asarray(up_hint, dtype=np.float64)
    x = np.cross(up, z)
    if np.linalg.norm(x) < 1e-12:
        x = np.cross(np.array([1.0, 0.0, 0.0]), z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.stack([x, y, z])


def simple_rig(
    baseline: float = 0.5,
    target_z: float = 1.3,
    camera_size: tuple[int, int] = (640, 480),
    camera_focal: float = 820.0,
    projector_size: tuple[int, int] = (1024, 768),
    projector_focal: float = 1100.0,
) -> CalibrationPair:
    """Camera at the origin looking +z; projector offset along +x, toed in."""
    cw, ch = camera_size
    pw, ph = projector_size
    cam = PinholeCamera(camera_focal, camera_focal, cw / 2.0, ch / 2.0, cw, ch)
    proj = PinholeCamera(projector_focal, projector_focal, pw / 2.0, ph / 2.0, pw, ph)
    center = np.array([baseline, 0.0, 0.0])
    rot = look_at_rotation(np.array([0.0, 0.0, target_z]) - center)
    trans = -rot @ center
    return CalibrationPair(cam, proj, rot, trans)


def save_calibration(calib: CalibrationPair, path: str | Path) -> None:
    doc = {
        "camera": calib.camera.to_dict(),
        "projector": calib.projector.to_dict(),
        "rotation": [[float(v) for v in row] for row in calib.rotation],
        "translation": [float(v) for v in calib.translation],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=True))


def load_calibration(path: str | Path) -> CalibrationPair:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"calibration file not found: {p}")
    doc = yaml.safe_load(p.read_text())
    return CalibrationPair(
        camera=PinholeCamera(**doc["camera"]),
        projector=PinholeCamera(**doc["projector"]),
        rotation=np.asarray(doc["rotation"]),
        translation=np.asarray(doc["translation"]),
    )
