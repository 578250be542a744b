"""Raster I/O: 16-bit PNG for color images, 32-bit float TIFF for data rasters."""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from .errors import SizeMismatch

PNG_MAX = 65535.0


def as_image(arr: np.ndarray) -> np.ndarray:
    """Validate an (H, W, 3) float raster and return it as float64."""
    a = np.asarray(arr)
    if a.ndim != 3 or a.shape[2] != 3:
        raise SizeMismatch(f"expected (H, W, 3) image, got shape {a.shape}")
    return a.astype(np.float64, copy=False)


def save_png16(path: str | Path, image: np.ndarray) -> None:
    """Write a [0, 1] RGB raster as a 16-bit PNG."""
    img = np.clip(as_image(image), 0.0, 1.0)
    u16 = np.round(img * PNG_MAX).astype(np.uint16)
    ok = cv2.imwrite(str(path), u16[..., ::-1])
    if not ok:
        raise OSError(f"failed to write PNG: {path}")


def load_png16(path: str | Path) -> np.ndarray:
    """Read a PNG written by save_png16 back to a [0, 1] float raster."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileNotFoundError(f"cannot read image: {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    scale = PNG_MAX if raw.dtype == np.uint16 else 255.0
    return raw[..., :3][..., ::-1].astype(np.float64) / scale


def save_gray16(path: str | Path, values: np.ndarray) -> None:
    """Write a single-channel uint16 raster (index maps, masks)."""
    v = np.asarray(values)
    if v.dtype != np.uint16:
        raise ValueError("save_gray16 expects uint16 data")
    if not cv2.imwrite(str(path), v):
        raise OSError(f"failed to write PNG: {path}")


def load_gray16(path: str | Path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileNotFoundError(f"cannot read image: {path}")
    return raw.astype(np.uint16)


def save_float_raster(path: str | Path, data: np.ndarray) -> None:
    """Write a float32 TIFF (1 or 3 channels) for debugging/ground-truth dumps."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr[..., ::-1]
    if not cv2.imwrite(str(path), arr):
        raise OSError(f"failed to write raster: {path}")


def load_float_raster(path: str | Path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileNotFoundError(f"cannot read raster: {path}")
    arr = raw.astype(np.float32)
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr[..., ::-1]
    return arr
