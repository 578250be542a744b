"""Color helpers: stripe palettes and vectorized hue/saturation transforms."""

from __future__ import annotations

import numpy as np


def hsv_to_rgb(hue_deg: float, sat: float, val: float) -> np.ndarray:
    """Convert a single HSV triple (hue in degrees) to linear RGB."""
    h = (hue_deg % 360.0) / 60.0
    i = int(h) % 6
    f = h - int(h)
    p = val * (1.0 - sat)
    q = val * (1.0 - sat * f)
    t = val * (1.0 - sat * (1.0 - f))
    rgb = [
        (val, t, p),
        (q, val, p),
        (p, val, t),
        (p, q, val),
        (t, p, val),
        (val, p, q),
    ][i]
    return np.asarray(rgb, dtype=np.float64)


def stripe_palette(n_colors: int, floor: float = 0.05) -> np.ndarray:
    """Equally spaced hues at full value, lifted by a black floor.

    The floor models the nonzero black level of a real projector and keeps
    logarithms of pattern colors bounded. Hue spacing is unaffected.
    """
    if n_colors < 2:
        raise ValueError("palette needs at least 2 colors")
    if not 0.0 <= floor < 1.0:
        raise ValueError("floor must be in [0, 1)")
    hues = np.arange(n_colors) * (360.0 / n_colors)
    base = np.stack([hsv_to_rgb(h, 1.0, 1.0) for h in hues])
    return base * (1.0 - floor) + floor


def rgb_to_hue_sat(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hexagonal hue (degrees in [0, 360)) and saturation for an RGB raster."""
    img = np.asarray(image, dtype=np.float64)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    maxc = img.max(axis=-1)
    minc = img.min(axis=-1)
    delta = maxc - minc
    safe = np.where(delta > 0, delta, 1.0)

    hue = np.zeros_like(maxc)
    is_r = (maxc == r) & (delta > 0)
    is_g = (maxc == g) & (delta > 0) & ~is_r
    is_b = (delta > 0) & ~is_r & ~is_g
    hue = np.where(is_r, ((g - b) / safe) % 6.0, hue)
    hue = np.where(is_g, (b - r) / safe + 2.0, hue)
    hue = np.where(is_b, (r - g) / safe + 4.0, hue)
    hue = (hue * 60.0) % 360.0

    sat = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    return hue, sat


def hue_distance(a, b, period: float = 360.0):
    """Circular distance between hue angles."""
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) % period
    return np.minimum(d, period - d)


def min_hue_gap(alphabet: np.ndarray) -> float:
    """Smallest pairwise circular hue distance within a color alphabet."""
    hues, _ = rgb_to_hue_sat(np.asarray(alphabet, dtype=np.float64)[None, :, :])
    hues = hues[0]
    n = len(hues)
    if n < 2:
        return 360.0
    gaps = [hue_distance(hues[i], hues[j]) for i in range(n) for j in range(i + 1, n)]
    return float(np.min(gaps))
