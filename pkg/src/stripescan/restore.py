"""Illumination restoration from directional log-gradients.

The observed image is reflectance times projected illumination, so its log
splits additively. Differentiating the log along the stripe-transition axis
keeps the fast illumination changes and drops reflectance variation along the
stripes. A Fourier-domain least-squares solve then rebuilds the log image
from that single directional derivative, and exponentiation undoes the log.
Because the transition axis varies over the image, the solve runs on a stack
of rotated copies and every pixel picks the rotation that maximizes its local
gradient magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.fft import irfft2, next_fast_len, rfft2

from .errors import ModesNotSeparable, SizeMismatch

DEFAULT_ANGLES = tuple(float(a) for a in range(0, 170, 10))
LOG_EPS = 1e-4
FOURIER_DELTA = 1e-8
SCALE_PERCENTILE = 99.0


@dataclass
class FilterKernel:
    """Small real 2D filter applied by true (flipping) convolution."""

    taps: np.ndarray

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.float64)

    def reversed(self) -> "FilterKernel":
        """Kernel with taps(x, y) -> taps(-x, -y)."""
        return FilterKernel(self.taps[::-1, ::-1].copy())

    def apply(self, image: np.ndarray, mode: str = "nearest") -> np.ndarray:
        """Convolve each channel with the kernel (edge-replicate borders)."""
        img = np.asarray(image, dtype=np.float64)
        weights = self.taps if img.ndim == 2 else self.taps[:, :, None]
        return ndimage.convolve(img, weights, mode=mode)


SOBEL_X = FilterKernel(np.array([[-1.0, 0.0, 1.0],
                                 [-2.0, 0.0, 2.0],
                                 [-1.0, 0.0, 1.0]]) / 8.0)
SOBEL_Y = FilterKernel(SOBEL_X.taps.T.copy())


# ---------------------------------------------------------------------------
# Rotation helpers

def _rotation_matrix_yx(angle_deg: float) -> np.ndarray:
    """Sampling matrix in (row, col) order for affine_transform."""
    a = np.deg2rad(angle_deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, s], [-s, c]])


def rotate_image(image: np.ndarray, angle_deg: float) -> np.ndarray:
    """Rotate so features with transition normal `angle_deg` align with +x.

    Bilinear sampling, edge-replicate padding, output canvas enlarged to the
    rotated bounding box. Exact center-to-center mapping so a later
    unrotate_image call realigns to subpixel precision.
    """
    if angle_deg % 360.0 == 0.0:
        return np.asarray(image, dtype=np.float64).copy()
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    a = np.deg2rad(angle_deg)
    c, s = abs(np.cos(a)), abs(np.sin(a))
    out_h = int(np.ceil(h * c + w * s))
    out_w = int(np.ceil(h * s + w * c))
    m = _rotation_matrix_yx(angle_deg)
    c_in = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    c_out = np.array([(out_h - 1) / 2.0, (out_w - 1) / 2.0])
    offset = c_in - m @ c_out
    if img.ndim == 3:
        m3 = np.eye(3)
        m3[:2, :2] = m
        off3 = np.array([offset[0], offset[1], 0.0])
        return ndimage.affine_transform(
            img, m3, offset=off3, output_shape=(out_h, out_w, img.shape[2]),
            order=1, mode="nearest")
    return ndimage.affine_transform(
        img, m, offset=offset, output_shape=(out_h, out_w), order=1, mode="nearest")


def unrotate_image(image: np.ndarray, angle_deg: float, out_shape: tuple[int, int]) -> np.ndarray:
    """Inverse of rotate_image, resampled directly onto the original raster."""
    img = np.asarray(image, dtype=np.float64)
    if angle_deg % 360.0 == 0.0:
        if img.shape[:2] != tuple(out_shape):
            raise SizeMismatch("zero-angle unrotate expects matching shapes")
        return img.copy()
    m = _rotation_matrix_yx(-angle_deg)
    c_in = np.array([(img.shape[0] - 1) / 2.0, (img.shape[1] - 1) / 2.0])
    c_out = np.array([(out_shape[0] - 1) / 2.0, (out_shape[1] - 1) / 2.0])
    offset = c_in - m @ c_out
    if img.ndim == 3:
        m3 = np.eye(3)
        m3[:2, :2] = m
        off3 = np.array([offset[0], offset[1], 0.0])
        return ndimage.affine_transform(
            img, m3, offset=off3, output_shape=(out_shape[0], out_shape[1], img.shape[2]),
            order=1, mode="nearest")
    return ndimage.affine_transform(
        img, m, offset=offset, output_shape=tuple(out_shape), order=1, mode="nearest")


# ---------------------------------------------------------------------------
# Gradient and reconstruction

def directional_log_gradient(image: np.ndarray, phi: float, eps: float = LOG_EPS) -> np.ndarray:
    """x-gradient of the log image after rotating transitions at `phi` onto +x."""
    ln = _log_rotate(image, phi, eps)
    return SOBEL_X.apply(ln)


def _log_rotate(image: np.ndarray, phi: float, eps: float) -> np.ndarray:
    img = np.clip(np.asarray(image, dtype=np.float64), eps, 1.0)
    rot = rotate_image(img, phi)
    np.clip(rot, eps, 1.0, out=rot)
    return np.log(rot)


def _even_fast_len(n: int) -> int:
    m = next_fast_len(n, real=True)
    while m % 2:
        m = next_fast_len(m + 1, real=True)
    return m


def _mirror_pad_gradient(ix: np.ndarray, my: int, mx: int) -> np.ndarray:
    """Extend an x-gradient field to a periodic canvas without wrap seams.

    The implied log image is extended evenly (mirror) in both axes, which
    makes its x-gradient odd under the x-mirror and even under the y-mirror.
    The last row/column are replicated up to the half sizes first so the
    mirrored halves tile the full (my, mx) canvas exactly.
    """
    h, w = ix.shape[:2]
    half_y, half_x = my // 2, mx // 2
    left = np.concatenate([ix, np.repeat(ix[:, -1:], half_x - w, axis=1)], axis=1)
    row = np.concatenate([left, -left[:, ::-1]], axis=1)
    top = np.concatenate([row, np.repeat(row[-1:, :], half_y - h, axis=0)], axis=0)
    return np.concatenate([top, top[::-1, :]], axis=0)


def _kernel_otf(taps: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Transfer function of true convolution with a small centered kernel."""
    kh, kw = taps.shape
    pad = np.zeros(shape, dtype=np.float64)
    pad[:kh, :kw] = taps
    pad = np.roll(pad, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return rfft2(pad)


def reconstruct_illumination(
    ix: np.ndarray,
    dc_mean=0.0,
    delta: float = FOURIER_DELTA,
) -> np.ndarray:
    """Least-squares log image whose x-gradient matches `ix` and y-gradient is small.

    Solved per channel in the Fourier domain; frequency bins whose combined
    filter power falls below `delta` are zeroed, and the per-channel mean is
    then shifted to `dc_mean` (the mean of the rotated log image).
    """
    ix = np.asarray(ix, dtype=np.float64)
    if ix.ndim != 3:
        raise SizeMismatch(f"expected (H, W, C) gradient image, got shape {ix.shape}")
    h, w = ix.shape[:2]
    my, mx = _even_fast_len(2 * h), _even_fast_len(2 * w)
    g = _mirror_pad_gradient(ix, my, mx)

    otf_x = _kernel_otf(SOBEL_X.taps, (my, mx))
    otf_y = _kernel_otf(SOBEL_Y.taps, (my, mx))
    denom = np.abs(otf_x) ** 2 + np.abs(otf_y) ** 2

    spec = rfft2(g, axes=(0, 1))
    num = np.conj(otf_x)[:, :, None] * spec
    keep = denom >= delta
    ratio = np.zeros_like(num)
    np.divide(num, denom[:, :, None], out=ratio, where=keep[:, :, None])
    full = irfft2(ratio, s=(my, mx), axes=(0, 1))
    out = full[:h, :w]

    target = np.broadcast_to(np.asarray(dc_mean, dtype=np.float64), (ix.shape[2],))
    out = out + (target - out.mean(axis=(0, 1)))
    return out


def restore_rotation(
    itilde: np.ndarray,
    phi: float,
    out_shape: tuple[int, int],
    scale_percentile: float = SCALE_PERCENTILE,
) -> np.ndarray:
    """Exponentiate a log restoration, rotate back, and normalize to [0, 1].

    The per-channel scale maps the given percentile to 1 so restorations from
    different rotations are mutually comparable.
    """
    img = np.exp(np.asarray(itilde, dtype=np.float64))
    img = unrotate_image(img, phi, out_shape)
    q = np.percentile(img, scale_percentile, axis=(0, 1))
    q = np.where(q > 1e-12, q, 1.0)
    return np.clip(img / q, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Rotation stack and per-pixel orientation selection

@dataclass
class OrientationField:
    """Per-pixel selected rotation angle and the gradient magnitude behind it."""

    angle_deg: np.ndarray         # (H, W) float32, members of the stack angle set
    magnitude: np.ndarray         # (H, W) float32
    valid: np.ndarray             # (H, W) bool


@dataclass
class RotationStack:
    """Per-angle restorations (and optionally gradients) for one input image."""

    angles: np.ndarray                       # (A,) degrees, strictly increasing
    restored: list[np.ndarray]               # A x (H, W, 3)
    grad_mag: np.ndarray                     # (A, H, W) selection magnitudes
    gradients: list[np.ndarray] | None = None

    @classmethod
    def build(
        cls,
        image: np.ndarray,
        angles=DEFAULT_ANGLES,
        eps: float = LOG_EPS,
        delta: float = FOURIER_DELTA,
        scale_percentile: float = SCALE_PERCENTILE,
        keep_gradients: bool = False,
    ) -> "RotationStack":
        img = np.asarray(image, dtype=np.float64)
        if img.ndim != 3 or img.shape[2] != 3:
            raise SizeMismatch(f"expected (H, W, 3) image, got {img.shape}")
        h, w = img.shape[:2]
        angle_arr = np.asarray(angles, dtype=np.float64)
        restored: list[np.ndarray] = []
        mags = np.empty((len(angle_arr), h, w), dtype=np.float64)
        grads: list[np.ndarray] | None = [] if keep_gradients else None
        for i, phi in enumerate(angle_arr):
            ln = _log_rotate(img, phi, eps)
            grad = SOBEL_X.apply(ln)
            itil = reconstruct_illumination(grad, dc_mean=ln.mean(axis=(0, 1)), delta=delta)
            rest = restore_rotation(itil, phi, (h, w), scale_percentile)
            restored.append(rest)
            mags[i] = _selection_magnitude(rest)
            if grads is not None:
                grads.append(grad)
        return cls(angle_arr, restored, mags, grads)


def _selection_magnitude(image: np.ndarray) -> np.ndarray:
    """Central-difference gradient magnitude, summed over channels."""
    gy, gx = np.gradient(image, axis=(0, 1))
    return np.sqrt(gx * gx + gy * gy).sum(axis=-1)


def _as_stack(image_or_stack, **kwargs) -> RotationStack:
    if isinstance(image_or_stack, RotationStack):
        return image_or_stack
    return RotationStack.build(image_or_stack, **kwargs)


def _compose(stack: RotationStack, allowed: np.ndarray | None = None):
    mags = stack.grad_mag
    if allowed is not None:
        mags = np.where(allowed[:, None, None], mags, -1.0)
    best = np.argmax(mags, axis=0)
    h, w = best.shape
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    stacked = np.stack(stack.restored, axis=0)
    composed = stacked[best, yy, xx]
    magnitude = np.take_along_axis(stack.grad_mag, best[None], axis=0)[0]
    field = OrientationField(
        angle_deg=stack.angles[best].astype(np.float32),
        magnitude=magnitude.astype(np.float32),
        valid=magnitude > 0.0,
    )
    return composed, field


def restore_single(image_or_stack, **build_kwargs):
    """Restore one illumination image, each pixel using its best rotation."""
    stack = _as_stack(image_or_stack, **build_kwargs)
    return _compose(stack)


def _circ_dist_180(a, b):
    d = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) % 180.0
    return np.minimum(d, 180.0 - d)


def _mode_histogram(stack: RotationStack):
    best = np.argmax(stack.grad_mag, axis=0)
    weight = np.max(stack.grad_mag, axis=0)
    return np.bincount(best.ravel(), weights=weight.ravel(), minlength=len(stack.angles))


def estimate_dominant_directions(
    image_or_stack,
    k: int,
    min_relative_weight: float = 0.2,
    **build_kwargs,
) -> np.ndarray:
    """The k strongest well-separated modes of the orientation histogram.

    Modes are stack angles ranked by gradient-magnitude-weighted votes and
    must be pairwise separated by at least 180/(2k) degrees (circularly).
    A candidate below `min_relative_weight` of the top mode does not count.
    """
    if k not in (2, 3):
        raise ValueError("k must be 2 or 3")
    stack = _as_stack(image_or_stack, **build_kwargs)
    hist = _mode_histogram(stack)
    min_sep = 180.0 / (2 * k)
    order = np.argsort(hist)[::-1]
    top = hist[order[0]]
    if top <= 0:
        raise ModesNotSeparable("image has no gradient energy")
    chosen: list[float] = []
    for idx in order:
        if hist[idx] < min_relative_weight * top:
            break
        ang = float(stack.angles[idx])
        if all(_circ_dist_180(ang, c) >= min_sep for c in chosen):
            chosen.append(ang)
            if len(chosen) == k:
                return np.array(sorted(chosen))
    raise ModesNotSeparable(
        f"found {len(chosen)} separable direction modes, needed {k}"
    )


def restore_multi(
    image_or_stack,
    k: int,
    min_relative_weight: float = 0.2,
    **build_kwargs,
):
    """One restoration per dominant direction, argmax restricted near each.

    The per-direction search window is half the angular period that k
    directions split 180 degrees into: +/-45 deg for k=2, +/-30 deg for k=3.
    """
    stack = _as_stack(image_or_stack, **build_kwargs)
    modes = estimate_dominant_directions(stack, k, min_relative_weight)
    window = 90.0 / k
    out = []
    for m in modes:
        allowed = _circ_dist_180(stack.angles, m) <= window + 1e-9
        out.append(_compose(stack, allowed))
    return out
