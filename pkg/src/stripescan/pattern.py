"""Color-stripe codification: window-unique sequences and pattern rasters.

A stripe sequence assigns palette colors to projector stripes so that every
window of `window` consecutive colors occurs at most once and no two adjacent
stripes share a color. A stripe is then identifiable from itself plus its
neighbors alone. Patterns in several directions multiply into one projection
raster; the product separates again in the log-gradient domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import images
from .color import min_hue_gap, stripe_palette
from .errors import DirectionTooClose, InfeasibleLength, RasterTooLarge, SizeMismatch

DEFAULT_HUE_MARGIN_DEG = 30.0


@dataclass
class StripeSequence:
    """Window-unique color-index sequence over a small color alphabet."""

    colors: np.ndarray                # (M,) int indices into alphabet
    alphabet: np.ndarray              # (K, 3) linear RGB in [0, 1]
    window: int

    def __post_init__(self):
        self.colors = np.asarray(self.colors, dtype=np.int64)
        self.alphabet = np.asarray(self.alphabet, dtype=np.float64)
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.alphabet.ndim != 2 or self.alphabet.shape[1] != 3:
            raise ValueError("alphabet must be (K, 3)")
        if len(self.colors) and (self.colors.min() < 0 or self.colors.max() >= len(self.alphabet)):
            raise ValueError("color index out of alphabet range")

    def __len__(self) -> int:
        return len(self.colors)

    def window_index(self) -> dict[tuple[int, ...], int]:
        """Map every window tuple to its start position (unique under SWU)."""
        w = self.window
        out: dict[tuple[int, ...], int] = {}
        for i in range(len(self.colors) - w + 1):
            out[tuple(int(c) for c in self.colors[i:i + w])] = i
        return out

    def to_dict(self) -> dict:
        return {
            "colors": [int(c) for c in self.colors],
            "alphabet": [[float(v) for v in c] for c in self.alphabet],
            "window": int(self.window),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StripeSequence":
        return cls(np.asarray(d["colors"]), np.asarray(d["alphabet"]), int(d["window"]))


@dataclass
class PatternImage:
    """Single-direction stripe raster plus the metadata needed to decode it.

    `direction` is the stripe normal in degrees: the axis along which colors
    change. `origin` is the offset subtracted from the signed coordinate
    before stripe indexing, so stripe i occupies s in
    [origin + i*width, origin + (i+1)*width).
    """

    pixels: np.ndarray
    direction: float
    stripe_width_px: int
    source: StripeSequence
    origin: float = 0.0


def max_sequence_length(alphabet_size: int, window: int) -> int:
    """Longest window-unique, adjacency-distinct sequence for (k, w).

    Every window is an edge of the graph whose vertices are (w-1)-windows;
    the graph is balanced and strongly connected for k >= 3, so an Eulerian
    circuit uses all k*(k-1)^(w-1) edges, giving that many windows plus the
    w-1 seed symbols.
    """
    k, w = alphabet_size, window
    return k * (k - 1) ** (w - 1) + (w - 1)


def _eulerian_colors(k: int, w: int, n_edges: int, rng: np.random.Generator) -> np.ndarray:
    """First `n_edges` edges of a randomized Eulerian circuit, as a color run."""
    # Start vertex: alternating (0, 1, 0, 1, ...) of length w-1.
    start = tuple(i % 2 for i in range(w - 1)) if w > 1 else ()

    # Adjacency: from each (w-1)-vertex, one edge per next color != last symbol.
    def successors(v: tuple[int, ...]) -> list[int]:
        last = v[-1] if v else -1
        out = [c for c in range(k) if c != last]
        rng.shuffle(out)
        return out

    remaining: dict[tuple[int, ...], list[int]] = {}
    # Hierholzer: iterative stack walk consuming edges once.
    stack = [start]
    circuit: list[tuple[int, ...]] = []
    while stack:
        v = stack[-1]
        nxt = remaining.get(v)
        if nxt is None:
            nxt = successors(v)
            remaining[v] = nxt
        if nxt:
            c = nxt.pop()
            stack.append((v + (c,))[1:] if w > 1 else (c,))
        else:
            circuit.append(stack.pop())
    circuit.reverse()

    symbols = list(start) + [v[-1] for v in circuit[1:]]
    return np.asarray(symbols[: (w - 1) + n_edges], dtype=np.int64)


def generate_stripe_sequence(
    alphabet_size: int,
    window: int,
    length: int,
    seed: int = 0,
    palette_floor: float = 0.05,
    hue_margin_deg: float = DEFAULT_HUE_MARGIN_DEG,
) -> StripeSequence:
    """Generate a window-unique stripe sequence of the requested length.

    Deterministic for a given seed. Raises InfeasibleLength when `length`
    exceeds the Eulerian maximum for (alphabet_size, window).
    """
    if alphabet_size < 3:
        raise ValueError("alphabet_size must be >= 3")
    if window < 2:
        raise ValueError("window must be >= 2")
    if length < window:
        raise ValueError("length must be >= window")
    limit = max_sequence_length(alphabet_size, window)
    if length > limit:
        raise InfeasibleLength(
            f"length {length} exceeds maximum {limit} for k={alphabet_size}, w={window}"
        )
    alphabet = stripe_palette(alphabet_size, floor=palette_floor)
    gap = min_hue_gap(alphabet)
    if gap < hue_margin_deg:
        raise ValueError(f"alphabet hue gap {gap:.1f} deg below margin {hue_margin_deg}")
    rng = np.random.default_rng(seed)
    n_edges = length - (window - 1)
    colors = _eulerian_colors(alphabet_size, window, n_edges, rng)
    seq = StripeSequence(colors, alphabet, window)
    assert verify_window_uniqueness(seq)
    return seq


def verify_window_uniqueness(seq: StripeSequence) -> bool:
    """True iff every window is unique and no two adjacent colors repeat."""
    c = seq.colors
    if len(c) >= 2 and np.any(c[1:] == c[:-1]):
        return False
    w = seq.window
    seen = set()
    for i in range(len(c) - w + 1):
        t = tuple(int(v) for v in c[i:i + w])
        if t in seen:
            return False
        seen.add(t)
    return True


def signed_coordinate(direction: float, width: int, height: int) -> np.ndarray:
    """Signed coordinate along the stripe normal, at pixel centers."""
    theta = np.deg2rad(direction)
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    return xs[None, :] * np.cos(theta) + ys[:, None] * np.sin(theta)


def stripe_index_field(
    direction: float, stripe_width_px: int, width: int, height: int, origin: float
) -> np.ndarray:
    """Stripe index at every pixel center of a (height, width) raster."""
    s = signed_coordinate(direction, width, height)
    return np.floor((s - origin) / float(stripe_width_px)).astype(np.int64)


def rasterize_pattern(
    seq: StripeSequence,
    direction: float,
    stripe_width_px: int,
    width: int,
    height: int,
) -> PatternImage:
    """Paint the sequence as parallel stripes with the given normal direction."""
    if stripe_width_px < 1:
        raise ValueError("stripe_width_px must be >= 1")
    theta = np.deg2rad(direction)
    corners_x = np.array([0.5, width - 0.5, 0.5, width - 0.5])
    corners_y = np.array([0.5, 0.5, height - 0.5, height - 0.5])
    s_corners = corners_x * np.cos(theta) + corners_y * np.sin(theta)
    origin = float(np.floor(s_corners.min()))

    idx = stripe_index_field(direction, stripe_width_px, width, height, origin)
    if idx.min() < 0 or idx.max() >= len(seq):
        raise RasterTooLarge(
            f"raster needs stripe indices [{idx.min()}, {idx.max()}] "
            f"but sequence has {len(seq)} stripes"
        )
    pixels = seq.alphabet[seq.colors[idx]]
    return PatternImage(pixels, float(direction), int(stripe_width_px), seq, origin)


def combine_patterns(patterns: list[PatternImage]) -> np.ndarray:
    """Per-pixel, per-channel product of 1-3 single-direction patterns.

    Multiplication is the combination that the directional log-gradient can
    undo: the log of the product is the sum of per-direction log terms.
    """
    if not 1 <= len(patterns) <= 3:
        raise ValueError("combine_patterns takes 1-3 patterns")
    shape = patterns[0].pixels.shape
    for p in patterns[1:]:
        if p.pixels.shape != shape:
            raise SizeMismatch(f"pattern shapes differ: {p.pixels.shape} vs {shape}")
    for i in range(len(patterns)):
        for j in range(i + 1, len(patterns)):
            d = abs(patterns[i].direction - patterns[j].direction) % 180.0
            d = min(d, 180.0 - d)
            if d < 30.0:
                raise DirectionTooClose(
                    f"directions {patterns[i].direction} and {patterns[j].direction} "
                    f"separated by {d:.1f} deg (< 30)"
                )
    out = patterns[0].pixels.astype(np.float64).copy()
    for p in patterns[1:]:
        out *= p.pixels
    return np.clip(out, 0.0, 1.0)


def save_pattern(pattern: PatternImage, png_path: str | Path) -> Path:
    """Write the raster as 16-bit PNG plus a YAML sidecar with the metadata."""
    png_path = Path(png_path)
    images.save_png16(png_path, pattern.pixels)
    meta = {
        "direction_deg": float(pattern.direction),
        "stripe_width_px": int(pattern.stripe_width_px),
        "origin": float(pattern.origin),
        "sequence": pattern.source.to_dict(),
    }
    sidecar = png_path.with_suffix(".yaml")
    sidecar.write_text(yaml.safe_dump(meta, sort_keys=True))
    return sidecar


def load_pattern(png_path: str | Path) -> PatternImage:
    png_path = Path(png_path)
    meta = yaml.safe_load(png_path.with_suffix(".yaml").read_text())
    pixels = images.load_png16(png_path)
    return PatternImage(
        pixels=pixels,
        direction=float(meta["direction_deg"]),
        stripe_width_px=int(meta["stripe_width_px"]),
        source=StripeSequence.from_dict(meta["sequence"]),
        origin=float(meta.get("origin", 0.0)),
    )


def load_pattern_meta(yaml_path: str | Path) -> PatternImage:
    """Load pattern metadata only (no raster), for decode/triangulate stages."""
    yaml_path = Path(yaml_path)
    meta = yaml.safe_load(yaml_path.read_text())
    return PatternImage(
        pixels=np.zeros((0, 0, 3)),
        direction=float(meta["direction_deg"]),
        stripe_width_px=int(meta["stripe_width_px"]),
        source=StripeSequence.from_dict(meta["sequence"]),
        origin=float(meta.get("origin", 0.0)),
    )
