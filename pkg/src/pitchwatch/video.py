"""Frame and clip containers plus the spatial transforms applied before flow.

Pixel data is float in [0, 1], row-major. Grayscale frames are (H, W),
RGB frames are (H, W, 3). Clips stack frames along a leading time axis,
so a gray clip is (T, H, W) and an RGB clip is (T, H, W, 3).

Axis convention for rectangular sizes is (height, width) everywhere; the
default desk-scale clip is 16 frames of 46x60 pixels, one tenth of the
460x600 working resolution cropped from 1920x1080 source footage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, InvalidInputError

# BT.601 luma weights (R, G, B), fixed for determinism.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Desk-scale defaults: 16 frames at 46x60, 1/10 of the full working scale.
DEFAULT_CLIP_FRAMES = 16
DEFAULT_FRAME_HW = (46, 60)
DEFAULT_FPS = 60.0


def _check_pixels(data: np.ndarray, what: str) -> None:
    if data.ndim not in (2, 3):
        raise InvalidInputError(f"{what} must be (H, W) or (H, W, 3), got shape {data.shape}")
    if data.ndim == 3 and data.shape[-1] != 3:
        raise InvalidInputError(f"{what} must have 1 or 3 channels, got {data.shape[-1]}")
    if data.size == 0:
        raise InvalidInputError(f"{what} has a zero-sized dimension: {data.shape}")
    lo, hi = float(data.min()), float(data.max())
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo < 0.0 or hi > 1.0:
        raise InvalidInputError(f"{what} values must lie in [0, 1], got range [{lo}, {hi}]")


@dataclass(frozen=True)
class Frame:
    """One image. ``data`` is (H, W) for gray or (H, W, 3) for RGB."""

    data: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim == 3 and d.shape[-1] == 1:
            d = d[:, :, 0]
        _check_pixels(d, "frame")
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]


@dataclass(frozen=True)
class Clip:
    """An ordered stack of same-shape frames plus the capture rate."""

    data: np.ndarray
    fps: float = DEFAULT_FPS

    def __post_init__(self) -> None:
        d = np.asarray(self.data)
        if d.ndim not in (3, 4):
            raise InvalidInputError(f"clip must be (T, H, W) or (T, H, W, 3), got shape {d.shape}")
        if d.shape[0] < 2:
            raise InvalidInputError(f"clip needs at least 2 frames, got {d.shape[0]}")
        _check_pixels(d[0], "clip frame")
        if not self.fps > 0:
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        lo, hi = float(d.min()), float(d.max())
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo < 0.0 or hi > 1.0:
            raise InvalidInputError(f"clip values must lie in [0, 1], got range [{lo}, {hi}]")
        object.__setattr__(self, "data", d)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 3 else self.data.shape[3]

    def frame(self, i: int) -> Frame:
        return Frame(self.data[i])


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel rectangle; (x, y) is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise InvalidInputError(f"box origin must be non-negative, got ({self.x}, {self.y})")
        if self.w <= 0 or self.h <= 0:
            raise InvalidInputError(f"box extent must be positive, got {self.w}x{self.h}")

    def mirrored(self, frame_width: int) -> "BoundingBox":
        """The horizontally reflected box within a frame of the given width."""
        return BoundingBox(frame_width - self.x - self.w, self.y, self.w, self.h)


def to_grayscale(frame: Frame) -> Frame:
    """BT.601 luma conversion of an RGB frame; output values stay in [0, 1]."""
    if frame.channels != 3:
        raise InvalidInputError(f"grayscale conversion needs a 3-channel frame, got {frame.channels}")
    return Frame(_luma(frame.data))


def grayscale_clip(clip: Clip) -> Clip:
    """Apply the BT.601 conversion to every frame of an RGB clip."""
    if clip.channels != 3:
        raise InvalidInputError(f"grayscale conversion needs a 3-channel clip, got {clip.channels}")
    return Clip(_luma(clip.data), fps=clip.fps)


def _luma(rgb: np.ndarray) -> np.ndarray:
    wr, wg, wb = LUMA_WEIGHTS
    gray = rgb[..., 0] * rgb.dtype.type(wr)
    gray += rgb[..., 1] * rgb.dtype.type(wg)
    gray += rgb[..., 2] * rgb.dtype.type(wb)
    # Weights sum to 1 so the result cannot leave [0, 1] by more than rounding.
    return np.clip(gray, 0.0, 1.0)


def crop(clip: Clip, box: BoundingBox) -> Clip:
    """Restrict every frame to ``box``; frame count and fps are unchanged."""
    if box.y + box.h > clip.height:
        raise BoundsError(
            f"box rows [{box.y}, {box.y + box.h}) exceed frame height {clip.height}"
        )
    if box.x + box.w > clip.width:
        raise BoundsError(
            f"box cols [{box.x}, {box.x + box.w}) exceed frame width {clip.width}"
        )
    return Clip(clip.data[:, box.y: box.y + box.h, box.x: box.x + box.w], fps=clip.fps)


def hflip(clip: Clip) -> Clip:
    """Mirror every frame about its vertical axis."""
    return Clip(np.ascontiguousarray(clip.data[:, :, ::-1]), fps=clip.fps)


def hflip_frame(frame: Frame) -> Frame:
    return Frame(np.ascontiguousarray(frame.data[:, ::-1]))


def _lerp_coords(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray]:
    """Corner-aligned sample positions as (left index, fractional offset)."""
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out, dtype=np.float64) * ((n_in - 1) / (n_out - 1))
    i0 = np.minimum(np.floor(pos).astype(np.int64), max(n_in - 2, 0))
    return i0, pos - i0


def _resize_nd(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bilinear resize of (..., H, W) or (..., H, W, 3) data."""
    chan_last = data.ndim >= 3 and data.shape[-1] == 3
    h_ax = data.ndim - (3 if chan_last else 2)
    w_ax = h_ax + 1

    def lerp(arr: np.ndarray, axis: int, n_out: int) -> np.ndarray:
        n_in = arr.shape[axis]
        if n_in == n_out:
            return arr
        i0, t = _lerp_coords(n_in, n_out)
        a = np.take(arr, i0, axis=axis)
        b = np.take(arr, np.minimum(i0 + 1, n_in - 1), axis=axis)
        shape = [1] * arr.ndim
        shape[axis] = n_out
        # a + t*(b - a): exact for constant inputs, unlike the two-weight form.
        return a + t.reshape(shape).astype(arr.dtype) * (b - a)

    out = lerp(data, h_ax, out_h)
    out = lerp(out, w_ax, out_w)
    return np.clip(out, 0.0, 1.0)


def resize(frame: Frame, out_h: int, out_w: int) -> Frame:
    """Bilinear resize with corner-aligned sampling; constants map to themselves."""
    if out_h <= 0 or out_w <= 0:
        raise InvalidInputError(f"resize target must be positive, got {out_h}x{out_w}")
    if (out_h, out_w) == (frame.height, frame.width):
        return Frame(frame.data.copy())
    return Frame(_resize_nd(frame.data, out_h, out_w))


def resize_clip(clip: Clip, out_h: int, out_w: int) -> Clip:
    if out_h <= 0 or out_w <= 0:
        raise InvalidInputError(f"resize target must be positive, got {out_h}x{out_w}")
    if (out_h, out_w) == (clip.height, clip.width):
        return clip
    return Clip(_resize_nd(clip.data, out_h, out_w), fps=clip.fps)
