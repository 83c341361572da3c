"""Dense two-frame optical flow (Horn-Schunck) and clip-level flow stacks.

Flow is the sole model input: it carries motion while being invariant to
appearance. Fields are stored unnormalized, in pixels per frame, with u
positive for rightward motion and v positive for downward motion.

The solver runs Jacobi fixed-point iterations of the Horn-Schunck update
with central-difference gradients and edge replication at the borders.
Intensities are scaled to the classical 0..255 range internally so the
conventional smoothness weight (alpha, default 15) keeps its usual
meaning on [0, 1] frames.

Every arithmetic step is arranged so that horizontally mirroring both
input frames mirrors the output field and negates u *bitwise*: sums over
kernel taps are grouped into left/right pairs, which IEEE addition keeps
exact under reflection. Mirror-twin clips therefore produce bit-identical
flow after `flip_flow`, which the cross-arm flip experiments rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .video import Clip, Frame

# Classical Horn-Schunck operating point for 0..255 intensities.
DEFAULT_ALPHA = 15.0
DEFAULT_ITERS = 100
INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class FlowParams:
    """Solver settings; one pyramid level means no coarse-to-fine."""

    alpha: float = DEFAULT_ALPHA
    iters: int = DEFAULT_ITERS
    pyramid_levels: int = 1

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        if self.iters < 1:
            raise InvalidInputError(f"iteration count must be >= 1, got {self.iters}")
        if self.pyramid_levels < 1:
            raise InvalidInputError(f"pyramid levels must be >= 1, got {self.pyramid_levels}")


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement between two frames; u, v are (H, W)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u, v = np.asarray(self.u), np.asarray(self.v)
        if u.ndim != 2 or u.shape != v.shape:
            raise InvalidInputError(f"u and v must be matching 2-d arrays, got {u.shape} / {v.shape}")
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise InvalidInputError("flow values must be finite")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


@dataclass(frozen=True)
class FlowClip:
    """Stacked per-pair fields for one clip: u, v are (T-1, H, W)."""

    u: np.ndarray
    v: np.ndarray
    source_id: str = ""

    def __post_init__(self) -> None:
        u, v = np.asarray(self.u), np.asarray(self.v)
        if u.ndim != 3 or u.shape != v.shape or u.shape[0] < 1:
            raise InvalidInputError(f"flow clip arrays must be matching (T-1, H, W), got {u.shape} / {v.shape}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def n_fields(self) -> int:
        return self.u.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape[1], self.u.shape[2]

    def field(self, i: int) -> FlowField:
        return FlowField(self.u[i], self.v[i])

    def as_tensor(self) -> np.ndarray:
        """Model input layout (C=2, T-1, H, W) with u first."""
        return np.stack([self.u, self.v]).astype(np.float32)


def _gray_array(frame: Frame | np.ndarray, what: str) -> np.ndarray:
    data = frame.data if isinstance(frame, Frame) else np.asarray(frame)
    if data.ndim != 2:
        raise InvalidInputError(f"{what} must be single-channel, got shape {data.shape}")
    return data.astype(np.float64)


def _dx(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, ((0, 0), (1, 1)), mode="edge")
    return (p[:, 2:] - p[:, :-2]) * 0.5


def _dy(img: np.ndarray) -> np.ndarray:
    p = np.pad(img, ((1, 1), (0, 0)), mode="edge")
    return (p[2:, :] - p[:-2, :]) * 0.5


def _neighbor_avg(f: np.ndarray) -> np.ndarray:
    # Standard Horn-Schunck 8-neighbor weighting (1/6 edges, 1/12 corners),
    # summed in left/right pairs so horizontal mirroring stays bit-exact.
    p = np.pad(f, 1, mode="edge")
    horiz = p[1:-1, :-2] + p[1:-1, 2:]
    vert = p[:-2, 1:-1] + p[2:, 1:-1]
    diag = (p[:-2, :-2] + p[:-2, 2:]) + (p[2:, :-2] + p[2:, 2:])
    return (horiz + vert) * (1.0 / 6.0) + diag * (1.0 / 12.0)


def _hs_iterate(
    prev: np.ndarray,
    nxt: np.ndarray,
    alpha: float,
    iters: int,
    u0: np.ndarray,
    v0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    avg = (prev + nxt) * 0.5
    ix, iy = _dx(avg), _dy(avg)
    it = nxt - prev
    den = alpha * alpha + ix * ix + iy * iy
    u, v = u0, v0
    for _ in range(iters):
        ua, va = _neighbor_avg(u), _neighbor_avg(v)
        der = (ix * ua + iy * va + it) / den
        u = ua - ix * der
        v = va - iy * der
    return u, v


def _downsample(img: np.ndarray) -> np.ndarray:
    h2, w2 = img.shape[0] // 2, img.shape[1] // 2
    c = img[: h2 * 2, : w2 * 2]
    return (c.reshape(h2, 2, w2, 2).mean(axis=3)).mean(axis=1)


def _upsample_flow(f: np.ndarray, out_h: int, out_w: int, scale: float) -> np.ndarray:
    ys = np.linspace(0.0, f.shape[0] - 1.0, out_h)
    xs = np.linspace(0.0, f.shape[1] - 1.0, out_w)
    y0 = np.minimum(ys.astype(np.int64), f.shape[0] - 2) if f.shape[0] > 1 else np.zeros(out_h, np.int64)
    x0 = np.minimum(xs.astype(np.int64), f.shape[1] - 2) if f.shape[1] > 1 else np.zeros(out_w, np.int64)
    ty = (ys - y0)[:, None]
    tx = (xs - x0)[None, :]
    y1 = np.minimum(y0 + 1, f.shape[0] - 1)
    x1 = np.minimum(x0 + 1, f.shape[1] - 1)
    a = f[np.ix_(y0, x0)]
    b = f[np.ix_(y0, x1)]
    c = f[np.ix_(y1, x0)]
    d = f[np.ix_(y1, x1)]
    top = a + tx * (b - a)
    bot = c + tx * (d - c)
    return (top + ty * (bot - top)) * scale


def _warp(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample img at (x + u, y + v) with bilinear lookup and edge clamping."""
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    xs = np.clip(xx + u, 0.0, w - 1.0)
    ys = np.clip(yy + v, 0.0, h - 1.0)
    x0 = np.minimum(xs.astype(np.int64), w - 2) if w > 1 else np.zeros_like(xs, np.int64)
    y0 = np.minimum(ys.astype(np.int64), h - 2) if h > 1 else np.zeros_like(ys, np.int64)
    tx, ty = xs - x0, ys - y0
    a = img[y0, x0]
    b = img[y0, np.minimum(x0 + 1, w - 1)]
    c = img[np.minimum(y0 + 1, h - 1), x0]
    d = img[np.minimum(y0 + 1, h - 1), np.minimum(x0 + 1, w - 1)]
    top = a + tx * (b - a)
    bot = c + tx * (d - c)
    return top + ty * (bot - top)


def flow_pair(
    prev: Frame | np.ndarray,
    nxt: Frame | np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    iters: int = DEFAULT_ITERS,
    pyramid_levels: int = 1,
) -> FlowField:
    """Dense flow from ``prev`` to ``nxt``; zero field when the frames match."""
    a = _gray_array(prev, "prev frame")
    b = _gray_array(nxt, "next frame")
    if a.shape != b.shape:
        raise InvalidInputError(f"frame shapes differ: {a.shape} vs {b.shape}")
    params = FlowParams(alpha=alpha, iters=iters, pyramid_levels=pyramid_levels)

    a = a * INTENSITY_SCALE
    b = b * INTENSITY_SCALE

    levels = [(a, b)]
    for _ in range(params.pyramid_levels - 1):
        la, lb = levels[-1]
        if min(la.shape) < 8:
            break
        levels.append((_downsample(la), _downsample(lb)))

    u = np.zeros_like(levels[-1][0])
    v = np.zeros_like(levels[-1][0])
    for i, (la, lb) in enumerate(reversed(levels)):
        if i > 0:
            sy = la.shape[0] / float(u.shape[0])
            sx = la.shape[1] / float(u.shape[1])
            u = _upsample_flow(u, la.shape[0], la.shape[1], sx)
            v = _upsample_flow(v, la.shape[0], la.shape[1], sy)
        if len(levels) == 1:
            u, v = _hs_iterate(la, lb, params.alpha, params.iters, u, v)
        else:
            # Coarse-to-fine: solve for the residual against the warped frame.
            warped = _warp(lb, u, v)
            du, dv = _hs_iterate(la, warped, params.alpha, params.iters,
                                 np.zeros_like(la), np.zeros_like(la))
            u, v = u + du, v + dv
    return FlowField(u, v)


def flow_clip(clip: Clip, params: FlowParams = FlowParams()) -> FlowClip:
    """Flow for each consecutive frame pair of a grayscale clip, in order."""
    if clip.channels != 1:
        raise InvalidInputError(f"flow needs a grayscale clip, got {clip.channels} channels")
    fields_u = []
    fields_v = []
    for i in range(clip.n_frames - 1):
        try:
            f = flow_pair(clip.data[i], clip.data[i + 1],
                          alpha=params.alpha, iters=params.iters,
                          pyramid_levels=params.pyramid_levels)
        except InvalidInputError as e:
            raise InvalidInputError(f"frame pair {i}: {e}") from e
        fields_u.append(f.u)
        fields_v.append(f.v)
    return FlowClip(np.stack(fields_u), np.stack(fields_v))


def flip_flow(fc: FlowClip) -> FlowClip:
    """Horizontally mirror a flow stack: u mirrors and negates, v mirrors."""
    return FlowClip(
        np.ascontiguousarray(-fc.u[:, :, ::-1]),
        np.ascontiguousarray(fc.v[:, :, ::-1]),
        source_id=fc.source_id,
    )


def flip_flow_tensor(t: np.ndarray) -> np.ndarray:
    """`flip_flow` on the serialized (2, T-1, H, W) layout."""
    out = t[:, :, :, ::-1].copy()
    out[0] = -out[0]
    return out
