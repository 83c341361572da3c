"""Neural-network layers with explicit forward and backward passes.

All layers operate on batched 5-d activations (N, C, T, H, W) except the
classifier stages, which run on (N, F). `forward` returns the output and
an opaque cache; `backward` consumes that cache and the upstream gradient
and returns the input gradient plus one gradient per parameter, in the
same order as `params`.

Convolution is stride-configurable im2col + GEMM; max pooling records
argmax indices so its backward pass routes gradient to a single source
element per window even under ties.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def _im2col(
    xp: np.ndarray,
    kernel: tuple[int, int, int],
    stride: tuple[int, int, int],
    out_dims: tuple[int, int, int],
) -> np.ndarray:
    """Patch matrix (C*kt*kh*kw, N*To*Ho*Wo) from padded (N, C, Tp, Hp, Wp)."""
    kt, kh, kw = kernel
    st, sh, sw = stride
    to, ho, wo = out_dims
    n, c = xp.shape[:2]
    cols = np.empty((c * kt * kh * kw, n, to, ho, wo), dtype=xp.dtype)
    i = 0
    for ci in range(c):
        xc = xp[:, ci]
        for it in range(kt):
            for ih in range(kh):
                for iw in range(kw):
                    np.copyto(cols[i], xc[:, it: it + to * st: st,
                                          ih: ih + ho * sh: sh, iw: iw + wo * sw: sw])
                    i += 1
    return cols.reshape(c * kt * kh * kw, n * to * ho * wo)


class Layer:
    name: str = "layer"

    def __init__(self) -> None:
        self.params: list[np.ndarray] = []

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        raise NotImplementedError

    def backward(self, dy: np.ndarray, cache):
        raise NotImplementedError

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, ...]:
        return in_shape


class Conv3D(Layer):
    """3-d convolution with zero padding; weights are (Cout, Cin, kt, kh, kw)."""

    def __init__(
        self,
        name: str,
        in_channels: int,
        out_channels: int,
        kernel: tuple[int, int, int] = (3, 3, 3),
        stride: tuple[int, int, int] = (1, 1, 1),
        padding: tuple[int, int, int] | None = None,
        rng: np.random.Generator | None = None,
        dtype=np.float32,
    ) -> None:
        super().__init__()
        self.name = name
        self.cin = in_channels
        self.cout = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding if padding is not None else tuple(k // 2 for k in kernel)
        fan_in = in_channels * int(np.prod(kernel))
        rng = rng if rng is not None else np.random.default_rng(0)
        w = rng.standard_normal((out_channels, in_channels, *kernel)) * np.sqrt(2.0 / fan_in)
        self.params = [w.astype(dtype), np.zeros(out_channels, dtype=dtype)]

    def out_shape(self, in_shape):
        n, c, t, h, w = in_shape
        if c != self.cin:
            raise ShapeError(f"{self.name}: expected {self.cin} input channels, got {c}")
        dims = []
        for size, k, s, p in zip((t, h, w), self.kernel, self.stride, self.padding):
            o = (size + 2 * p - k) // s + 1
            if o < 1:
                raise ShapeError(f"{self.name}: kernel {self.kernel} does not fit input {in_shape}")
            dims.append(o)
        return (n, self.cout, *dims)

    def forward(self, x, train=False, rng=None):
        if x.ndim != 5:
            raise ShapeError(f"{self.name}: expected (N, C, T, H, W) input, got shape {x.shape}")
        out_shape = self.out_shape(x.shape)
        pt, ph, pw = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))
        n, _, to, ho, wo = out_shape
        cols = _im2col(xp, self.kernel, self.stride, (to, ho, wo))
        w2 = self.params[0].reshape(self.cout, -1)
        y2 = w2 @ cols + self.params[1][:, None]
        y = y2.reshape(self.cout, n, to, ho, wo).transpose(1, 0, 2, 3, 4)
        return np.ascontiguousarray(y), (x.shape, cols)

    def backward(self, dy, cache):
        x_shape, cols = cache
        n, _, t, h, w = x_shape
        kt, kh, kw = self.kernel
        st, sh, sw = self.stride
        pt, ph, pw = self.padding
        _, _, to, ho, wo = dy.shape
        dy2 = np.ascontiguousarray(dy.transpose(1, 0, 2, 3, 4)).reshape(self.cout, -1)
        dw = (dy2 @ cols.T).reshape(self.params[0].shape)
        db = dy2.sum(axis=1)
        # Scatter W^T dy back through the patch map (channel-first to avoid
        # a transposed copy per kernel tap).
        dcols = (self.params[0].reshape(self.cout, -1).T @ dy2).reshape(
            self.cin, kt, kh, kw, n, to, ho, wo
        )
        dxp = np.zeros((self.cin, n, t + 2 * pt, h + 2 * ph, w + 2 * pw), dtype=dy.dtype)
        for it in range(kt):
            for ih in range(kh):
                for iw in range(kw):
                    dxp[:, :, it: it + to * st: st, ih: ih + ho * sh: sh,
                        iw: iw + wo * sw: sw] += dcols[:, it, ih, iw]
        dx = np.ascontiguousarray(
            dxp[:, :, pt: pt + t, ph: ph + h, pw: pw + w].transpose(1, 0, 2, 3, 4)
        )
        return dx, [dw, db]


class ReLU(Layer):
    name = "relu"

    def forward(self, x, train=False, rng=None):
        return np.maximum(x, 0), x > 0

    def backward(self, dy, cache):
        return dy * cache, []


class MaxPool3D(Layer):
    """Non-overlapping max pooling; trailing rows/cols that do not fill a
    window are dropped (floor semantics)."""

    def __init__(self, name: str, window: tuple[int, int, int] = (1, 2, 2)) -> None:
        super().__init__()
        self.name = name
        self.window = window

    def out_shape(self, in_shape):
        n, c, t, h, w = in_shape
        wt, wh, ww = self.window
        if t < wt or h < wh or w < ww:
            raise ShapeError(f"{self.name}: window {self.window} larger than input {in_shape}")
        return (n, c, t // wt, h // wh, w // ww)

    def forward(self, x, train=False, rng=None):
        n, c, to, ho, wo = self.out_shape(x.shape)
        wt, wh, ww = self.window
        xc = x[:, :, : to * wt, : ho * wh, : wo * ww]
        xr = xc.reshape(n, c, to, wt, ho, wh, wo, ww).transpose(0, 1, 2, 4, 6, 3, 5, 7)
        xr = np.ascontiguousarray(xr).reshape(n, c, to, ho, wo, wt * wh * ww)
        idx = xr.argmax(axis=-1)
        y = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
        return y, (x.shape, idx)

    def backward(self, dy, cache):
        x_shape, idx = cache
        n, c, t, h, w = x_shape
        wt, wh, ww = self.window
        to, ho, wo = t // wt, h // wh, w // ww
        dxr = np.zeros((n, c, to, ho, wo, wt * wh * ww), dtype=dy.dtype)
        np.put_along_axis(dxr, idx[..., None], dy[..., None], axis=-1)
        dxc = dxr.reshape(n, c, to, ho, wo, wt, wh, ww).transpose(0, 1, 2, 5, 3, 6, 4, 7)
        dxc = dxc.reshape(n, c, to * wt, ho * wh, wo * ww)
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dx[:, :, : to * wt, : ho * wh, : wo * ww] = dxc
        return dx, []


class GlobalAvgPool(Layer):
    """Mean over the spatio-temporal axes: (N, C, T, H, W) -> (N, C)."""

    name = "gap"

    def out_shape(self, in_shape):
        return in_shape[:2]

    def forward(self, x, train=False, rng=None):
        return x.mean(axis=(2, 3, 4)), x.shape

    def backward(self, dy, cache):
        n, c, t, h, w = cache
        scale = 1.0 / (t * h * w)
        return np.broadcast_to((dy * scale)[:, :, None, None, None], cache).astype(dy.dtype).copy(), []


class Dropout(Layer):
    """Inverted dropout; a mask is drawn only in train mode and cached."""

    def __init__(self, name: str, rate: float) -> None:
        super().__init__()
        self.name = name
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ShapeError(f"{self.name}: train-mode forward needs a dropout rng")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        mask = mask.astype(x.dtype)
        return x * mask, mask

    def backward(self, dy, cache):
        if cache is None:
            return dy, []
        return dy * cache, []


class Linear(Layer):
    """Dense layer on (N, F); weights are (out, in)."""

    def __init__(
        self,
        name: str,
        in_features: int,
        out_features: int,
        rng: np.random.Generator | None = None,
        init: str = "he",
        dtype=np.float32,
    ) -> None:
        super().__init__()
        self.name = name
        self.fin = in_features
        self.fout = out_features
        if init == "zeros":
            w = np.zeros((out_features, in_features))
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            w = rng.standard_normal((out_features, in_features)) * np.sqrt(2.0 / in_features)
        self.params = [w.astype(dtype), np.zeros(out_features, dtype=dtype)]

    def out_shape(self, in_shape):
        if in_shape[-1] != self.fin:
            raise ShapeError(f"{self.name}: expected {self.fin} features, got {in_shape[-1]}")
        return (*in_shape[:-1], self.fout)

    def forward(self, x, train=False, rng=None):
        self.out_shape(x.shape)
        return x @ self.params[0].T + self.params[1], x

    def backward(self, dy, cache):
        x = cache
        return dy @ self.params[0], [dy.T @ x, dy.sum(axis=0)]
