"""
Untrained deep-decoder denoiser for effective-channel grids.

The network maps a fixed random tensor through ``I`` hidden layers of
1x1 channel mixing, upsampling (bilinear by default, nearest-neighbour
optional), ReLU and per-channel normalisation, then a final 1x1 mixing to
``2K`` output channels. Its weights are fitted to a single noisy LS grid
with Adam; the fitted output is the denoised grid. Gradients are computed by hand.

All parameters live in one flat vector (``net.theta``) and the per-layer
arrays are views into it, so an Adam step is a handful of vector ops.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, StaleActivations
from .estimators import EffectiveChannelGrid
from .linalg import RngStream, derive_stream_id

__all__ = [
    "DipConfig",
    "DipNetwork",
    "pack",
    "unpack",
    "forward",
    "loss",
    "backward",
    "adam_update",
    "adam_step",
    "fit_dip",
    "denoise",
]


@dataclass(frozen=True)
class DipConfig:
    """
    Architecture and optimiser settings.

    ``width`` is either one channel count for every hidden layer or a tuple
    with one entry per hidden layer. ``input_size`` and ``upsample`` (one
    ``(factor_n, factor_t)`` pair for each of the first ``I - 1`` layers)
    default to an automatic schedule: up to two x2 stages per axis.
    """

    hidden_layers: int = 6
    width: object = 64
    input_size: object = None
    upsample: object = None
    iterations: int = 2000
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    input_scale: float = 0.1
    norm_eps: float = 1e-6
    seed: int = 0
    upsampler: str = "bilinear"
    require_underparameterized: bool = True

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("need at least one hidden layer")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if min(self.widths) < 1:
            raise ValueError("channel width must be >= 1")
        if self.upsampler not in ("bilinear", "nearest"):
            raise ValueError(f"unknown upsampler {self.upsampler!r}")

    @property
    def widths(self) -> tuple:
        if isinstance(self.width, (tuple, list)):
            if len(self.width) != self.hidden_layers:
                raise ValueError("need one width per hidden layer")
            return tuple(int(w) for w in self.width)
        return (int(self.width),) * self.hidden_layers

    def schedule(self, N: int, T: int):
        """Return ``(input_size, factors)`` reaching an ``(N, T)`` output."""
        n_up = self.hidden_layers - 1
        if self.upsample is None:
            factors = [[1, 1] for _ in range(n_up)]
            size = []
            for axis, S in enumerate((N, T)):
                stages = 0
                while stages < min(2, n_up) and S % 2 == 0 and S // 2 >= 2:
                    factors[stages][axis] = 2
                    S //= 2
                    stages += 1
                size.append(S)
            factors = [tuple(f) for f in factors]
            inp = tuple(size) if self.input_size is None else tuple(self.input_size)
        else:
            factors = [tuple(int(v) for v in f) for f in self.upsample]
            if len(factors) != n_up:
                raise ShapeError(f"need {n_up} upsample factors, got {len(factors)}")
            if self.input_size is None:
                fn = int(np.prod([f[0] for f in factors]))
                ft = int(np.prod([f[1] for f in factors]))
                if N % fn or T % ft:
                    raise ShapeError("upsample schedule does not divide the output size")
                inp = (N // fn, T // ft)
            else:
                inp = tuple(self.input_size)
        fn = int(np.prod([f[0] for f in factors])) if factors else 1
        ft = int(np.prod([f[1] for f in factors])) if factors else 1
        if (inp[0] * fn, inp[1] * ft) != (N, T):
            raise ShapeError(f"schedule maps {inp} to {(inp[0] * fn, inp[1] * ft)}, not {(N, T)}")
        return inp, factors


def pack(grid) -> np.ndarray:
    """``(N, K, T)`` complex grid -> ``(2K, N, T)`` real array (real parts first)."""
    v = grid.values if isinstance(grid, EffectiveChannelGrid) else np.asarray(grid)
    v = np.moveaxis(v, 1, 0)
    return np.concatenate([v.real, v.imag], axis=0)


def unpack(arr: np.ndarray, provenance: str = "DIP_denoised") -> EffectiveChannelGrid:
    K = arr.shape[0] // 2
    v = arr[:K] + 1j * arr[K:]
    return EffectiveChannelGrid(np.moveaxis(v, 0, 1), provenance)


def linear_upsample_matrix(size: int, factor: int) -> np.ndarray:
    """
    ``(size * factor, size)`` linear interpolation matrix.

    Output sample ``i`` sits at source coordinate ``(i + 0.5) / factor - 0.5``
    (pixel-centre alignment), clamped to the valid range at the edges.
    """
    pos = np.clip((np.arange(size * factor) + 0.5) / factor - 0.5, 0, size - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, size - 1)
    frac = pos - lo
    U = np.zeros((size * factor, size))
    rows = np.arange(size * factor)
    U[rows, lo] += 1.0 - frac
    U[rows, hi] += frac
    return U


class _Upsampler:
    """Separable upsampling of ``(C, n, t)`` arrays and its exact adjoint."""

    def __init__(self, kind, in_size, factors, dtype):
        self.kind = kind
        self.fn, self.ft = factors
        self.identity = self.fn == 1 and self.ft == 1
        if kind == "bilinear" and not self.identity:
            self.Un = linear_upsample_matrix(in_size[0], self.fn).astype(dtype)
            self.Ut = linear_upsample_matrix(in_size[1], self.ft).astype(dtype)

    def __call__(self, x):
        if self.identity:
            return x
        C, n, t = x.shape
        if self.kind == "nearest":
            big = np.broadcast_to(x[:, :, None, :, None], (C, n, self.fn, t, self.ft))
            return big.reshape(C, n * self.fn, t * self.ft)
        y = x if self.ft == 1 else x @ self.Ut.T
        return y if self.fn == 1 else np.matmul(self.Un, y)

    def adjoint(self, g):
        if self.identity:
            return g
        C, n, t = g.shape
        if self.kind == "nearest":
            return g.reshape(C, n // self.fn, self.fn, t // self.ft, self.ft).sum(axis=(2, 4))
        y = g if self.fn == 1 else np.matmul(self.Un.T, g)
        return y if self.ft == 1 else y @ self.Ut


def adam_update(param, grad, m, v, step, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """
    In-place bias-corrected Adam update; ``step`` counts from 1.

    ``param``, ``m`` and ``v`` are modified; nothing is returned.
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


class DipNetwork:
    """
    Deep-decoder generator with hand-written reverse mode.

    Parameters
    ----------
    out_channels : int
        ``2K``.
    out_shape : tuple
        ``(N, T)``.
    config : DipConfig
    """

    def __init__(self, out_channels: int, out_shape, config: DipConfig, dtype=np.float64):
        self.config = config
        self.dtype = np.dtype(dtype)
        self.out_channels = int(out_channels)
        self.out_shape = tuple(out_shape)
        self.input_size, self.factors = config.schedule(*self.out_shape)
        self.factors.append((1, 1))  # last hidden layer has no upsampler
        widths = config.widths
        self._up = []
        size = self.input_size
        for f in self.factors:
            self._up.append(_Upsampler(config.upsampler, size, f, self.dtype))
            size = (size[0] * f[0], size[1] * f[1])

        shapes = []
        c_in = widths[0]
        for w in widths:
            shapes += [(w, c_in), (w,), (w,)]
            c_in = w
        shapes.append((self.out_channels, c_in))
        sizes = [int(np.prod(s)) for s in shapes]
        self.n_params = sum(sizes)
        out_dim = self.out_channels * self.out_shape[0] * self.out_shape[1]
        if config.require_underparameterized and self.n_params >= out_dim:
            raise ValueError(f"{self.n_params} parameters is not below the output size {out_dim}")

        self.theta = np.empty(self.n_params, dtype=self.dtype)
        self.grad = np.zeros(self.n_params, dtype=self.dtype)
        self._m = np.zeros(self.n_params, dtype=self.dtype)
        self._v = np.zeros(self.n_params, dtype=self.dtype)
        self.step_count = 0
        offsets = np.cumsum([0] + sizes)
        self.params = [self.theta[a:b].reshape(s) for a, b, s in zip(offsets, offsets[1:], shapes)]
        self.grads = [self.grad[a:b].reshape(s) for a, b, s in zip(offsets, offsets[1:], shapes)]

        rng = RngStream(config.seed, derive_stream_id("dip", "init"))
        for i in range(config.hidden_layers):
            W, g, b = self.params[3 * i: 3 * i + 3]
            W[...] = rng.normal(W.shape) * np.sqrt(2.0 / W.shape[1])
            g[...] = 1.0
            b[...] = 0.0
        W_out = self.params[-1]
        W_out[...] = rng.normal(W_out.shape) * np.sqrt(2.0 / W_out.shape[1])
        self.r0 = rng.uniform(0.0, config.input_scale,
                              (widths[0], *self.input_size)).astype(self.dtype)
        self._cache = None

    def copy(self, dtype=None) -> "DipNetwork":
        """Independent copy, optionally in another float type (e.g. ``np.longdouble``)."""
        new = DipNetwork(self.out_channels, self.out_shape, self.config,
                         dtype=self.dtype if dtype is None else dtype)
        new.theta[...] = self.theta
        new.r0[...] = self.r0
        new._m[...] = self._m
        new._v[...] = self._v
        new.step_count = self.step_count
        return new

    @property
    def hidden_layers(self):
        return self.config.hidden_layers

    def layer(self, i):
        """``(W, gamma, shift)`` of hidden layer ``i``."""
        return tuple(self.params[3 * i: 3 * i + 3])

    @property
    def output_weights(self):
        return self.params[-1]

    def forward(self) -> np.ndarray:
        eps = self.config.norm_eps
        x = self.r0
        cache = []
        for i in range(self.hidden_layers):
            W, g, b = self.layer(i)
            C, n, t = x.shape
            z = (W @ x.reshape(C, n * t)).reshape(W.shape[0], n, t)
            z = self._up[i](z)
            mask = z > 0
            a = z * mask
            xc = a - a.mean(axis=(1, 2), keepdims=True)
            var = (xc * xc).mean(axis=(1, 2), keepdims=True)
            inv = 1.0 / np.sqrt(var + eps)
            xhat = xc * inv
            cache.append((x, mask, xhat, inv))
            x = g[:, None, None] * xhat + b[:, None, None]
        W_out = self.output_weights
        C, n, t = x.shape
        out = (W_out @ x.reshape(C, n * t)).reshape(self.out_channels, n, t)
        self._cache = (cache, x, out)
        return out

    def backward(self, target: np.ndarray) -> list:
        """
        Gradients of ``||out - target||^2`` w.r.t. every parameter.

        Requires the activations of a :meth:`forward` call made since the
        last parameter update. Returns the per-parameter gradient views
        (also available flat in ``net.grad``).
        """
        if self._cache is None:
            raise StaleActivations("call forward() before backward()")
        cache, x_last, out = self._cache
        if target.shape != out.shape:
            raise ShapeError(f"target shape {target.shape} != output shape {out.shape}")
        d_out = 2.0 * (out - target)
        C, n, t = x_last.shape
        d_out2 = d_out.reshape(self.out_channels, n * t)
        self.grads[-1][...] = d_out2 @ x_last.reshape(C, n * t).T
        dx = (self.output_weights.T @ d_out2).reshape(C, n, t)

        for i in reversed(range(self.hidden_layers)):
            W, g, _ = self.layer(i)
            dW, dg, db = self.grads[3 * i: 3 * i + 3]
            x_in, mask, xhat, inv = cache[i]
            db[...] = dx.sum(axis=(1, 2))
            dg[...] = (dx * xhat).sum(axis=(1, 2))
            dxhat = dx * g[:, None, None]
            da = inv * (dxhat - dxhat.mean(axis=(1, 2), keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=(1, 2), keepdims=True))
            dz = self._up[i].adjoint(da * mask)
            Ci, ni, ti = x_in.shape
            dz2 = dz.reshape(W.shape[0], ni * ti)
            dW[...] = dz2 @ x_in.reshape(Ci, ni * ti).T
            if i > 0:
                dx = (W.T @ dz2).reshape(Ci, ni, ti)
        return self.grads

    def adam_step(self, grad=None):
        """Apply one Adam update using ``grad`` (flat) or the stored gradients."""
        c = self.config
        self.step_count += 1
        g = self.grad if grad is None else grad
        adam_update(self.theta, g, self._m, self._v, self.step_count,
                    c.lr, c.beta1, c.beta2, c.eps)
        self._cache = None


def forward(net: DipNetwork, config: DipConfig = None) -> np.ndarray:
    return net.forward()


def loss(output: np.ndarray, target: np.ndarray) -> float:
    """Squared Frobenius norm of ``output - target``."""
    if output.shape != target.shape:
        raise ShapeError(f"shapes differ: {output.shape} vs {target.shape}")
    r = output - target
    return float(np.vdot(r, r))


def backward(net: DipNetwork, target: np.ndarray) -> list:
    return net.backward(target)


def adam_step(net: DipNetwork, gradients=None, iteration_index: int = None) -> DipNetwork:
    """
    Adam update of ``net`` in place.

    ``iteration_index`` (0-based) is only checked against the network's own
    step counter.
    """
    if iteration_index is not None and iteration_index != net.step_count:
        raise ValueError(f"network is at step {net.step_count}, not {iteration_index}")
    flat = None
    if gradients is not None:
        flat = np.concatenate([np.ravel(g) for g in gradients])
    net.adam_step(flat)
    return net


def fit_dip(target: np.ndarray, config: DipConfig):
    """
    Fit a fresh network to a packed ``(2K, N, T)`` target.

    Returns ``(output, losses, net)``: the output at the final iterate and
    the loss before each update. The target is scaled to unit RMS before
    fitting and the output scaled back, so results do not depend on the
    absolute channel power.
    """
    target = np.asarray(target, dtype=float)
    scale = float(np.sqrt(np.mean(target * target)))
    if scale == 0.0:
        scale = 1.0
    t = target / scale
    net = DipNetwork(t.shape[0], t.shape[1:], config)
    losses = np.empty(config.iterations)
    for it in range(config.iterations):
        out = net.forward()
        r = out - t
        losses[it] = np.vdot(r, r)
        net.backward(t)
        net.adam_step()
    out = net.forward()
    return out * scale, losses * scale ** 2, net


def denoise(grid, config: DipConfig) -> EffectiveChannelGrid:
    """Denoise one user's ``(N, K, T)`` grid with a freshly initialised network."""
    out, _, _ = fit_dip(pack(grid), config)
    return unpack(out)
