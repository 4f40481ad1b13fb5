"""Minimal numerical core: float64 layers, losses, Adam, and a gradient checker.

All arrays are 64-bit floats in row-major order. A network is an ordered list
of layers; each layer owns its parameter arrays and, after a backward pass,
gradient arrays of the same shapes. Forward caches exactly what backward
needs, so forward -> backward pairs are pure functions of (params, input).

Layer kinds: Dense, PReLU, InstanceNorm, ConvTranspose1D, SoftmaxHead, plus a
parameter-free Reshape used to adapt dense activations to channel layouts.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Input shape incompatible with a layer; carries the layer index when known."""


class NonFiniteError(FloatingPointError):
    """A gradient or loss stopped being finite."""


def _as_f64(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    # centered uniform with scale 1/sqrt(fan_in)
    limit = 1.0 / np.sqrt(max(1, fan_in))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class. Subclasses set `params` and fill `grads` on backward."""

    kind = "base"

    def __init__(self) -> None:
        self.params: list[np.ndarray] = []
        self.grads: list[np.ndarray] = []
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _need_cache(self):
        if self._cache is None:
            raise ShapeError(f"{self.kind}: backward called without a forward pass")
        return self._cache

    def config(self) -> dict:
        """Constructor arguments, for serialization."""
        return {}


class Dense(Layer):
    """Affine map: y = x @ W + b, x of shape (batch, in_dim)."""

    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        super().__init__()
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        rng = rng if rng is not None else np.random.default_rng(0)
        w = _uniform_init(rng, (self.in_dim, self.out_dim), self.in_dim)
        b = np.zeros(self.out_dim)
        self.params = [w, b]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_f64(x)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"dense: expected (batch, {self.in_dim}), got {x.shape}")
        self._cache = x
        w, b = self.params
        return x @ w + b

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x = self._need_cache()
        dy = _as_f64(dy)
        if dy.shape != (x.shape[0], self.out_dim):
            raise ShapeError(f"dense: upstream grad shape {dy.shape} does not match output")
        w, _ = self.params
        self.grads = [x.T @ dy, dy.sum(axis=0)]
        return dy @ w.T

    def config(self) -> dict:
        return {"in_dim": self.in_dim, "out_dim": self.out_dim}


class PReLU(Layer):
    """Parametric ReLU with one learned slope per channel, initialized to 0.25.

    For (batch, n) inputs the channel axis is the feature axis; for
    (batch, ch, length) inputs it is the channel axis.
    """

    kind = "prelu"

    def __init__(self, channels: int, init: float = 0.25):
        super().__init__()
        self.channels = int(channels)
        self.params = [np.full(self.channels, float(init))]

    def _slope_view(self, ndim: int) -> np.ndarray:
        a = self.params[0]
        return a if ndim == 2 else a[:, None]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_f64(x)
        if x.ndim not in (2, 3) or x.shape[1] != self.channels:
            raise ShapeError(f"prelu: expected {self.channels} channels on axis 1, got {x.shape}")
        pos = x > 0
        self._cache = (x, pos)
        return np.where(pos, x, self._slope_view(x.ndim) * x)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, pos = self._need_cache()
        dy = _as_f64(dy)
        if dy.shape != x.shape:
            raise ShapeError(f"prelu: upstream grad shape {dy.shape} does not match output")
        neg = dy * x * (~pos)
        if x.ndim == 2:
            da = neg.sum(axis=0)
        else:
            da = neg.sum(axis=(0, 2))
        self.grads = [da]
        return dy * np.where(pos, 1.0, self._slope_view(x.ndim))

    def config(self) -> dict:
        return {"channels": self.channels}


class InstanceNorm(Layer):
    """Per-instance normalization to zero mean, unit variance; no learned affine.

    (batch, n): each row normalized over its features. (batch, ch, length):
    each (sample, channel) slice normalized over length. Population variance,
    y = (x - mean) / sqrt(var + eps).
    """

    kind = "instance_norm"

    def __init__(self, eps: float = 1e-5):
        super().__init__()
        if eps <= 0:
            raise ValueError("instance_norm: eps must be > 0")
        self.eps = float(eps)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_f64(x)
        if x.ndim not in (2, 3):
            raise ShapeError(f"instance_norm: expected 2D or 3D input, got {x.shape}")
        mean = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv)
        return xhat

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, inv = self._need_cache()
        dy = _as_f64(dy)
        if dy.shape != xhat.shape:
            raise ShapeError(f"instance_norm: upstream grad shape {dy.shape} does not match output")
        m1 = dy.mean(axis=-1, keepdims=True)
        m2 = (dy * xhat).mean(axis=-1, keepdims=True)
        self.grads = []
        return inv * (dy - m1 - xhat * m2)

    def config(self) -> dict:
        return {"eps": self.eps}


class ConvTranspose1D(Layer):
    """1D transposed convolution over (batch, channels, length) tensors.

    Output length is (L - 1) * stride + kernel - 2 * padding. Weight layout is
    (in_ch, out_ch, kernel); y[b, o, i*stride + k - padding] accumulates
    x[b, c, i] * W[c, o, k].
    """

    kind = "conv_transpose_1d"

    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride: int,
                 padding: int = 0, rng: np.random.Generator | None = None):
        super().__init__()
        if kernel < 1 or stride < 1:
            raise ValueError("conv_transpose_1d: kernel and stride must be >= 1")
        if padding < 0:
            raise ValueError("conv_transpose_1d: padding must be >= 0")
        self.in_ch = int(in_ch)
        self.out_ch = int(out_ch)
        self.kernel = int(kernel)
        self.stride = int(stride)
        self.padding = int(padding)
        rng = rng if rng is not None else np.random.default_rng(0)
        w = _uniform_init(rng, (self.in_ch, self.out_ch, self.kernel), self.in_ch * self.kernel)
        b = np.zeros(self.out_ch)
        self.params = [w, b]

    def _out_len(self, length: int) -> int:
        return (length - 1) * self.stride + self.kernel - 2 * self.padding

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_f64(x)
        if x.ndim != 3 or x.shape[1] != self.in_ch:
            raise ShapeError(f"conv_transpose_1d: expected (batch, {self.in_ch}, L), got {x.shape}")
        batch, _, length = x.shape
        out_len = self._out_len(length)
        if out_len < 1:
            raise ShapeError(f"conv_transpose_1d: input length {length} gives empty output")
        w, b = self.params
        # full (unpadded) scatter buffer, cropped by `padding` on both ends
        full = np.zeros((batch, self.out_ch, (length - 1) * self.stride + self.kernel))
        contrib = np.einsum("bcl,cok->bolk", x, w)
        for k in range(self.kernel):
            full[:, :, k : k + self.stride * (length - 1) + 1 : self.stride] += contrib[:, :, :, k]
        self._cache = (x, full.shape[2])
        y = full[:, :, self.padding : self.padding + out_len]
        return y + b[:, None]

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, full_len = self._need_cache()
        dy = _as_f64(dy)
        batch, _, length = x.shape
        out_len = self._out_len(length)
        if dy.shape != (batch, self.out_ch, out_len):
            raise ShapeError(f"conv_transpose_1d: upstream grad shape {dy.shape} does not match output")
        dfull = np.zeros((batch, self.out_ch, full_len))
        dfull[:, :, self.padding : self.padding + out_len] = dy
        # gather per kernel offset: dcontrib[b, o, l, k] = dfull[b, o, l*stride + k]
        dcontrib = np.empty((batch, self.out_ch, length, self.kernel))
        for k in range(self.kernel):
            dcontrib[:, :, :, k] = dfull[:, :, k : k + self.stride * (length - 1) + 1 : self.stride]
        w, _ = self.params
        dw = np.einsum("bcl,bolk->cok", x, dcontrib)
        db = dy.sum(axis=(0, 2))
        dx = np.einsum("bolk,cok->bcl", dcontrib, w)
        self.grads = [dw, db]
        return dx

    def config(self) -> dict:
        return {"in_ch": self.in_ch, "out_ch": self.out_ch, "kernel": self.kernel,
                "stride": self.stride, "padding": self.padding}


class SoftmaxHead(Layer):
    """Softmax over the last axis; parameter-free probability head."""

    kind = "softmax_head"

    def __init__(self, classes: int):
        super().__init__()
        self.classes = int(classes)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_f64(x)
        if x.ndim != 2 or x.shape[1] != self.classes:
            raise ShapeError(f"softmax_head: expected (batch, {self.classes}), got {x.shape}")
        y = softmax(x)
        self._cache = y
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        y = self._need_cache()
        dy = _as_f64(dy)
        if dy.shape != y.shape:
            raise ShapeError(f"softmax_head: upstream grad shape {dy.shape} does not match output")
        self.grads = []
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True))

    def config(self) -> dict:
        return {"classes": self.classes}


class Reshape(Layer):
    """Reshape each sample to a fixed per-sample shape; parameter-free."""

    kind = "reshape"

    def __init__(self, sample_shape: tuple[int, ...]):
        super().__init__()
        self.sample_shape = tuple(int(d) for d in sample_shape)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_f64(x)
        want = int(np.prod(self.sample_shape))
        have = int(np.prod(x.shape[1:]))
        if have != want:
            raise ShapeError(f"reshape: cannot view {x.shape[1:]} as {self.sample_shape}")
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.sample_shape)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        in_shape = self._need_cache()
        self.grads = []
        return _as_f64(dy).reshape(in_shape)

    def config(self) -> dict:
        return {"sample_shape": list(self.sample_shape)}


LAYER_KINDS = {cls.kind: cls for cls in
               (Dense, PReLU, InstanceNorm, ConvTranspose1D, SoftmaxHead, Reshape)}


class Network:
    """An ordered stack of layers with a shared forward/backward protocol.

    forward() caches one batch worth of activations; backward() consumes the
    caches and fills every layer's grads (set, not accumulated, so repeated
    backward calls from the same forward give identical gradients).
    """

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)
        self._activations: list[np.ndarray] | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = _as_f64(x)
        acts = [out]
        for i, layer in enumerate(self.layers):
            try:
                out = layer.forward(out)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({layer.kind}): {e}") from None
            acts.append(out)
        self._activations = acts
        return out

    def backward(self, dy: np.ndarray, from_layer: int | None = None) -> np.ndarray:
        """Propagate an upstream gradient back to the input.

        `from_layer` starts the sweep below that layer index: the gradient is
        taken with respect to layer `from_layer`'s *input* (used to backprop
        from an intermediate embedding). Default is the full stack.
        """
        if self._activations is None:
            raise ShapeError("backward called before forward")
        start = len(self.layers) if from_layer is None else int(from_layer)
        grad = _as_f64(dy)
        for i in range(start - 1, -1, -1):
            try:
                grad = self.layers[i].backward(grad)
            except ShapeError as e:
                raise ShapeError(f"layer {i} ({self.layers[i].kind}): {e}") from None
        return grad

    def activation(self, index: int) -> np.ndarray:
        """Cached output of layer `index` (index -1 / len gives input/output)."""
        if self._activations is None:
            raise ShapeError("no cached activations; run forward first")
        return self._activations[index + 1]

    def parameters(self):
        """Yield (layer_index, param_index, array) for every parameter."""
        for i, layer in enumerate(self.layers):
            for j, p in enumerate(layer.params):
                yield i, j, p

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.grads = [np.zeros_like(p) for p in layer.params]

    def copy_params(self) -> list[np.ndarray]:
        return [p.copy() for _, _, p in self.parameters()]

    def load_params(self, flat: list[np.ndarray]) -> None:
        own = list(self.parameters())
        if len(own) != len(flat):
            raise ShapeError(f"expected {len(own)} parameter arrays, got {len(flat)}")
        for (i, j, p), q in zip(own, flat):
            if p.shape != np.shape(q):
                raise ShapeError(f"layer {i} param {j}: shape {p.shape} != {np.shape(q)}")
            self.layers[i].params[j] = _as_f64(q).copy()


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (1D input treated as a single row)."""
    z = _as_f64(logits)
    squeeze = z.ndim == 1
    if squeeze:
        z = z[None, :]
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)
    return p[0] if squeeze else p


def softmax_cross_entropy(logits: np.ndarray, target_class: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of one logit vector against an integer class.

    Returns (loss, grad) with grad = softmax(logits) - one_hot(target).
    """
    z = _as_f64(logits).ravel()
    if not 0 <= int(target_class) < z.size:
        raise IndexError(f"target class {target_class} out of range for {z.size} logits")
    m = z.max()
    logp = z - m - np.log(np.exp(z - m).sum())
    grad = np.exp(logp)
    grad[int(target_class)] -= 1.0
    return float(-logp[int(target_class)]), grad


def softmax_cross_entropy_batch(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch; grad is d(mean loss)/d(logits)."""
    z = _as_f64(logits)
    t = np.asarray(targets, dtype=np.int64)
    if z.ndim != 2 or t.shape != (z.shape[0],):
        raise ShapeError(f"batch CE: logits {z.shape} vs targets {t.shape}")
    if t.min() < 0 or t.max() >= z.shape[1]:
        raise IndexError("target class out of range")
    m = z.max(axis=1, keepdims=True)
    logp = z - m - np.log(np.exp(z - m).sum(axis=1, keepdims=True))
    n = z.shape[0]
    loss = float(-logp[np.arange(n), t].mean())
    grad = np.exp(logp)
    grad[np.arange(n), t] -= 1.0
    return loss, grad / n


class Adam:
    """Adam optimizer with first/second-moment accumulators per parameter.

    Defaults follow the DCGAN convention: lr 2e-4, beta1 0.5, beta2 0.999.
    A step with any non-finite gradient is refused before touching parameters.
    """

    def __init__(self, net: Network, lr: float = 2e-4, beta1: float = 0.5,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0 or not (0 < beta1 < 1) or not (0 < beta2 < 1) or eps <= 0:
            raise ValueError("adam: lr > 0, betas in (0,1), eps > 0 required")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = [np.zeros_like(p) for _, _, p in net.parameters()]
        self.v = [np.zeros_like(p) for _, _, p in net.parameters()]

    def step(self, net: Network) -> None:
        entries = list(net.parameters())
        if len(entries) != len(self.m):
            raise ShapeError("adam state does not match network parameters")
        grads = []
        for (i, j, p) in entries:
            layer = net.layers[i]
            if len(layer.grads) != len(layer.params):
                raise NonFiniteError(f"layer {i} ({layer.kind}): grads not populated")
            g = layer.grads[j]
            if g.shape != p.shape:
                raise ShapeError(f"layer {i} param {j}: grad shape mismatch")
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"layer {i} ({layer.kind}): non-finite gradient")
            grads.append(g)
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k, ((i, j, p), g) in enumerate(zip(entries, grads)):
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mhat = self.m[k] / b1t
            vhat = self.v[k] / b2t
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def adam_step(net: Network, state: Adam) -> None:
    """Apply one Adam update to `net` using accumulated moments in `state`."""
    state.step(net)


class GradCheckReport:
    """Max relative error between analytic and finite-difference gradients."""

    def __init__(self, per_param: dict[str, float], eps: float):
        self.per_param = dict(per_param)
        self.eps = float(eps)
        self.max_error = max(per_param.values()) if per_param else 0.0

    def __repr__(self) -> str:
        return f"GradCheckReport(max_error={self.max_error:.3e}, eps={self.eps:.1e})"


def grad_check(net: Network, x: np.ndarray, loss_fn, eps: float = 1e-5,
               include_input: bool = True) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    `loss_fn(output) -> (loss, dloss_doutput)` defines the scalar objective.
    Relative error is |analytic - fd| / max(|analytic|, |fd|, 1e-12), reported
    per parameter (and for the input when `include_input`).
    """
    if eps <= 0:
        raise ValueError("grad_check: eps must be > 0")
    x = _as_f64(x).copy()

    def eval_loss() -> float:
        loss, _ = loss_fn(net.forward(x))
        return float(loss)

    out = net.forward(x)
    loss, dy = loss_fn(out)
    if not np.isfinite(loss):
        raise NonFiniteError("grad_check: loss is not finite")
    input_grad = net.backward(dy)
    analytic = {f"layer{i}.param{j}": net.layers[i].grads[j].copy()
                for i, j, _ in net.parameters()}
    if include_input:
        analytic["input"] = input_grad.copy()

    def fd_for(array: np.ndarray, grad: np.ndarray) -> float:
        worst = 0.0
        it = np.nditer(array, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = array[idx]
            array[idx] = orig + eps
            lp = eval_loss()
            array[idx] = orig - eps
            lm = eval_loss()
            array[idx] = orig
            fd = (lp - lm) / (2 * eps)
            a = grad[idx]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-12)
            worst = max(worst, rel)
            it.iternext()
        return worst

    report: dict[str, float] = {}
    for i, j, p in net.parameters():
        report[f"layer{i}.param{j}"] = fd_for(p, analytic[f"layer{i}.param{j}"])
    if include_input:
        report["input"] = fd_for(x, analytic["input"])
    return GradCheckReport(report, eps)
