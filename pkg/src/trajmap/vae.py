"""Small beta-weighted variational autoencoder with explicit forward and backward
passes on flat parameter vectors, plus a seeded deterministic trainer.

No ML framework: layers are evaluated with plain numpy, gradients are exact
reverse-mode derivatives, and every stochastic choice (init, shuffling, noise
draws) comes from one seeded generator so training is bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError, TrainingDiverged

CHECKPOINT_MAGIC = b"BVAE1\n"

# Probability clamp applied before logarithms in the reconstruction loss.
PROB_EPS = 1e-7

_ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid")
_LAYER_KINDS = ("dense", "conv", "deconv")


@dataclass(frozen=True, eq=False)
class Frame:
    """One image: float64 pixels of shape (height, width, channels), values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 3 or min(p.shape) < 1:
            raise ShapeError(f"frame pixels must be (h, w, c) with positive dims, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("frame pixels must be finite")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("frame pixels must lie in [0, 1]")
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape  # type: ignore[return-value]

    def __eq__(self, other) -> bool:
        return isinstance(other, Frame) and np.array_equal(self.pixels, other.pixels)


@dataclass(frozen=True)
class Layer:
    """One network layer.

    kind "dense": affine map fan_in -> fan_out.
    kind "conv": valid strided convolution; fan_in/fan_out are channel counts and
    in_hw is the spatial input size.
    kind "deconv": strided transposed convolution (the exact adjoint of "conv").
    """

    kind: str
    fan_in: int
    fan_out: int
    activation: str
    kernel: int = 0
    stride: int = 1
    in_hw: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in _LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.fan_in < 1 or self.fan_out < 1:
            raise ValueError("fan_in and fan_out must be positive")
        if self.kind != "dense":
            if self.kernel < 1 or self.stride < 1 or self.in_hw is None:
                raise ValueError(f"{self.kind} layer needs kernel, stride and in_hw")
            if self.kind == "conv" and (min(self.in_hw) < self.kernel):
                raise ValueError("conv input smaller than kernel")

    @property
    def out_hw(self) -> tuple[int, int] | None:
        if self.kind == "dense":
            return None
        h, w = self.in_hw  # type: ignore[misc]
        if self.kind == "conv":
            return ((h - self.kernel) // self.stride + 1, (w - self.kernel) // self.stride + 1)
        return ((h - 1) * self.stride + self.kernel, (w - 1) * self.stride + self.kernel)

    @property
    def in_size(self) -> int:
        if self.kind == "dense":
            return self.fan_in
        h, w = self.in_hw  # type: ignore[misc]
        return h * w * self.fan_in

    @property
    def out_size(self) -> int:
        if self.kind == "dense":
            return self.fan_out
        ho, wo = self.out_hw  # type: ignore[misc]
        return ho * wo * self.fan_out

    @property
    def n_weights(self) -> int:
        if self.kind == "dense":
            return self.fan_out * self.fan_in
        return self.kernel * self.kernel * self.fan_in * self.fan_out

    @property
    def n_params(self) -> int:
        return self.n_weights + self.fan_out

    def init_bound(self) -> float:
        # Glorot-style uniform bound; conv fans include the receptive field.
        if self.kind == "dense":
            fi, fo = self.fan_in, self.fan_out
        else:
            fi = self.kernel * self.kernel * self.fan_in
            fo = self.kernel * self.kernel * self.fan_out
        return math.sqrt(6.0 / (fi + fo))


@dataclass(frozen=True)
class Architecture:
    """Encoder/decoder layer stacks plus the frame geometry they operate on."""

    frame_shape: tuple[int, int, int]
    latent_dim: int
    encoder: tuple[Layer, ...]
    decoder: tuple[Layer, ...]

    def __post_init__(self):
        h, w, c = self.frame_shape
        if min(h, w, c) < 1 or self.latent_dim < 1:
            raise ValueError("frame dims and latent_dim must be positive")
        if not self.encoder or not self.decoder:
            raise ValueError("encoder and decoder need at least one layer each")
        _check_chain("encoder", self.encoder, h * w * c, 2 * self.latent_dim)
        _check_chain("decoder", self.decoder, self.latent_dim, h * w * c)
        if self.decoder[-1].activation != "sigmoid":
            raise ValueError("final decoder activation must be sigmoid")

    @property
    def n_encoder_params(self) -> int:
        return sum(l.n_params for l in self.encoder)

    @property
    def n_decoder_params(self) -> int:
        return sum(l.n_params for l in self.decoder)


def _check_chain(name: str, layers: tuple[Layer, ...], in_size: int, out_size: int) -> None:
    size = in_size
    for i, layer in enumerate(layers):
        if layer.in_size != size:
            raise ValueError(f"{name} layer {i}: expects input size {layer.in_size}, gets {size}")
        size = layer.out_size
    if size != out_size:
        raise ValueError(f"{name}: final output size {size}, expected {out_size}")


def mlp_arch(frame_shape: tuple[int, int, int], latent_dim: int, hidden: int = 128) -> Architecture:
    """Flattened-input MLP preset: input -> hidden -> latent heads, mirrored decoder."""
    h, w, c = frame_shape
    n = h * w * c
    return Architecture(
        frame_shape=frame_shape,
        latent_dim=latent_dim,
        encoder=(
            Layer("dense", n, hidden, "tanh"),
            Layer("dense", hidden, 2 * latent_dim, "linear"),
        ),
        decoder=(
            Layer("dense", latent_dim, hidden, "tanh"),
            Layer("dense", hidden, n, "sigmoid"),
        ),
    )


def conv32_arch(latent_dim: int) -> Architecture:
    """Strided-convolution preset for 32x32 grayscale frames."""
    return Architecture(
        frame_shape=(32, 32, 1),
        latent_dim=latent_dim,
        encoder=(
            Layer("conv", 1, 8, "relu", kernel=6, stride=2, in_hw=(32, 32)),
            Layer("conv", 8, 16, "relu", kernel=6, stride=2, in_hw=(14, 14)),
            Layer("dense", 5 * 5 * 16, 2 * latent_dim, "linear"),
        ),
        decoder=(
            Layer("dense", latent_dim, 5 * 5 * 16, "relu"),
            Layer("deconv", 16, 8, "relu", kernel=6, stride=2, in_hw=(5, 5)),
            Layer("deconv", 8, 1, "sigmoid", kernel=6, stride=2, in_hw=(14, 14)),
        ),
    )


@dataclass(frozen=True, eq=False)
class VaeParams:
    """Flat encoder/decoder parameter vectors tied to an architecture."""

    arch: Architecture
    encoder_params: np.ndarray
    decoder_params: np.ndarray

    def __post_init__(self):
        phi = _as_param_vector(self.encoder_params, self.arch.n_encoder_params, "encoder")
        theta = _as_param_vector(self.decoder_params, self.arch.n_decoder_params, "decoder")
        object.__setattr__(self, "encoder_params", phi)
        object.__setattr__(self, "decoder_params", theta)

    @property
    def latent_dim(self) -> int:
        return self.arch.latent_dim

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, VaeParams)
            and self.arch == other.arch
            and np.array_equal(self.encoder_params, other.encoder_params)
            and np.array_equal(self.decoder_params, other.decoder_params)
        )


def _as_param_vector(v: np.ndarray, expected: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size != expected:
        raise ShapeError(f"{name} params must be a flat vector of length {expected}, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} params must be finite")
    v = np.ascontiguousarray(v)
    v.flags.writeable = False
    return v


@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    """Diagonal Gaussian over the latent space: mean and log-variance per dimension."""

    mu: np.ndarray
    logvar: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        lv = np.asarray(self.logvar, dtype=np.float64)
        if mu.ndim != 1 or lv.ndim != 1 or mu.size != lv.size:
            raise ShapeError("mu and logvar must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(lv))):
            raise ValueError("posterior parameters must be finite")
        for name, a in (("mu", mu), ("logvar", lv)):
            a = np.ascontiguousarray(a)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GaussianPosterior)
            and np.array_equal(self.mu, other.mu)
            and np.array_equal(self.logvar, other.logvar)
        )


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    reconstruction: float
    kl: float


@dataclass(frozen=True)
class TrainConfig:
    beta: float
    learning_rate: float = 1e-3
    epochs: int = 1
    batch_size: int = 32
    rng_seed: int = 0
    optimizer: str = "adam"  # "adam" or "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")


# --- layer evaluation -------------------------------------------------------


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == "linear":
        return pre
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "tanh":
        return np.tanh(pre)
    # numerically stable logistic
    out = np.empty_like(pre)
    pos = pre >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-pre[pos]))
    e = np.exp(pre[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _activation_grad(name: str, out: np.ndarray) -> np.ndarray:
    # Derivative expressed through the layer output (valid for all four kinds).
    if name == "linear":
        return np.ones_like(out)
    if name == "relu":
        return (out > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - out * out
    return out * (1.0 - out)


def _param_views(layers: tuple[Layer, ...], flat: np.ndarray):
    """Split a flat parameter vector into per-layer (W, b) views."""
    views = []
    off = 0
    for layer in layers:
        nw = layer.n_weights
        if layer.kind == "dense":
            w = flat[off : off + nw].reshape(layer.fan_out, layer.fan_in)
        else:
            w = flat[off : off + nw].reshape(layer.kernel, layer.kernel, layer.fan_in, layer.fan_out)
        b = flat[off + nw : off + nw + layer.fan_out]
        views.append((w, b))
        off += layer.n_params
    return views


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    k = w.shape[0]
    ho = (x.shape[0] - k) // stride + 1
    wo = (x.shape[1] - k) // stride + 1
    out = np.zeros((ho, wo, w.shape[3]))
    for dy in range(k):
        for dx in range(k):
            patch = x[dy : dy + stride * ho : stride, dx : dx + stride * wo : stride, :]
            out += patch @ w[dy, dx]
    return out + b


def _conv_backward(x: np.ndarray, w: np.ndarray, stride: int, dout: np.ndarray):
    k = w.shape[0]
    ho, wo, _ = dout.shape
    dw = np.zeros_like(w)
    dx_in = np.zeros_like(x)
    db = dout.sum(axis=(0, 1))
    for dy in range(k):
        for dx in range(k):
            patch = x[dy : dy + stride * ho : stride, dx : dx + stride * wo : stride, :]
            dw[dy, dx] = np.einsum("ijc,ijo->co", patch, dout)
            dx_in[dy : dy + stride * ho : stride, dx : dx + stride * wo : stride, :] += dout @ w[dy, dx].T
    return dx_in, dw, db


def _deconv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int) -> np.ndarray:
    k = w.shape[0]
    h, wd = x.shape[0], x.shape[1]
    out = np.zeros(((h - 1) * stride + k, (wd - 1) * stride + k, w.shape[3]))
    for dy in range(k):
        for dx in range(k):
            out[dy : dy + stride * h : stride, dx : dx + stride * wd : stride, :] += x @ w[dy, dx]
    return out + b


def _deconv_backward(x: np.ndarray, w: np.ndarray, stride: int, dout: np.ndarray):
    k = w.shape[0]
    h, wd = x.shape[0], x.shape[1]
    dw = np.zeros_like(w)
    dx_in = np.zeros_like(x)
    db = dout.sum(axis=(0, 1))
    for dy in range(k):
        for dx in range(k):
            sl = dout[dy : dy + stride * h : stride, dx : dx + stride * wd : stride, :]
            dx_in += sl @ w[dy, dx].T
            dw[dy, dx] = np.einsum("ijc,ijo->co", x, sl)
    return dx_in, dw, db


def _forward_stack(layers: tuple[Layer, ...], flat: np.ndarray, x: np.ndarray):
    """Run a layer stack on a flat input vector; return (output, per-layer caches)."""
    views = _param_views(layers, flat)
    caches = []
    h = x
    for layer, (w, b) in zip(layers, views):
        if layer.kind == "dense":
            pre = w @ h + b
        elif layer.kind == "conv":
            pre = _conv_forward(h.reshape(*layer.in_hw, layer.fan_in), w, b, layer.stride).ravel()
        else:
            pre = _deconv_forward(h.reshape(*layer.in_hw, layer.fan_in), w, b, layer.stride).ravel()
        out = _activate(layer.activation, pre)
        caches.append((h, out))
        h = out
    return h, caches


def _backward_stack(layers: tuple[Layer, ...], flat: np.ndarray, caches, dout: np.ndarray):
    """Accumulate parameter gradients for a stack; return (grad_flat, grad_input)."""
    views = _param_views(layers, flat)
    grads = np.zeros_like(flat)
    offsets = np.cumsum([0] + [l.n_params for l in layers])
    d = dout
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        w, _ = views[i]
        x_in, out = caches[i]
        dpre = d * _activation_grad(layer.activation, out)
        if layer.kind == "dense":
            dw = np.outer(dpre, x_in)
            db = dpre
            d = w.T @ dpre
        else:
            x3 = x_in.reshape(*layer.in_hw, layer.fan_in)
            dpre3 = dpre.reshape(*layer.out_hw, layer.fan_out)
            if layer.kind == "conv":
                dx3, dw, db = _conv_backward(x3, w, layer.stride, dpre3)
            else:
                dx3, dw, db = _deconv_backward(x3, w, layer.stride, dpre3)
            d = dx3.ravel()
        grads[offsets[i] : offsets[i] + layer.n_weights] = dw.ravel()
        grads[offsets[i] + layer.n_weights : offsets[i + 1]] = db
    return grads, d


# --- public operations ------------------------------------------------------


def init_params(arch: Architecture, rng: np.random.Generator | int) -> VaeParams:
    """Seeded uniform init: weights in +-sqrt(6/(fan_in+fan_out)), biases zero."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    vectors = []
    for layers in (arch.encoder, arch.decoder):
        parts = []
        for layer in layers:
            a = layer.init_bound()
            parts.append(rng.uniform(-a, a, size=layer.n_weights))
            parts.append(np.zeros(layer.fan_out))
        vectors.append(np.concatenate(parts))
    return VaeParams(arch, vectors[0], vectors[1])


def encode(params: VaeParams, x: Frame) -> GaussianPosterior:
    """Map a frame to its posterior (mu, logvar). Deterministic in (params, x)."""
    if x.shape != params.arch.frame_shape:
        raise ShapeError(f"frame shape {x.shape} does not match network input {params.arch.frame_shape}")
    out, _ = _forward_stack(params.arch.encoder, params.encoder_params, x.pixels.ravel())
    d = params.latent_dim
    return GaussianPosterior(out[:d], out[d:])


def reparameterize(post: GaussianPosterior, eps: np.ndarray) -> np.ndarray:
    """z = mu + exp(logvar/2) * eps."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != post.mu.shape:
        raise ShapeError(f"eps length {eps.shape} does not match latent length {post.mu.shape}")
    return post.mu + np.exp(0.5 * post.logvar) * eps


def decode(params: VaeParams, z: np.ndarray) -> Frame:
    """Map a latent vector to a frame; every output pixel lies strictly in (0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.latent_dim,):
        raise ShapeError(f"latent length {z.shape} does not match latent_dim {params.latent_dim}")
    out, _ = _forward_stack(params.arch.decoder, params.decoder_params, z)
    # the logistic output can round to exactly 0.0/1.0 in float64; keep it open
    out = np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return Frame(out.reshape(params.arch.frame_shape))


def kl_divergence(post: GaussianPosterior) -> float:
    """Closed-form KL to the standard-normal prior: 0.5 * sum(mu^2 + e^lv - 1 - lv)."""
    kl = 0.5 * float(np.sum(post.mu**2 + np.exp(post.logvar) - 1.0 - post.logvar))
    if not math.isfinite(kl):
        raise ValueError("KL divergence overflowed; posterior parameters too extreme")
    # guard against tiny negative rounding residue
    return max(kl, 0.0)


def reconstruction_loss(x: Frame, xhat: Frame) -> float:
    """Summed Bernoulli negative log-likelihood, with xhat clamped to [eps, 1-eps]."""
    if x.shape != xhat.shape:
        raise ShapeError(f"frame shapes differ: {x.shape} vs {xhat.shape}")
    xc = np.clip(xhat.pixels, PROB_EPS, 1.0 - PROB_EPS)
    xf = x.pixels
    return float(-np.sum(xf * np.log(xc) + (1.0 - xf) * np.log(1.0 - xc)))


def _loss_and_grad(
    arch: Architecture,
    phi: np.ndarray,
    theta: np.ndarray,
    x: np.ndarray,
    beta: float,
    eps: np.ndarray,
    want_grad: bool,
):
    """Single-sample loss (and optionally its exact gradient) on raw arrays."""
    d = arch.latent_dim
    x_flat = x.ravel()

    enc_out, enc_caches = _forward_stack(arch.encoder, phi, x_flat)
    mu, logvar = enc_out[:d], enc_out[d:]
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * eps
    xhat, dec_caches = _forward_stack(arch.decoder, theta, z)

    xc = np.clip(xhat, PROB_EPS, 1.0 - PROB_EPS)
    rec = float(-np.sum(x_flat * np.log(xc) + (1.0 - x_flat) * np.log(1.0 - xc)))
    kl = 0.5 * float(np.sum(mu**2 + np.exp(logvar) - 1.0 - logvar))
    breakdown = LossBreakdown(rec + beta * kl, rec, kl)
    if not want_grad:
        return breakdown, None, None

    # reconstruction gradient w.r.t. the decoder output; zero where the clamp binds
    inside = (xhat >= PROB_EPS) & (xhat <= 1.0 - PROB_EPS)
    dxhat = np.where(inside, -x_flat / xc + (1.0 - x_flat) / (1.0 - xc), 0.0)
    dtheta, dz = _backward_stack(arch.decoder, theta, dec_caches, dxhat)

    dmu = dz + beta * mu
    dlogvar = dz * eps * 0.5 * sigma + beta * 0.5 * (np.exp(logvar) - 1.0)
    dphi, _ = _backward_stack(arch.encoder, phi, enc_caches, np.concatenate([dmu, dlogvar]))
    return breakdown, dphi, dtheta


def beta_vae_loss(params: VaeParams, x: Frame, beta: float, eps: np.ndarray) -> LossBreakdown:
    """Reconstruction + beta * KL for one frame, using one noise draw eps."""
    if x.shape != params.arch.frame_shape:
        raise ShapeError(f"frame shape {x.shape} does not match network input {params.arch.frame_shape}")
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (params.latent_dim,):
        raise ShapeError("eps length must equal latent_dim")
    breakdown, _, _ = _loss_and_grad(
        params.arch, params.encoder_params, params.decoder_params, x.pixels, beta, eps, False
    )
    return breakdown


def loss_gradient(params: VaeParams, x: Frame, beta: float, eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact gradient of beta_vae_loss(...).total w.r.t. encoder and decoder params."""
    if x.shape != params.arch.frame_shape:
        raise ShapeError(f"frame shape {x.shape} does not match network input {params.arch.frame_shape}")
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (params.latent_dim,):
        raise ShapeError("eps length must equal latent_dim")
    _, dphi, dtheta = _loss_and_grad(
        params.arch, params.encoder_params, params.decoder_params, x.pixels, beta, eps, True
    )
    return dphi, dtheta


def train(
    dataset: list[Frame],
    config: TrainConfig,
    arch: Architecture | None = None,
) -> tuple[VaeParams, list[LossBreakdown]]:
    """Train on a frame list; returns final params and per-epoch mean losses.

    Fully deterministic given config.rng_seed: initialization, per-epoch
    shuffling and the per-sample noise draws all come from one generator.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    shape = dataset[0].shape
    for i, f in enumerate(dataset):
        if f.shape != shape:
            raise ShapeError(f"frame {i} has shape {f.shape}, expected {shape}")
    if arch is None:
        arch = mlp_arch(shape, latent_dim=32)
    elif arch.frame_shape != shape:
        raise ShapeError(f"architecture expects frames {arch.frame_shape}, dataset has {shape}")

    rng = np.random.default_rng(config.rng_seed)
    init = init_params(arch, rng)
    phi = init.encoder_params.copy()
    theta = init.decoder_params.copy()

    pixels = [f.pixels for f in dataset]
    n = len(pixels)
    d = arch.latent_dim

    # optimizer state
    m_phi = np.zeros_like(phi)
    v_phi = np.zeros_like(phi)
    m_theta = np.zeros_like(theta)
    v_theta = np.zeros_like(theta)
    step_count = 0

    history: list[LossBreakdown] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        sum_total = sum_rec = sum_kl = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            g_phi = np.zeros_like(phi)
            g_theta = np.zeros_like(theta)
            for idx in batch:
                eps = rng.standard_normal(d)
                breakdown, dphi, dtheta = _loss_and_grad(
                    arch, phi, theta, pixels[idx], config.beta, eps, True
                )
                if not math.isfinite(breakdown.total):
                    raise TrainingDiverged(epoch)
                g_phi += dphi
                g_theta += dtheta
                sum_total += breakdown.total
                sum_rec += breakdown.reconstruction
                sum_kl += breakdown.kl
            g_phi /= len(batch)
            g_theta /= len(batch)
            step_count += 1
            if config.optimizer == "sgd":
                phi -= config.learning_rate * g_phi
                theta -= config.learning_rate * g_theta
            else:
                b1, b2, ae = config.adam_beta1, config.adam_beta2, config.adam_eps
                for p, g, m, v in ((phi, g_phi, m_phi, v_phi), (theta, g_theta, m_theta, v_theta)):
                    m *= b1
                    m += (1.0 - b1) * g
                    v *= b2
                    v += (1.0 - b2) * g * g
                    mhat = m / (1.0 - b1**step_count)
                    vhat = v / (1.0 - b2**step_count)
                    p -= config.learning_rate * mhat / (np.sqrt(vhat) + ae)
        mean = LossBreakdown(sum_total / n, sum_rec / n, sum_kl / n)
        if not math.isfinite(mean.total):
            raise TrainingDiverged(epoch)
        history.append(mean)
    return VaeParams(arch, phi, theta), history


# --- checkpoint I/O ---------------------------------------------------------


def _layer_token(layer: Layer) -> str:
    if layer.kind == "dense":
        return f"dense:{layer.fan_in}>{layer.fan_out}:{layer.activation}"
    h, w = layer.in_hw  # type: ignore[misc]
    return (
        f"{layer.kind}:{layer.fan_in}>{layer.fan_out}:{layer.activation}"
        f":k{layer.kernel}:s{layer.stride}:{h}x{w}"
    )


def _parse_layer_token(token: str) -> Layer:
    parts = token.split(":")
    try:
        kind = parts[0]
        fan_in, fan_out = (int(v) for v in parts[1].split(">"))
        activation = parts[2]
        if kind == "dense":
            if len(parts) != 3:
                raise ValueError
            return Layer("dense", fan_in, fan_out, activation)
        if len(parts) != 6 or parts[3][0] != "k" or parts[4][0] != "s":
            raise ValueError
        kernel = int(parts[3][1:])
        stride = int(parts[4][1:])
        h, w = (int(v) for v in parts[5].split("x"))
        return Layer(kind, fan_in, fan_out, activation, kernel=kernel, stride=stride, in_hw=(h, w))
    except (ValueError, IndexError) as exc:
        raise FormatError(f"bad layer token {token!r}") from exc


def arch_to_spec(arch: Architecture) -> str:
    h, w, c = arch.frame_shape
    enc = ",".join(_layer_token(l) for l in arch.encoder)
    dec = ",".join(_layer_token(l) for l in arch.decoder)
    return f"{h}x{w}x{c}|{enc}|{dec}"


def arch_from_spec(spec: str, latent_dim: int) -> Architecture:
    pieces = spec.split("|")
    if len(pieces) != 3:
        raise FormatError("layer spec must have three |-separated sections")
    try:
        h, w, c = (int(v) for v in pieces[0].split("x"))
    except ValueError as exc:
        raise FormatError(f"bad frame geometry {pieces[0]!r}") from exc
    enc = tuple(_parse_layer_token(t) for t in pieces[1].split(","))
    dec = tuple(_parse_layer_token(t) for t in pieces[2].split(","))
    try:
        return Architecture((h, w, c), latent_dim, enc, dec)
    except ValueError as exc:
        raise FormatError(f"inconsistent architecture in checkpoint: {exc}") from exc


def save_checkpoint(params: VaeParams, path: str | Path) -> None:
    """Write magic, a header naming latent size and layers, then f64-LE params."""
    header = f"latent_dim={params.latent_dim};layers={arch_to_spec(params.arch)}\n"
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header.encode("ascii"))
        fh.write(params.encoder_params.astype("<f8").tobytes())
        fh.write(params.decoder_params.astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> VaeParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a model checkpoint (bad magic)")
        header = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        fields = dict(p.split("=", 1) for p in header.split(";") if "=" in p)
        if set(fields) != {"latent_dim", "layers"}:
            raise FormatError(f"{path}: malformed checkpoint header {header!r}")
        try:
            latent_dim = int(fields["latent_dim"])
        except ValueError as exc:
            raise FormatError(f"{path}: bad latent_dim") from exc
        arch = arch_from_spec(fields["layers"], latent_dim)
        body = fh.read()
    expected = 8 * (arch.n_encoder_params + arch.n_decoder_params)
    if len(body) != expected:
        raise FormatError(f"{path}: expected {expected} parameter bytes, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise FormatError(f"{path}: checkpoint contains non-finite parameters")
    n_phi = arch.n_encoder_params
    return VaeParams(arch, flat[:n_phi], flat[n_phi:])
