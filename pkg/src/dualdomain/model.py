"""The CNN classifier: forward pass, softmax cross-entropy loss, analytic
gradients, Adam updates, and the checkpoint format.

Both arms share one backbone: three [conv3x3 -> ReLU -> maxpool2x2] blocks
with widths 16/32/64, a 128-unit fully connected layer whose post-ReLU
activation is the latent embedding, and a 4-way linear head. The only
difference between control and experimental is the first convolution's
input channel count (1 vs 3).

Convolutions run as im2col + matmul so the heavy lifting stays in BLAS;
backward reuses the cached patch matrices. Gradients are exact reverse-mode
derivatives of this graph and are validated against central finite
differences in the test suite.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import as_strided

from .numerics import RngStream, ShapeError

__all__ = [
    "Architecture",
    "ModelParams",
    "ForwardTrace",
    "AdamState",
    "TrainingDivergedError",
    "DEFAULT_ARCH",
    "init_params",
    "conv2d",
    "forward",
    "softmax",
    "loss_and_grads",
    "init_adam_state",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
]

_CHECKPOINT_MAGIC = b"DDCP"
_CHECKPOINT_VERSION = 1


class TrainingDivergedError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Architecture:
    conv_widths: tuple[int, int, int] = (16, 32, 64)
    latent_dim: int = 128
    n_classes: int = 4


DEFAULT_ARCH = Architecture()


@dataclass
class ModelParams:
    mode: str  # "control" | "experimental"
    arch: Architecture
    conv: list[tuple[np.ndarray, np.ndarray]]  # [(Cout,Cin,3,3), (Cout,)] per block
    fc1: tuple[np.ndarray, np.ndarray]  # (latent_dim, F), (latent_dim,)
    fc2: tuple[np.ndarray, np.ndarray]  # (n_classes, latent_dim), (n_classes,)

    @property
    def in_channels(self) -> int:
        return self.conv[0][0].shape[1]

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """All parameter arrays in a fixed, stable order."""
        out = []
        for i, (k, b) in enumerate(self.conv):
            out.append((f"conv{i}.kernels", k))
            out.append((f"conv{i}.bias", b))
        out.append(("fc1.weights", self.fc1[0]))
        out.append(("fc1.bias", self.fc1[1]))
        out.append(("fc2.weights", self.fc2[0]))
        out.append(("fc2.bias", self.fc2[1]))
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            mode=self.mode,
            arch=self.arch,
            conv=[(k.copy(), b.copy()) for k, b in self.conv],
            fc1=(self.fc1[0].copy(), self.fc1[1].copy()),
            fc2=(self.fc2[0].copy(), self.fc2[1].copy()),
        )


@dataclass
class ForwardTrace:
    logits: np.ndarray  # (B, n_classes)
    latent: np.ndarray  # (B, latent_dim), post-ReLU fc1 activations
    cache: dict = field(repr=False, default_factory=dict)


def init_params(
    mode: str,
    seed: int,
    image_size: int = 64,
    arch: Architecture = DEFAULT_ARCH,
) -> ModelParams:
    """He-initialized parameters: weights ~ N(0, 2/fan_in), biases zero.

    Deterministic given (mode, seed): draws come from one seeded stream in
    a fixed layer order.
    """
    if mode not in ("control", "experimental"):
        raise ValueError(f"unknown mode {mode!r}")
    if image_size % 8 != 0:
        raise ShapeError(f"image_size must be divisible by 8, got {image_size}")
    rng = RngStream(seed)
    cin = 1 if mode == "control" else 3
    conv = []
    for cout in arch.conv_widths:
        fan_in = cin * 9
        k = rng.normals(cout * cin * 9).reshape(cout, cin, 3, 3) * np.sqrt(2.0 / fan_in)
        conv.append((k, np.zeros(cout)))
        cin = cout
    feat = arch.conv_widths[-1] * (image_size // 8) ** 2
    w1 = rng.normals(arch.latent_dim * feat).reshape(arch.latent_dim, feat) * np.sqrt(
        2.0 / feat
    )
    w2 = rng.normals(arch.n_classes * arch.latent_dim).reshape(
        arch.n_classes, arch.latent_dim
    ) * np.sqrt(2.0 / arch.latent_dim)
    return ModelParams(
        mode=mode,
        arch=arch,
        conv=conv,
        fc1=(w1, np.zeros(arch.latent_dim)),
        fc2=(w2, np.zeros(arch.n_classes)),
    )


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, Cin, H, W) -> (B*H*W, Cin*9) patch matrix for 3x3/pad-1 windows."""
    b, c, h, w = x.shape
    xp = np.zeros((b, c, h + 2, w + 2))
    xp[:, :, 1:-1, 1:-1] = x
    sb, sc, sh, sw = xp.strides
    windows = as_strided(
        xp,
        shape=(b, c, h, w, 3, 3),
        strides=(sb, sc, sh, sw, sh, sw),
        writeable=False,
    )
    return windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * 9)


def conv2d(
    x: np.ndarray, kernels: np.ndarray, bias: np.ndarray
) -> np.ndarray:
    """Cross-correlation, 3x3 kernels, stride 1, zero padding 1."""
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be (B, Cin, H, W), got {x.shape}")
    cout, cin = kernels.shape[:2]
    if x.shape[1] != cin:
        raise ShapeError(
            f"channel mismatch: input has {x.shape[1]} channels, kernels expect {cin}"
        )
    out, _ = _conv2d_cached(x, kernels, bias)
    return out


def _conv2d_cached(x, kernels, bias):
    b, _, h, w = x.shape
    cout = kernels.shape[0]
    mat = _im2col(x)
    out = mat @ kernels.reshape(cout, -1).T
    if bias is not None:
        out += bias
    return out.reshape(b, h, w, cout).transpose(0, 3, 1, 2), mat


def _conv2d_backward(dout, mat, kernels, x_shape):
    b, cin, h, w = x_shape
    cout = kernels.shape[0]
    dout_mat = dout.transpose(0, 2, 3, 1).reshape(b * h * w, cout)
    dk = (mat.T @ dout_mat).T.reshape(cout, cin, 3, 3)
    db = dout_mat.sum(axis=0)
    # input gradient is a cross-correlation with the transposed, rotated bank
    kt = kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    dx, _ = _conv2d_cached(dout, np.ascontiguousarray(kt), None)
    return dx, dk, db


def _maxpool(x: np.ndarray):
    b, c, h, w = x.shape
    win = (
        x.reshape(b, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h // 2, w // 2, 4)
    )
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., np.newaxis], axis=-1)[..., 0]
    return out, arg


def _maxpool_backward(dout, arg, x_shape):
    b, c, h, w = x_shape
    g = np.zeros((b, c, h // 2, w // 2, 4))
    np.put_along_axis(g, arg[..., np.newaxis], dout[..., np.newaxis], axis=-1)
    return (
        g.reshape(b, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h, w)
    )


def forward(params: ModelParams, batch: np.ndarray) -> ForwardTrace:
    """Run the backbone on a (B, C, H, W) batch.

    The trace carries the logits, the latent embedding, and every
    intermediate needed by the backward pass.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4:
        raise ShapeError(f"batch must be (B, C, H, W), got {batch.shape}")
    if batch.shape[1] != params.in_channels:
        raise ShapeError(
            f"mode {params.mode} expects {params.in_channels} channels, "
            f"got {batch.shape[1]}"
        )
    if batch.shape[2] % 8 or batch.shape[3] % 8:
        raise ShapeError(f"spatial extent {batch.shape[2:]} not divisible by 8")

    cache = {"batch_shape": batch.shape, "blocks": []}
    h = batch
    for kernels, bias in params.conv:
        z, mat = _conv2d_cached(h, kernels, bias)
        a = np.maximum(z, 0.0)
        p, arg = _maxpool(a)
        cache["blocks"].append(
            {"x_shape": h.shape, "mat": mat, "z": z, "a_shape": a.shape, "arg": arg}
        )
        h = p
    cache["pooled_shape"] = h.shape
    flat = h.reshape(h.shape[0], -1)
    w1, b1 = params.fc1
    if flat.shape[1] != w1.shape[1]:
        raise ShapeError(
            f"flattened extent {flat.shape[1]} does not match fc1 weights {w1.shape}"
        )
    pre1 = flat @ w1.T + b1
    latent = np.maximum(pre1, 0.0)
    w2, b2 = params.fc2
    logits = latent @ w2.T + b2
    cache["flat"] = flat
    cache["pre1"] = pre1
    return ForwardTrace(logits=logits, latent=latent, cache=cache)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax with log-sum-exp stabilization."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _zero_grads(params: ModelParams) -> ModelParams:
    return ModelParams(
        mode=params.mode,
        arch=params.arch,
        conv=[(np.zeros_like(k), np.zeros_like(b)) for k, b in params.conv],
        fc1=(np.zeros_like(params.fc1[0]), np.zeros_like(params.fc1[1])),
        fc2=(np.zeros_like(params.fc2[0]), np.zeros_like(params.fc2[1])),
    )


def _loss_grads_trace(params, batch, labels):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= params.arch.n_classes):
        raise ValueError(
            f"labels must lie in 0..{params.arch.n_classes - 1}"
        )
    trace = forward(params, batch)
    b = trace.logits.shape[0]
    if labels.shape[0] != b:
        raise ValueError(f"{labels.shape[0]} labels for a batch of {b}")
    probs = softmax(trace.logits)
    log_probs = trace.logits - trace.logits.max(axis=1, keepdims=True)
    log_probs = log_probs - np.log(np.exp(log_probs).sum(axis=1, keepdims=True))
    loss = float(-log_probs[np.arange(b), labels].mean())

    grads = _zero_grads(params)
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b

    w2, _ = params.fc2
    grads.fc2 = (dlogits.T @ trace.latent, dlogits.sum(axis=0))
    dlatent = dlogits @ w2
    dpre1 = dlatent * (trace.cache["pre1"] > 0.0)
    w1, _ = params.fc1
    grads.fc1 = (dpre1.T @ trace.cache["flat"], dpre1.sum(axis=0))
    dflat = dpre1 @ w1
    dh = dflat.reshape(trace.cache["pooled_shape"])

    for i in range(len(params.conv) - 1, -1, -1):
        blk = trace.cache["blocks"][i]
        da = _maxpool_backward(dh, blk["arg"], blk["a_shape"])
        dz = da * (blk["z"] > 0.0)
        dh, dk, db = _conv2d_backward(dz, blk["mat"], params.conv[i][0], blk["x_shape"])
        grads.conv[i] = (dk, db)
    return loss, grads, trace


def loss_and_grads(params: ModelParams, batch, labels):
    """Mean softmax cross-entropy over the batch and its exact gradients."""
    loss, grads, _ = _loss_grads_trace(params, batch, labels)
    return loss, grads


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def init_adam_state(params: ModelParams) -> AdamState:
    arrays = [a for _, a in params.arrays()]
    return AdamState(
        m=[np.zeros_like(a) for a in arrays],
        v=[np.zeros_like(a) for a in arrays],
    )


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    new = params.copy()
    t = state.t + 1
    new_m, new_v = [], []
    pairs = list(zip(new.arrays(), grads.arrays()))
    for idx, ((_, p), (name, g)) in enumerate(pairs):
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient in {name}")
        m = beta1 * state.m[idx] + (1.0 - beta1) * g
        v = beta2 * state.v[idx] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m.append(m)
        new_v.append(v)
    return new, AdamState(m=new_m, v=new_v, t=t)


def save_checkpoint(path: str | Path, params: ModelParams) -> None:
    """Self-describing binary checkpoint: JSON header + raw little-endian
    float64 payload. Byte-stable across platforms."""
    arrays = params.arrays()
    header = {
        "mode": params.mode,
        "arch": {
            "conv_widths": list(params.arch.conv_widths),
            "latent_dim": params.arch.latent_dim,
            "n_classes": params.arch.n_classes,
        },
        "arrays": [[name, list(a.shape)] for name, a in arrays],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_CHECKPOINT_MAGIC)
        f.write(_CHECKPOINT_VERSION.to_bytes(4, "little"))
        f.write(len(blob).to_bytes(4, "little"))
        f.write(blob)
        for _, a in arrays:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> ModelParams:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        version = int.from_bytes(f.read(4), "little")
        if version != _CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        header = json.loads(f.read(int.from_bytes(f.read(4), "little")))
        arrays = {}
        for name, shape in header["arrays"]:
            n = int(np.prod(shape)) if shape else 1
            buf = f.read(8 * n)
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    arch = Architecture(
        conv_widths=tuple(header["arch"]["conv_widths"]),
        latent_dim=header["arch"]["latent_dim"],
        n_classes=header["arch"]["n_classes"],
    )
    conv = [
        (arrays[f"conv{i}.kernels"], arrays[f"conv{i}.bias"])
        for i in range(len(arch.conv_widths))
    ]
    return ModelParams(
        mode=header["mode"],
        arch=arch,
        conv=conv,
        fc1=(arrays["fc1.weights"], arrays["fc1.bias"]),
        fc2=(arrays["fc2.weights"], arrays["fc2.bias"]),
    )
