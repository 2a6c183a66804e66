"""VGG-style regression network and its binary weight file."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, nn
from .errors import CorruptFile, IndivisibleSpatialDims, ShapeMismatch, VersionMismatch

MAGIC = b"AFW1"
FORMAT_VERSION = 1

PRESETS = {2: (8, 16), 4: (8, 16, 32, 64)}


@dataclass(frozen=True)
class ModelConfig:
    conv_blocks: tuple = (8, 16)
    fc_hidden: int = 128
    input_shape: tuple = (1, 128, 128)
    use_batchnorm: bool = True

    def __post_init__(self):
        object.__setattr__(self, "conv_blocks", tuple(int(c) for c in self.conv_blocks))
        object.__setattr__(self, "input_shape", tuple(int(c) for c in self.input_shape))
        if not self.conv_blocks or min(self.conv_blocks) < 1:
            raise ValueError("need at least one conv block with >= 1 channel")
        if self.fc_hidden < 1:
            raise ValueError("fc_hidden must be >= 1")
        _, h, w = self.input_shape
        div = 2 ** len(self.conv_blocks)
        if h % div or w % div:
            raise IndivisibleSpatialDims(
                f"input {h}x{w} not divisible by 2^{len(self.conv_blocks)}")

    @classmethod
    def preset(cls, blocks: int, **kw):
        return cls(conv_blocks=PRESETS[blocks], **kw)

    @property
    def feature_side(self):
        div = 2 ** len(self.conv_blocks)
        return self.input_shape[1] // div, self.input_shape[2] // div

    @property
    def flatten_width(self) -> int:
        fh, fw = self.feature_side
        return self.conv_blocks[-1] * fh * fw

    def to_dict(self):
        return {"conv_blocks": list(self.conv_blocks), "fc_hidden": self.fc_hidden,
                "input_shape": list(self.input_shape), "use_batchnorm": self.use_batchnorm}


def param_layout(config: ModelConfig):
    """(name, shape, trainable) for every stored tensor, in file order."""
    out = []
    cin = config.input_shape[0]
    for k, cout in enumerate(config.conv_blocks, start=1):
        out.append((f"conv{k}.weight", (cout, cin, 3, 3), True))
        out.append((f"conv{k}.bias", (cout,), True))
        if config.use_batchnorm:
            out.append((f"bn{k}.gamma", (cout,), True))
            out.append((f"bn{k}.beta", (cout,), True))
            out.append((f"bn{k}.running_mean", (cout,), False))
            out.append((f"bn{k}.running_var", (cout,), False))
        cin = cout
    out.append(("fc1.weight", (config.fc_hidden, config.flatten_width), True))
    out.append(("fc1.bias", (config.fc_hidden,), True))
    out.append(("fc2.weight", (1, config.fc_hidden), True))
    out.append(("fc2.bias", (1,), True))
    return out


class Model:
    """Conv blocks (conv3x3 -> [BN] -> ReLU -> maxpool2x2), then FC -> ReLU -> FC.

    ``params`` holds trainable tensors, ``buffers`` the batch-norm running
    statistics. Outputs live in standardized label space; ``label_mean`` and
    ``label_std`` map them back.
    """

    def __init__(self, config: ModelConfig, params: dict, buffers: dict,
                 label_mean: float = 0.0, label_std: float = 1.0):
        if not label_std > 0:
            raise ValueError("label_std must be > 0")
        self.config = config
        self.params = params
        self.buffers = buffers
        self.label_mean = float(label_mean)
        self.label_std = float(label_std)
        self._cache = None

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()},
                     {k: v.copy() for k, v in self.buffers.items()},
                     self.label_mean, self.label_std)

    def tensors(self):
        """All stored tensors in file order."""
        merged = {**self.params, **self.buffers}
        return [(name, merged[name]) for name, _, _ in param_layout(self.config)]

    def param_count(self, trainable_only=True) -> int:
        pool = self.params if trainable_only else {**self.params, **self.buffers}
        return sum(int(v.size) for v in pool.values())

    def _bn(self, k):
        return nn.BatchNormParams(self.params[f"bn{k}.gamma"], self.params[f"bn{k}.beta"],
                                  self.buffers[f"bn{k}.running_mean"],
                                  self.buffers[f"bn{k}.running_var"])

    def forward(self, x, train: bool = False):
        """Normalized prediction of shape (N, 1).

        Training mode uses batch statistics and keeps what :meth:`backward`
        needs. Inference mode folds the running statistics into the conv
        weights and is a pure function of weights and input.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1:] != self.config.input_shape:
            raise ShapeMismatch(f"expected (N, {self.config.input_shape}), got {x.shape}")
        if not train:
            h = np.ascontiguousarray(x)
            cls, vals = _input_classes(h)
            for w, b in self._folded():
                cls, vals = _pooled_classes(cls, vals, w, b)
                h = kernels.conv3x3_maxpool_relu_masked(h, w, b, cls, vals)
            return self._head(h, None)
        cache = []
        h = x
        for k in range(1, len(self.config.conv_blocks) + 1):
            z = nn.conv2d_fwd(h, self.params[f"conv{k}.weight"], self.params[f"conv{k}.bias"])
            bn_cache = None
            if self.config.use_batchnorm:
                z, bn_cache = nn.batchnorm_fwd(z, self._bn(k), True)
            p, idx = kernels.relu_maxpool2x2_fwd(z)
            cache.append((h, bn_cache, z, idx))
            h = p
        return self._head(h, cache)

    def _folded(self):
        """Per-block conv weights with inference-mode batch-norm folded in."""
        out = []
        for k in range(1, len(self.config.conv_blocks) + 1):
            w, b = self.params[f"conv{k}.weight"], self.params[f"conv{k}.bias"]
            if self.config.use_batchnorm:
                scale = self.params[f"bn{k}.gamma"] / np.sqrt(self.buffers[f"bn{k}.running_var"] + nn.BN_EPS)
                b = (b - self.buffers[f"bn{k}.running_mean"]) * scale + self.params[f"bn{k}.beta"]
                w = w * scale[:, None, None, None]
            out.append((np.ascontiguousarray(w), np.ascontiguousarray(b)))
        return out

    def _head(self, h, cache):
        flat = h.reshape(h.shape[0], -1)
        z1 = nn.fc_fwd(flat, self.params["fc1.weight"], self.params["fc1.bias"])
        a1 = nn.relu_fwd(z1)
        out = nn.fc_fwd(a1, self.params["fc2.weight"], self.params["fc2.bias"])
        if cache is not None:
            self._cache = (cache, h.shape, flat, z1, a1)
        return out

    def backward(self, dout) -> dict:
        """Parameter gradients for the last training-mode forward pass."""
        if self._cache is None:
            raise RuntimeError("backward() needs a preceding forward(train=True)")
        blocks, pooled_shape, flat, z1, a1 = self._cache
        self._cache = None
        g = {}
        da1, g["fc2.weight"], g["fc2.bias"] = nn.fc_bwd(dout, a1, self.params["fc2.weight"])
        dz1 = nn.relu_bwd(da1, z1)
        dflat, g["fc1.weight"], g["fc1.bias"] = nn.fc_bwd(dz1, flat, self.params["fc1.weight"])
        dh = dflat.reshape(pooled_shape)
        for k in range(len(blocks), 0, -1):
            h_in, bn_cache, z, idx = blocks[k - 1]
            dz = kernels.relu_maxpool2x2_bwd(np.ascontiguousarray(dh), idx, z)
            if bn_cache is not None:
                dz, g[f"bn{k}.gamma"], g[f"bn{k}.beta"] = nn.batchnorm_bwd(
                    dz, bn_cache, self.params[f"bn{k}.gamma"])
            dh, g[f"conv{k}.weight"], g[f"conv{k}.bias"] = nn.conv2d_bwd(
                dz, h_in, self.params[f"conv{k}.weight"], need_dx=k > 1)
        return {name: g[name] for name in self.params}

    def predict(self, x, batch_size: int = 256):
        """Inference-mode normalized outputs, evaluated in fixed-size chunks."""
        x = np.asarray(x)
        outs = [self.forward(x[i:i + batch_size], train=False) for i in range(0, len(x), batch_size)]
        return np.concatenate(outs, axis=0) if outs else np.zeros((0, 1))

    def denormalize(self, z):
        return np.asarray(z) * self.label_std + self.label_mean

    def normalize_labels(self, y):
        return (np.asarray(y, dtype=np.float64) - self.label_mean) / self.label_std

    def predict_denormalized(self, x, batch_size: int = 256):
        return self.denormalize(self.predict(x, batch_size))[:, 0]


def _input_classes(x):
    """Per-pixel uniformity classes of a batch; binary single-channel input only.

    Returns ``(cls, vals)`` where ``cls[s, i, j] = u >= 0`` marks a pixel whose
    channel vector equals ``vals[u]`` and -1 marks anything else.
    """
    n, c, h, w = x.shape
    if c == 1 and np.all((x == 0.0) | (x == 1.0)):
        return x[:, 0].astype(np.int8), np.array([[0.0], [1.0]])
    return np.full((n, h, w), -1, dtype=np.int8), np.zeros((1, c))


def _pooled_classes(cls, vals, w, b):
    """Classes and constant outputs after one conv3x3 -> maxpool2x2 -> relu block."""
    out = kernels.uniform_pool_classes(np.ascontiguousarray(cls))
    new_vals = np.maximum(b[None, :] + vals @ w.sum(axis=(2, 3)).T, 0.0)
    return out, np.ascontiguousarray(new_vals)


def build_model(config: ModelConfig = ModelConfig(), seed: int = 0) -> Model:
    """He-uniform weights, zero biases, unit gamma and zero beta."""
    rng = np.random.default_rng(seed)
    params, buffers = {}, {}
    for name, shape, trainable in param_layout(config):
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[1:]))
            lim = np.sqrt(6.0 / fan_in)
            arr = rng.uniform(-lim, lim, size=shape)
        elif name.endswith((".gamma", ".running_var")):
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        (params if trainable else buffers)[name] = arr
    return Model(config, params, buffers)


# weight file ----------------------------------------------------------------------------

def save_weights(model: Model, path) -> None:
    cfg = model.config
    c, h, w = cfg.input_shape
    if h != w:
        raise ValueError("weight format stores square inputs only")
    out = bytearray(MAGIC)
    out += struct.pack("<I", FORMAT_VERSION)
    out += struct.pack("<I", len(cfg.conv_blocks))
    out += struct.pack(f"<{len(cfg.conv_blocks)}I", *cfg.conv_blocks)
    out += struct.pack("<IB", cfg.fc_hidden, int(cfg.use_batchnorm))
    out += struct.pack("<2d", model.label_mean, model.label_std)
    for _, arr in model.tensors():
        out += struct.pack("<I", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise CorruptFile("weight file truncated")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def array(self, shape):
        count = int(np.prod(shape))
        if self.pos + 8 * count > len(self.data):
            raise CorruptFile("weight file truncated")
        arr = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.pos)
        self.pos += 8 * count
        return arr.astype(np.float64).reshape(shape)


def load_weights(path) -> Model:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    r = _Reader(data)
    r.pos = 4
    (version,) = r.take("<I")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    (nblocks,) = r.take("<I")
    if not 1 <= nblocks <= 16:
        raise CorruptFile(f"{path}: implausible block count {nblocks}")
    channels = r.take(f"<{nblocks}I")
    fc_hidden, bn_flag = r.take("<IB")
    if bn_flag not in (0, 1):
        raise CorruptFile(f"{path}: bad batchnorm flag")
    mean, std = r.take("<2d")

    tensors = []
    while r.pos < len(data):
        (rank,) = r.take("<I")
        if rank > 8:
            raise CorruptFile(f"{path}: bad tensor rank {rank}")
        dims = r.take(f"<{rank}I")
        tensors.append(r.array(dims))
        if len(tensors) > 8 * nblocks + 4:
            raise CorruptFile(f"{path}: too many tensors")
    if len(tensors) < 4:
        raise CorruptFile(f"{path}: shape table incomplete")

    c_in = tensors[0].shape[1] if tensors[0].ndim == 4 else 0
    fc_in = tensors[-4].shape[1] if tensors[-4].ndim == 2 else 0
    cells = fc_in // channels[-1] if channels[-1] else 0
    side = int(round(np.sqrt(cells)))
    if c_in < 1 or side < 1 or side * side * channels[-1] != fc_in:
        raise CorruptFile(f"{path}: inconsistent shape table")
    try:
        config = ModelConfig(tuple(channels), fc_hidden, (c_in, side * 2**nblocks, side * 2**nblocks),
                             bool(bn_flag))
    except ValueError as exc:
        raise CorruptFile(f"{path}: {exc}") from None
    layout = param_layout(config)
    if len(layout) != len(tensors):
        raise CorruptFile(f"{path}: expected {len(layout)} tensors, found {len(tensors)}")
    params, buffers = {}, {}
    for (name, shape, trainable), arr in zip(layout, tensors):
        if arr.shape != shape:
            raise CorruptFile(f"{path}: {name} has shape {arr.shape}, expected {shape}")
        (params if trainable else buffers)[name] = arr
    if not std > 0:
        raise CorruptFile(f"{path}: non-positive label std")
    return Model(config, params, buffers, mean, std)
