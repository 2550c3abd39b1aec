"""Network assembly, inference and the checkpoint container.

The default architecture follows the early convolutional stack of the
classic large image-classification network, shrunk to one input
channel and two output classes, with a 300-unit feature layer before
the classifier head. The desk profile divides channel counts by 4 and
works on 64x64 inputs so CPU training stays tractable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .layers import BatchNorm2d, Conv2d, Dense, Flatten, MaxPool2d, ReLU, softmax_predict

CHECKPOINT_MAGIC = b"MCADNET1"
CHECKPOINT_VERSION = 1


def _default_layers(channel_scale: int, feature_dim: int, num_classes: int):
    s = channel_scale
    return [
        {"kind": "conv", "out": 96 // s, "kernel": 11, "stride": 4, "padding": 2},
        {"kind": "batchnorm"},
        {"kind": "relu"},
        {"kind": "pool", "window": 3, "stride": 2},
        {"kind": "conv", "out": 256 // s, "kernel": 5, "stride": 1, "padding": 2},
        {"kind": "batchnorm"},
        {"kind": "relu"},
        {"kind": "pool", "window": 3, "stride": 2},
        {"kind": "conv", "out": 384 // s, "kernel": 3, "stride": 1, "padding": 1},
        {"kind": "batchnorm"},
        {"kind": "relu"},
        {"kind": "pool", "window": 3, "stride": 2},
        {"kind": "flatten"},
        {"kind": "dense", "out": feature_dim},
        {"kind": "relu"},
        {"kind": "dense", "out": num_classes},
    ]


@dataclass(frozen=True)
class NetworkConfig:
    input_size: int = 256
    num_classes: int = 2
    feature_dim: int = 300
    channel_scale: int = 1
    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not self.layers:
            object.__setattr__(self, "layers", _default_layers(
                self.channel_scale, self.feature_dim, self.num_classes))

    @staticmethod
    def desk() -> "NetworkConfig":
        return NetworkConfig(input_size=64, channel_scale=4)

    def to_json(self) -> str:
        return json.dumps({
            "input_size": self.input_size,
            "num_classes": self.num_classes,
            "feature_dim": self.feature_dim,
            "channel_scale": self.channel_scale,
            "layers": self.layers,
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "NetworkConfig":
        d = json.loads(text)
        return NetworkConfig(
            input_size=d["input_size"], num_classes=d["num_classes"],
            feature_dim=d["feature_dim"], channel_scale=d["channel_scale"],
            layers=d["layers"])


class Network:
    """Layer stack with shape checking done once at construction."""

    def __init__(self, config: NetworkConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.layers = []
        self.feature_layer = None       # index of the penultimate activation
        channels, h, w = 1, config.input_size, config.input_size
        flat = None
        for spec in config.layers:
            kind = spec["kind"]
            if kind == "conv":
                layer = Conv2d(channels, spec["out"], spec["kernel"],
                               stride=spec.get("stride", 1),
                               padding=spec.get("padding", 0), rng=rng)
                h, w = layer.output_shape(h, w)
                channels = spec["out"]
            elif kind == "batchnorm":
                layer = BatchNorm2d(channels)
            elif kind == "relu":
                layer = ReLU()
            elif kind == "pool":
                layer = MaxPool2d(spec.get("window", 3), spec.get("stride", 2))
                h, w = layer.output_shape(h, w)
            elif kind == "flatten":
                layer = Flatten()
                flat = channels * h * w
            elif kind == "dense":
                if flat is None:
                    raise ValueError("dense layer before flatten")
                layer = Dense(flat, spec["out"], rng=rng)
                flat = spec["out"]
                if spec["out"] == config.feature_dim:
                    self.feature_layer = len(self.layers) + 1  # its ReLU
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
            if kind in ("conv", "pool") and (h < 1 or w < 1):
                raise ValueError(f"spatial extent collapsed to {h}x{w} at {kind}")
            self.layers.append(layer)
        if flat != config.num_classes:
            raise ValueError(f"head produces {flat} outputs, expected {config.num_classes}")

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def named_params(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.params().items():
                out[f"layer{i:02d}.{name}"] = value
        return out

    def named_grads(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, value in layer.grads().items():
                out[f"layer{i:02d}.{name}"] = value
        return out

    def named_state(self):
        """Non-trained tensors that still belong in a checkpoint."""
        out = {}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm2d):
                for name, value in layer.state().items():
                    out[f"layer{i:02d}.{name}"] = value
        return out

    def set_tensor(self, name, value):
        idx = int(name.split(".")[0].removeprefix("layer"))
        attr = name.split(".", 1)[1]
        layer = self.layers[idx]
        current = getattr(layer, attr)
        if current.shape != value.shape:
            raise ValueError(f"shape mismatch for {name}: {current.shape} vs {value.shape}")
        setattr(layer, attr, value.copy())

    def predict(self, images):
        """Probabilities and labels for a batch of 2-D images."""
        x = np.stack([np.asarray(im, dtype=np.float64) for im in images])[:, None]
        logits = self.forward(x, train=False)
        return softmax_predict(logits)

    def features(self, image):
        """Activations of the feature layer for one image."""
        if self.feature_layer is None:
            raise ValueError("network has no feature layer")
        x = np.asarray(image, dtype=np.float64)[None, None]
        for layer in self.layers[: self.feature_layer + 1]:
            x = layer.forward(x, train=False)
        return x[0]


def save_checkpoint(network: Network, path) -> None:
    """Versioned binary container with named little-endian float64 tensors."""
    tensors = dict(network.named_params())
    tensors.update(network.named_state())
    descriptor = network.config.to_json().encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(descriptor)))
        fh.write(descriptor)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name], dtype="<f8")
            encoded = name.encode()
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> Network:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not a model checkpoint (bad magic)")
    pos = 8
    (version,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (desc_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    config = NetworkConfig.from_json(data[pos:pos + desc_len].decode())
    pos += desc_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    network = Network(config)
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + name_len].decode()
        pos += name_len
        (rank,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{rank}Q", data, pos)
        pos += 8 * rank
        n_items = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(data, dtype="<f8", count=n_items, offset=pos).reshape(shape)
        pos += 8 * n_items
        network.set_tensor(name, arr.astype(np.float64))
    return network
