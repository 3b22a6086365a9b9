"""The convolutional denoising autoencoder and its checkpoint container."""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .layers import BatchNorm1d, Conv1d, ConvTranspose1d, ReLU, Sequential, Sigmoid
from .tensor import Tensor

CHECKPOINT_FORMAT = "ppgdae-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class DaeArchitecture:
    """Layer sizes of the encoder/decoder.

    The encoder halves the length at every block, the decoder doubles it back,
    and a final stride-1 convolution with a sigmoid maps to one channel.
    """

    input_length: int = 1920
    encoder_channels: tuple[int, ...] = (32, 64, 128, 256)
    decoder_channels: tuple[int, ...] = (128, 64, 32, 32)
    kernel: int = 8
    stride: int = 2
    padding: int = 3
    head_kernel: int = 7
    head_padding: int = 3

    def __post_init__(self):
        if len(self.decoder_channels) != len(self.encoder_channels):
            raise ValueError("encoder and decoder need the same number of blocks")
        length = self.input_length
        for _ in self.encoder_channels:
            length = (length + 2 * self.padding - self.kernel) // self.stride + 1
        for _ in self.decoder_channels:
            length = (length - 1) * self.stride - 2 * self.padding + self.kernel
        if length != self.input_length:
            raise ValueError(f"architecture does not reconstruct length {self.input_length} (got {length})")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_channels"] = list(self.encoder_channels)
        d["decoder_channels"] = list(self.decoder_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DaeArchitecture":
        d = dict(d)
        d["encoder_channels"] = tuple(d["encoder_channels"])
        d["decoder_channels"] = tuple(d["decoder_channels"])
        return cls(**d)


@dataclass
class DaeModel:
    """Encoder/decoder network mapping (N, 1, L) erased signals to (N, 1, L) reconstructions."""

    architecture: DaeArchitecture = field(default_factory=DaeArchitecture)
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        arch = self.architecture
        dt = np.dtype(self.dtype)
        rng = np.random.Generator(np.random.PCG64(self.seed))
        layers = []
        ch = 1
        for out in arch.encoder_channels:
            layers += [Conv1d(ch, out, arch.kernel, arch.stride, arch.padding, rng, dt), ReLU(), BatchNorm1d(out, dtype=dt)]
            ch = out
        for out in arch.decoder_channels:
            layers += [ConvTranspose1d(ch, out, arch.kernel, arch.stride, arch.padding, rng, dt), ReLU(), BatchNorm1d(out, dtype=dt)]
            ch = out
        layers += [Conv1d(ch, 1, arch.head_kernel, 1, arch.head_padding, rng, dt), Sigmoid()]
        self.net = Sequential(*layers)

    def parameters(self) -> list[Tensor]:
        return self.net.parameters()

    def train(self, mode: bool = True) -> "DaeModel":
        self.net.train(mode)
        return self

    def eval(self) -> "DaeModel":
        return self.train(False)

    @property
    def training(self) -> bool:
        return self.net.training

    def zero_grad(self) -> None:
        self.net.zero_grad()

    def forward(self, x) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        if x.data.ndim == 2:
            x = Tensor(x.data[:, None, :], x.requires_grad)
        if x.shape[1:] != (1, self.architecture.input_length):
            raise ValueError(
                f"model expects input (N, 1, {self.architecture.input_length}), got {x.shape}"
            )
        return self.net(x)

    __call__ = forward

    def predict(self, x: np.ndarray, batch_size: int = 64) -> np.ndarray:
        """Eval-mode reconstruction of a (N, L) array; returns float64 (N, L)."""
        x = np.atleast_2d(np.asarray(x))
        was_training = self.training
        self.eval()
        try:
            out = [
                self.forward(x[i : i + batch_size].astype(self.dtype)).data[:, 0, :]
                for i in range(0, len(x), batch_size)
            ]
        finally:
            self.train(was_training)
        return np.concatenate(out).astype(np.float64)

    # -- state ---------------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Every parameter and buffer keyed by a stable name."""
        state = {}
        for i, layer in enumerate(self.net.layers):
            for p in layer.parameters():
                state[f"{i}.{p.name}"] = p.data
            for name, buf in layer.buffers().items():
                state[f"{i}.{name}"] = buf
        return state

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        own = self.state_arrays()
        if set(own) != set(state):
            raise ValueError("checkpoint keys do not match architecture")
        for key, arr in own.items():
            src = np.asarray(state[key])
            if src.shape != arr.shape:
                raise ValueError(f"shape mismatch for {key}: {src.shape} vs {arr.shape}")
            arr[...] = src

    def copy(self) -> "DaeModel":
        clone = DaeModel(self.architecture, self.seed, self.dtype)
        clone.load_state_arrays(self.state_arrays())
        clone.train(self.training)
        return clone

    def to_json(self, meta: Optional[dict] = None) -> str:
        """Checkpoint document; ``meta`` (e.g. the training config) is stored verbatim."""
        arrays = {
            key: {
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "data": base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii"),
            }
            for key, arr in self.state_arrays().items()
        }
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "architecture": self.architecture.to_dict(),
            "seed": self.seed,
            "dtype": self.dtype,
            "arrays": arrays,
        }
        if meta:
            doc["meta"] = meta
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DaeModel":
        doc = json.loads(text)
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a model checkpoint")
        if doc.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
        model = cls(DaeArchitecture.from_dict(doc["architecture"]), doc["seed"], doc["dtype"])
        state = {
            key: np.frombuffer(base64.b64decode(entry["data"]), dtype=np.dtype(entry["dtype"])).reshape(entry["shape"])
            for key, entry in doc["arrays"].items()
        }
        model.load_state_arrays(state)
        return model

    def save(self, path, meta: Optional[dict] = None) -> None:
        Path(path).write_text(self.to_json(meta))

    @classmethod
    def load(cls, path) -> "DaeModel":
        return cls.from_json(Path(path).read_text())
