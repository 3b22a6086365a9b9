from __future__ import annotations

import numpy as np

from . import functional as F
from .tensor import Tensor


class Module:
    training = True

    def parameters(self) -> list[Tensor]:
        return []

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def train(self, mode: bool = True):
        self.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, x):
        return self.forward(x)


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv1d(Module):
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, rng=None, dtype=np.float64):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stride, self.padding = stride, padding
        self.weight = Tensor(kaiming_uniform(rng, (out_ch, in_ch, kernel), in_ch * kernel, dtype), True, "weight")
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), True, "bias")

    @property
    def in_ch(self) -> int:
        return self.weight.shape[1]

    @property
    def out_ch(self) -> int:
        return self.weight.shape[0]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    def output_length(self, length: int) -> int:
        return F.conv1d_output_length(length, self.kernel, self.stride, self.padding)

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x):
        return F.conv1d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose1d(Module):
    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0, rng=None, dtype=np.float64):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.stride, self.padding = stride, padding
        self.weight = Tensor(kaiming_uniform(rng, (in_ch, out_ch, kernel), in_ch * kernel, dtype), True, "weight")
        self.bias = Tensor(np.zeros(out_ch, dtype=dtype), True, "bias")

    @property
    def in_ch(self) -> int:
        return self.weight.shape[0]

    @property
    def out_ch(self) -> int:
        return self.weight.shape[1]

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    def output_length(self, length: int) -> int:
        return F.conv_transpose1d_output_length(length, self.kernel, self.stride, self.padding)

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x):
        return F.conv_transpose1d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm1d(Module):
    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float64):
        self.momentum, self.eps = momentum, eps
        self.gamma = Tensor(np.ones(channels, dtype=dtype), True, "gamma")
        self.beta = Tensor(np.zeros(channels, dtype=dtype), True, "beta")
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x):
        return F.batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            self.training, self.momentum, self.eps,
        )


class ReLU(Module):
    def forward(self, x):
        return F.relu(x)


class Sigmoid(Module):
    def forward(self, x):
        return F.sigmoid(x)


class Sequential(Module):
    def __init__(self, *layers: Module):
        self.layers = list(layers)

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def buffers(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, buf in layer.buffers().items():
                out[f"{i}.{name}"] = buf
        return out

    def train(self, mode: bool = True):
        self.training = mode
        for layer in self.layers:
            layer.train(mode)
        return self

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x
