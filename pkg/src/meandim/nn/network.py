"""Self-contained forward-pass evaluator for small feed-forward classifiers.

Supports the layer zoo needed for pixel classifiers: valid-padding
convolution, non-overlapping max pooling, flatten, dense layers with
identity/relu activations, and inference-time no-op dropout.  The network
exposes both the final-layer scores ("logits", pre-softmax) and the softmax
probabilities; weights are immutable after load, so forward passes are
thread-safe.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..blackbox import BlackBox, EvaluationError

__all__ = [
    "Conv2D",
    "MaxPool",
    "Flatten",
    "Dense",
    "Dropout",
    "NetworkSpec",
    "ShapeError",
    "softmax",
]

ACTIVATIONS = ("identity", "relu")


class ShapeError(ValueError):
    """Layer shapes do not chain."""


def _act(values: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(values, 0.0)
    return values


@dataclass
class Conv2D:
    """Cross-correlation with kernel weights of shape (kh, kw, cin, cout)."""

    weights: np.ndarray
    bias: np.ndarray
    stride: int = 1
    padding: str = "valid"
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float32)
        self.bias = np.asarray(self.bias, dtype=np.float32)
        if self.weights.ndim != 4:
            raise ShapeError("conv weights must have shape (kh, kw, cin, cout)")
        if self.bias.shape != (self.weights.shape[3],):
            raise ShapeError("conv bias must have one entry per kernel")
        if self.padding != "valid":
            raise ShapeError(f"unsupported conv padding {self.padding!r}")
        if self.stride < 1:
            raise ShapeError("conv stride must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        h, w, c = shape
        kh, kw, cin, cout = self.weights.shape
        if c != cin:
            raise ShapeError(f"conv expects {cin} input channels, got {c}")
        if h < kh or w < kw:
            raise ShapeError(f"input {h}x{w} smaller than kernel {kh}x{kw}")
        return ((h - kh) // self.stride + 1, (w - kw) // self.stride + 1, cout)

    def forward(self, x: np.ndarray) -> np.ndarray:
        kh, kw, cin, cout = self.weights.shape
        view = sliding_window_view(x, (kh, kw), axis=(1, 2))
        view = view[:, :: self.stride, :: self.stride]
        n, ho, wo = view.shape[:3]
        patches = view.transpose(0, 1, 2, 4, 5, 3).reshape(n, ho, wo, kh * kw * cin)
        wmat = self.weights.reshape(kh * kw * cin, cout).astype(np.float64)
        return _act(patches @ wmat + self.bias.astype(np.float64), self.activation)


@dataclass
class MaxPool:
    """Non-overlapping max pooling; trailing rows/cols that do not fill a
    window are dropped."""

    window: tuple[int, int] = (2, 2)

    def __post_init__(self):
        ph, pw = self.window
        if ph < 1 or pw < 1:
            raise ShapeError("pool window must be positive")
        self.window = (int(ph), int(pw))

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        h, w, c = shape
        ph, pw = self.window
        if h < ph or w < pw:
            raise ShapeError(f"input {h}x{w} smaller than pool window {ph}x{pw}")
        return (h // ph, w // pw, c)

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, h, w, c = x.shape
        ph, pw = self.window
        ho, wo = h // ph, w // pw
        x = x[:, : ho * ph, : wo * pw]
        return x.reshape(n, ho, ph, wo, pw, c).max(axis=(2, 4))


@dataclass
class Flatten:
    """Row-major flatten over (height, width, channels)."""

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        return (int(np.prod(shape)),)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(x.shape[0], -1)


@dataclass
class Dense:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float32)
        self.bias = np.asarray(self.bias, dtype=np.float32)
        if self.weights.ndim != 2:
            raise ShapeError("dense weights must have shape (n_in, n_out)")
        if self.bias.shape != (self.weights.shape[1],):
            raise ShapeError("dense bias length must match outputs")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        if len(shape) != 1 or shape[0] != self.weights.shape[0]:
            raise ShapeError(
                f"dense expects flat input of {self.weights.shape[0]}, got {shape}"
            )
        return (self.weights.shape[1],)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return _act(
            x @ self.weights.astype(np.float64) + self.bias.astype(np.float64),
            self.activation,
        )


@dataclass
class Dropout:
    """Stored for provenance; identity at inference."""

    rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ShapeError("dropout rate must be in [0, 1)")

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        return shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x


Layer = Conv2D | MaxPool | Flatten | Dense | Dropout


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction for stability."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class NetworkSpec:
    """An ordered stack of layers applied to (H, W, C) inputs."""

    input_shape: tuple[int, int, int]
    layers: list[Layer]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if len(self.input_shape) != 3 or any(s < 1 for s in self.input_shape):
            raise ShapeError(f"bad input shape {self.input_shape}")
        self.validate()

    def validate(self) -> list[tuple[int, ...]]:
        """Check the shape chain; returns the shape after every layer."""
        shapes = []
        shape: tuple[int, ...] = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({type(layer).__name__}): {exc}") from exc
            shapes.append(shape)
        if len(shape) != 1:
            raise ShapeError("network must end with a flat output")
        return shapes

    @property
    def n_inputs(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def n_outputs(self) -> int:
        return self.validate()[-1][0]

    def forward(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate a batch of flat input vectors.

        Returns ``(scores, probs)``: the final-layer outputs and their
        softmax.  Raises :class:`EvaluationError` naming the layer if a
        non-finite intermediate appears.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.n_inputs:
            raise ShapeError(
                f"expected {self.n_inputs} inputs ({self.input_shape}), got {points.shape[1]}"
            )
        x = points.reshape(points.shape[0], *self.input_shape)
        for i, layer in enumerate(self.layers):
            x = layer.forward(x)
            if not np.all(np.isfinite(x)):
                raise EvaluationError(
                    f"non-finite output of layer {i} ({type(layer).__name__})"
                )
        g = x
        return g, softmax(g)

    def as_blackbox(self, output: int, target: str = "g") -> BlackBox:
        """View one classifier output as a scalar black box.

        ``target="g"`` selects the pre-softmax score, ``"f"`` the softmax
        probability.
        """
        if target not in ("g", "f"):
            raise ValueError("target must be 'g' or 'f'")
        n_out = self.n_outputs
        if not 0 <= output < n_out:
            raise ValueError(f"output {output} out of range 0..{n_out - 1}")

        def func(points: np.ndarray) -> np.ndarray:
            g, f = self.forward(points)
            return (g if target == "g" else f)[:, output]

        return BlackBox(self.n_inputs, func, name=f"{target}{output}")

    def layer_summary(self) -> list[str]:
        shapes = self.validate()
        out = [f"input {self.input_shape}"]
        for layer, shape in zip(self.layers, shapes):
            out.append(f"{type(layer).__name__} -> {shape}")
        return out
