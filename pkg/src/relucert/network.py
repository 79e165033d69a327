"""Deep ReLU network with standard parameterization.

The network maps an N x n0 input through L weight matrices; every layer but
the last applies an elementwise ReLU. Forward passes cache all per-layer
features and hidden preactivations so that gradients, output Jacobian blocks
and the empirical tangent kernel can be assembled without re-running the
network. The ReLU derivative at zero is taken to be zero, which makes every
quantity here a deterministic function of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg

__all__ = [
    "Architecture",
    "Params",
    "FeatureCache",
    "GradientSet",
    "forward",
    "loss",
    "gradients",
    "jacobian_block",
]


@dataclass(frozen=True)
class Architecture:
    """Layer widths (n0, n1, ..., nL); depth is the number of weight layers."""

    widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("architecture needs at least an input and an output width")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"all widths must be >= 1, got {self.widths}")

    @property
    def depth(self) -> int:
        return len(self.widths) - 1


@dataclass(frozen=True)
class Params:
    """Weight matrices (W_1, ..., W_L); W_l has shape n_{l-1} x n_l."""

    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(linalg.as_matrix(w, f"W_{i + 1}") for i, w in enumerate(self.weights))
        object.__setattr__(self, "weights", ws)
        for prev, nxt in zip(ws, ws[1:]):
            if prev.shape[1] != nxt.shape[0]:
                raise ValueError(
                    f"weight shapes do not chain: {prev.shape} then {nxt.shape}"
                )

    @property
    def depth(self) -> int:
        return len(self.weights)

    def architecture(self) -> Architecture:
        widths = [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]
        return Architecture(tuple(widths))


@dataclass(frozen=True)
class FeatureCache:
    """Per-layer outputs (F_0, ..., F_L) and hidden preactivations.

    F_0 is the input; F_l = relu(F_{l-1} W_l) for hidden layers; the output
    layer is linear. ``preacts`` holds F_{l-1} W_l for the hidden layers only.
    """

    features: tuple[np.ndarray, ...]
    preacts: tuple[np.ndarray, ...]

    @property
    def x(self) -> np.ndarray:
        return self.features[0]

    @property
    def output(self) -> np.ndarray:
        return self.features[-1]


@dataclass(frozen=True)
class GradientSet:
    """Loss gradients (G_1, ..., G_L), one per weight matrix."""

    grads: tuple[np.ndarray, ...]

    def squared_norm(self) -> float:
        """Squared Euclidean norm of the full stacked gradient."""
        return float(sum(np.sum(g * g) for g in self.grads))


def _check_params(arch: Architecture, params: Params) -> None:
    if params.depth != arch.depth:
        raise ValueError(f"expected {arch.depth} weight layers, got {params.depth}")
    for l, w in enumerate(params.weights, start=1):
        want = (arch.widths[l - 1], arch.widths[l])
        if w.shape != want:
            raise ValueError(f"W_{l} has shape {w.shape}, expected {want}")


def _check_cache(arch: Architecture, cache: FeatureCache) -> None:
    if len(cache.features) != arch.depth + 1 or len(cache.preacts) != arch.depth - 1:
        raise ValueError("feature cache does not match the architecture")
    n = cache.features[0].shape[0]
    for l, f in enumerate(cache.features):
        if f.shape != (n, arch.widths[l]):
            raise ValueError(
                f"cached F_{l} has shape {f.shape}, expected {(n, arch.widths[l])}"
            )


def forward(arch: Architecture, params: Params, x) -> FeatureCache:
    """Run the network on x (one sample per row) and cache every layer."""
    _check_params(arch, params)
    x = linalg.as_matrix(x, "x")
    if x.shape[1] != arch.widths[0]:
        raise ValueError(f"x has {x.shape[1]} columns, expected {arch.widths[0]}")
    features = [x]
    preacts = []
    current = x
    for l, w in enumerate(params.weights, start=1):
        z = current @ w
        if l < arch.depth:
            preacts.append(z)
            current = np.maximum(z, 0.0)
        else:
            current = z
        features.append(current)
    return FeatureCache(features=tuple(features), preacts=tuple(preacts))


def loss(cache: FeatureCache, y) -> float:
    """Half squared Frobenius distance between the network output and y."""
    y = linalg.as_matrix(y, "y")
    out = cache.output
    if y.shape != out.shape:
        raise ValueError(f"y has shape {y.shape}, output has shape {out.shape}")
    diff = out - y
    return float(0.5 * np.sum(diff * diff))


def gradients(arch: Architecture, params: Params, cache: FeatureCache, y) -> GradientSet:
    """Exact backpropagated gradients of the square loss.

    Uses the convention relu'(0) = 0. The output-layer gradient is exactly
    F_{L-1}.T @ (F_L - Y).
    """
    _check_params(arch, params)
    _check_cache(arch, cache)
    y = linalg.as_matrix(y, "y")
    if y.shape != cache.output.shape:
        raise ValueError(f"y has shape {y.shape}, output has shape {cache.output.shape}")
    depth = arch.depth
    delta = cache.output - y
    grads: list[np.ndarray] = [np.empty(0)] * depth
    for l in range(depth, 0, -1):
        grads[l - 1] = cache.features[l - 1].T @ delta
        if l > 1:
            delta = (delta @ params.weights[l - 1].T) * (cache.preacts[l - 2] > 0.0)
    return GradientSet(tuple(grads))


def jacobian_block(arch: Architecture, params: Params, cache: FeatureCache, layer: int) -> np.ndarray:
    """Jacobian of the vectorized output with respect to vec(W_layer).

    Vectorization stacks matrix columns, so the returned block has
    N * nL rows indexed by (output unit, sample) with the sample index fastest,
    and n_{layer-1} * n_layer columns indexed the same way over W_layer.
    """
    _check_params(arch, params)
    _check_cache(arch, cache)
    depth = arch.depth
    if not 1 <= layer <= depth:
        raise ValueError(f"layer must be in [1, {depth}], got {layer}")
    n = cache.features[0].shape[0]
    n_out = arch.widths[-1]
    f_prev = cache.features[layer - 1]
    if layer == depth:
        block = np.einsum("ia,jb->jiba", f_prev, np.eye(n_out))
    else:
        # per-sample propagation of a unit perturbation from `layer` to the output
        carry = np.broadcast_to(
            params.weights[depth - 1], (n,) + params.weights[depth - 1].shape
        )
        for p in range(depth - 1, layer, -1):
            mask = (cache.preacts[p - 1] > 0.0).astype(np.float64)
            carry = np.einsum("ab,ibo->iao", params.weights[p - 1], mask[:, :, None] * carry)
        gate = (cache.preacts[layer - 1] > 0.0).astype(np.float64)
        block = np.einsum("ia,ib,ibj->jiba", f_prev, gate, carry)
    cols = arch.widths[layer - 1] * arch.widths[layer]
    return np.ascontiguousarray(block.reshape(n * n_out, cols))
