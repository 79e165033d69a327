"""Synthetic data generation and weight initialization schemes.

Randomness is organized into named substreams of a single 64-bit master seed
(one substream per purpose and per layer), so adding layers or drawing the
labels never perturbs earlier draws. Everything is bit-reproducible from
(dimensions, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Architecture, Params

__all__ = [
    "Dataset",
    "InitScheme",
    "substream",
    "generate_sphere_data",
    "init_lecun",
    "init_lecun_deep",
    "init_scaled",
]

# substream domains: keep these stable, they define the reproducibility contract
DOMAIN_DATA = 0
DOMAIN_WEIGHTS = 1
DOMAIN_KERNEL = 2
DOMAIN_TRIALS = 3


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator of ``seed`` addressed by integer key."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class Dataset:
    """Training inputs and targets, one sample per row.

    Rows of x sit on the sphere of radius sqrt(n0); rows of y are unit norm.
    """

    x: np.ndarray
    y: np.ndarray
    seed: int

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def n_in(self) -> int:
        return self.x.shape[1]

    @property
    def n_out(self) -> int:
        return self.y.shape[1]


@dataclass(frozen=True)
class InitScheme:
    """Which initializer to use.

    kind is one of "lecun", "lecun_deep" or "scaled". ``scale`` applies to the
    scaled scheme only; None means "search for the smallest certified scale".
    ``output_exponent`` is the output-layer variance exponent of lecun_deep
    (variance n_{L-1} ** -output_exponent) and must exceed 1.
    """

    kind: str
    scale: float | None = None
    output_exponent: float = 4.0 / 3.0

    def __post_init__(self):
        if self.kind not in ("lecun", "lecun_deep", "scaled"):
            raise ValueError(f"unknown init scheme {self.kind!r}")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "lecun_deep" and not self.output_exponent > 1:
            raise ValueError("output_exponent must exceed 1")


def _sphere_rows(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    rows = rng.standard_normal((n, dim))
    norms = np.linalg.norm(rows, axis=1)
    while np.any(norms == 0.0):  # measure zero, but keep the map total
        bad = norms == 0.0
        rows[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(rows, axis=1)
    return rows / norms[:, None] * radius


def generate_sphere_data(n: int, n0: int, n_out: int, seed: int) -> Dataset:
    """Inputs uniform on the radius-sqrt(n0) sphere, unit-sphere targets."""
    if min(n, n0, n_out) < 1:
        raise ValueError("n, n0 and n_out must all be >= 1")
    x = _sphere_rows(substream(seed, DOMAIN_DATA, 0), n, n0, float(np.sqrt(n0)))
    y = _sphere_rows(substream(seed, DOMAIN_DATA, 1), n, n_out, 1.0)
    return Dataset(x=x, y=y, seed=int(seed))


def init_lecun(arch: Architecture, seed: int) -> Params:
    """Independent Gaussian weights with variance 1/fan-in at every layer."""
    weights = []
    for l in range(1, arch.depth + 1):
        fan_in = arch.widths[l - 1]
        rng = substream(seed, DOMAIN_WEIGHTS, l)
        weights.append(rng.standard_normal((fan_in, arch.widths[l])) / np.sqrt(fan_in))
    return Params(tuple(weights))


def init_lecun_deep(arch: Architecture, seed: int, output_exponent: float = 4.0 / 3.0) -> Params:
    """1/fan-in Gaussians up to the last hidden layer, smaller output variance.

    The output layer gets variance n_{L-1} ** -output_exponent. Hidden layers
    share their substreams with init_lecun, so they are identical draws.
    """
    if arch.depth < 2:
        raise ValueError("lecun_deep needs at least two weight layers")
    if not output_exponent > 1:
        raise ValueError("output_exponent must exceed 1")
    base = init_lecun(arch, seed)
    n_prev = arch.widths[-2]
    rng = substream(seed, DOMAIN_WEIGHTS, arch.depth)
    out = rng.standard_normal((n_prev, arch.widths[-1])) * n_prev ** (-0.5 * output_exponent)
    return Params(base.weights[:-1] + (out,))


def init_scaled(arch: Architecture, seed: int, scale: float) -> Params:
    """Scaled 1/fan-in hidden layers with an exactly zero output layer.

    scale = 1 reproduces the base hidden draws. The zero output layer pins the
    initial loss to half the squared target norm.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    base = init_lecun(arch, seed)
    weights = [scale * w for w in base.weights[:-1]]
    weights.append(np.zeros_like(base.weights[-1]))
    return Params(tuple(weights))
