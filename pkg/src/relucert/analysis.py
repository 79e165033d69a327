"""Empirical verification suites for the structural inequalities.

Three families of checks, all driven by seeded random trials:

* tangent-kernel checks: the kernel assembled from the per-layer output
  Jacobian blocks is PSD, its minimum eigenvalue dominates that of the last
  hidden layer's feature Gram, and the gradient norm satisfies the
  Lojasiewicz-style lower bound 2 * lambda_min(K) * loss;
* layer-gradient norm bounds: each layer gradient is controlled by the data
  norm, the other layers' operator norms, and the residual norm;
* feature-shift bounds: moving the weights moves every layer's features at
  most proportionally to the per-layer operator-norm gaps.

These inequalities are proven facts; a violation (beyond float round-off
slack) indicates an implementation bug, which is exactly what makes the
suites useful as self-tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .certificate import compute_certificate
from .initializers import DOMAIN_TRIALS, Dataset, substream
from .network import Architecture, Params, forward, gradients, jacobian_block, loss
from .trainer import descent_audit, gd_step

__all__ = [
    "TrialDims",
    "BoundCheck",
    "NtkReport",
    "random_problem",
    "assemble_ntk",
    "check_ntk_bound",
    "check_gradient_norm_bound",
    "check_feature_lipschitz_bound",
    "check_descent_identity",
]

REL_SLACK_PROVEN = 1e-9
REL_SLACK_EIG = 1e-8
NTK_MAX_ROWS = 4096


@dataclass(frozen=True)
class TrialDims:
    """Size ranges for random trials (kept moderate so the dense oracles and
    eigensolvers stay fast)."""

    depths: tuple[int, ...] = (1, 2, 3, 4)
    max_samples: int = 16
    max_width: int = 64
    max_outputs: int = 2


@dataclass(frozen=True)
class BoundCheck:
    """One inequality instance: lhs <= rhs up to relative round-off slack.

    ``index`` is the layer for per-layer bounds and the step for per-step
    identity checks.
    """

    trial: int
    depth: int
    widths: tuple[int, ...]
    index: int
    lhs: float
    rhs: float
    margin: float
    ok: bool


@dataclass(frozen=True)
class NtkReport:
    """Eigenvalue and gradient-bound summary for one network and dataset."""

    k_min_eig: float
    gram_min_eig: float
    block_traces: tuple[float, ...]
    pl_lhs: float
    pl_rhs: float
    psd_ok: bool
    eig_bound_ok: bool
    pl_ok: bool
    width_ok: bool


def assemble_ntk(arch: Architecture, params: Params, x, max_rows: int = NTK_MAX_ROWS) -> np.ndarray:
    """Tangent kernel K = sum_l B_l B_l.T from the per-layer Jacobian blocks.

    K has N * nL rows; the guard rejects sizes that should not be
    materialized densely.
    """
    x = linalg.as_matrix(x, "x")
    rows = x.shape[0] * arch.widths[-1]
    if rows > max_rows:
        raise ValueError(
            f"kernel would have {rows} rows (> {max_rows}); "
            "reduce samples/outputs or raise max_rows"
        )
    cache = forward(arch, params, x)
    kernel = np.zeros((rows, rows))
    for layer in range(1, arch.depth + 1):
        block = jacobian_block(arch, params, cache, layer)
        kernel += block @ block.T
    return kernel


def check_ntk_bound(arch: Architecture, params: Params, dataset: Dataset) -> NtkReport:
    """Evaluate the kernel eigenvalue bound and the gradient lower bound."""
    cache = forward(arch, params, dataset.x)
    kernel = np.zeros((dataset.n_samples * arch.widths[-1],) * 2)
    traces = []
    for layer in range(1, arch.depth + 1):
        block = jacobian_block(arch, params, cache, layer)
        kernel += block @ block.T
        traces.append(float(np.sum(block * block)))
    k_min = linalg.sym_eig_min(kernel)
    feats = cache.features[arch.depth - 1]
    gram_min = linalg.sym_eig_min(feats @ feats.T)
    phi = loss(cache, dataset.y)
    grads = gradients(arch, params, cache, dataset.y)
    pl_lhs = grads.squared_norm()
    pl_rhs = 2.0 * k_min * phi
    return NtkReport(
        k_min_eig=float(k_min),
        gram_min_eig=float(gram_min),
        block_traces=tuple(traces),
        pl_lhs=float(pl_lhs),
        pl_rhs=float(pl_rhs),
        psd_ok=k_min >= -REL_SLACK_EIG * linalg.frobenius_norm(kernel),
        eig_bound_ok=k_min >= gram_min - REL_SLACK_EIG * (1.0 + abs(k_min)),
        pl_ok=pl_lhs >= pl_rhs - REL_SLACK_EIG * (1.0 + pl_lhs),
        width_ok=arch.widths[-2] >= dataset.n_samples,
    )


def _random_arch(rng: np.random.Generator, dims: TrialDims) -> Architecture:
    depth = int(rng.choice(dims.depths))
    widths = [int(rng.integers(2, dims.max_width + 1)) for _ in range(depth)]
    widths.append(int(rng.integers(1, dims.max_outputs + 1)))
    return Architecture(tuple(widths))


def _random_params(rng: np.random.Generator, arch: Architecture) -> Params:
    weights = []
    for l in range(1, arch.depth + 1):
        fan_in = arch.widths[l - 1]
        weights.append(rng.standard_normal((fan_in, arch.widths[l])) / np.sqrt(fan_in))
    return Params(tuple(weights))


def random_problem(rng: np.random.Generator, dims: TrialDims):
    """Random (architecture, params, x, y) with 1/fan-in weight scaling."""
    arch = _random_arch(rng, dims)
    params = _random_params(rng, arch)
    n = int(rng.integers(2, dims.max_samples + 1))
    x = rng.standard_normal((n, arch.widths[0]))
    y = rng.standard_normal((n, arch.widths[-1]))
    return arch, params, x, y


def check_gradient_norm_bound(trials: int, dims: TrialDims | None = None, seed: int = 0):
    """Layer-gradient norms against their product-of-operator-norm bound."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dims = dims or TrialDims()
    checks: list[BoundCheck] = []
    for trial in range(trials):
        rng = substream(seed, DOMAIN_TRIALS, 0, trial)
        arch, params, x, y = random_problem(rng, dims)
        cache = forward(arch, params, x)
        grads = gradients(arch, params, cache, y)
        x_norm = linalg.frobenius_norm(x)
        res_norm = linalg.frobenius_norm(cache.output - y)
        op_norms = [linalg.spectral_norm(w) for w in params.weights]
        for layer in range(1, arch.depth + 1):
            others = np.prod([op_norms[p] for p in range(arch.depth) if p != layer - 1])
            lhs = linalg.frobenius_norm(grads.grads[layer - 1])
            rhs = x_norm * float(others) * res_norm
            margin = rhs - lhs
            checks.append(
                BoundCheck(
                    trial=trial,
                    depth=arch.depth,
                    widths=arch.widths,
                    index=layer,
                    lhs=lhs,
                    rhs=rhs,
                    margin=margin,
                    ok=margin >= -REL_SLACK_PROVEN * (1.0 + rhs),
                )
            )
    return checks


def check_feature_lipschitz_bound(trials: int, dims: TrialDims | None = None, seed: int = 0):
    """Feature movement between two weight settings against its bound.

    For each layer l, the feature shift is bounded by the data norm times the
    product of the per-layer operator-norm caps (max over the pair) times the
    cap-weighted sum of the per-layer weight gaps, taken over layers 1..l.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dims = dims or TrialDims()
    checks: list[BoundCheck] = []
    for trial in range(trials):
        rng = substream(seed, DOMAIN_TRIALS, 1, trial)
        arch, params_a, x, _ = random_problem(rng, dims)
        params_b = _random_params(rng, arch)
        cache_a = forward(arch, params_a, x)
        cache_b = forward(arch, params_b, x)
        x_norm = linalg.frobenius_norm(x)
        caps = [
            max(linalg.spectral_norm(wa), linalg.spectral_norm(wb))
            for wa, wb in zip(params_a.weights, params_b.weights)
        ]
        gaps = [
            linalg.spectral_norm(wa - wb)
            for wa, wb in zip(params_a.weights, params_b.weights)
        ]
        for layer in range(1, arch.depth + 1):
            lhs = linalg.frobenius_norm(cache_a.features[layer] - cache_b.features[layer])
            prod = float(np.prod(caps[:layer]))
            weighted = sum(
                gaps[p] / caps[p] for p in range(layer) if caps[p] > 0.0
            )
            rhs = x_norm * prod * weighted
            margin = rhs - lhs
            checks.append(
                BoundCheck(
                    trial=trial,
                    depth=arch.depth,
                    widths=arch.widths,
                    index=layer,
                    lhs=lhs,
                    rhs=rhs,
                    margin=margin,
                    ok=margin >= -REL_SLACK_PROVEN * (1.0 + rhs),
                )
            )
    return checks


def check_descent_identity(trials: int, dims: TrialDims | None = None, seed: int = 0, steps: int = 2):
    """Exact per-step loss-split identity on random (uncertified) runs.

    The identity residual must stay below 1e-9 * (1 + 2 * loss) regardless of
    the learning rate or certification status.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    dims = dims or TrialDims()
    checks: list[BoundCheck] = []
    for trial in range(trials):
        rng = substream(seed, DOMAIN_TRIALS, 2, trial)
        arch, params, x, y = random_problem(rng, dims)
        dataset = Dataset(x=x, y=y, seed=seed)
        lr = float(10.0 ** rng.uniform(-4.0, -1.0))
        cert = compute_certificate(arch, params, dataset, lr=lr)
        for step in range(steps):
            new_params, _ = gd_step(arch, params, dataset, lr)
            audit = descent_audit(arch, params, new_params, dataset, cert, lr=lr)
            tol = REL_SLACK_PROVEN * (1.0 + 2.0 * loss(forward(arch, params, x), y))
            checks.append(
                BoundCheck(
                    trial=trial,
                    depth=arch.depth,
                    widths=arch.widths,
                    index=step,
                    lhs=audit.identity_residual,
                    rhs=tol,
                    margin=tol - audit.identity_residual,
                    ok=audit.identity_ok,
                )
            )
            params = new_params
    return checks
