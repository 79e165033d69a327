"""Global-convergence certificate for full-batch gradient descent.

A certificate is computed from the data and the initial weights alone. It
collects the smallest singular value of the last hidden layer's features, a
per-layer spectral-norm budget (initial operator norm plus an allowance), the
three sufficient initialization conditions, and the learning-rate bound. When
all conditions hold and the step size is below the bound, training is
guaranteed to contract the loss geometrically, and the trainer can audit every
step of that guarantee.

Both sides of every inequality are stored so a failed certificate shows which
condition failed and by what ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .initializers import DOMAIN_KERNEL, Dataset, substream
from .network import Architecture, Params, forward, loss

__all__ = [
    "Certificate",
    "LambdaStarEstimate",
    "ScaleSearchError",
    "allowance_schedule",
    "compute_certificate",
    "suggest_lr",
    "search_init_scale",
    "estimate_lambda_star",
]

DEFAULT_LR_SAFETY = 0.9


class ScaleSearchError(RuntimeError):
    """The init-scale search exceeded its cap without certifying."""


@dataclass(frozen=True)
class Certificate:
    """Everything needed to decide and audit certified convergence.

    budgets[l] is the spectral-norm budget of layer l+1 (initial operator norm
    plus allowance); svmin_init is the smallest singular value of the last
    hidden layer's features at initialization; decay is the per-step loss
    contraction factor 1 - lr * svmin_init**2 / 8.
    """

    widths: tuple[int, ...]
    n_samples: int
    allowances: tuple[float, ...]
    weight_norms: tuple[float, ...]
    budgets: tuple[float, ...]
    svmin_init: float
    initial_loss: float
    x_norm: float
    cond_weights: bool
    cond_weights_lhs: float
    cond_weights_rhs: float
    cond_features: bool
    cond_features_lhs: float
    cond_features_rhs: float
    cond_stability: bool
    cond_stability_lhs: float
    cond_stability_rhs: float
    lr_max: float
    lr: float
    decay: float
    width_ok: bool
    certified: bool
    reason: str

    @property
    def depth(self) -> int:
        return len(self.budgets)

    def budget_prod(self, i: int, j: int) -> float:
        """Product of budgets for layers i..j inclusive (1-based)."""
        if not 1 <= i <= j <= self.depth:
            raise ValueError(f"bad budget range ({i}, {j}) for depth {self.depth}")
        return float(np.prod([self.budgets[l] for l in range(i - 1, j)]))

    def q_move(self) -> float:
        """Coefficient bounding the per-step movement of the network output."""
        total = sum(b ** -2.0 for b in self.budgets)
        return self.x_norm ** 2 * self.budget_prod(1, self.depth) ** 2 * total

    def q_cross(self) -> float:
        """Coefficient bounding the cross term of the per-step loss split."""
        if self.depth == 1:
            return 0.0
        hidden = sum(b ** -2.0 for b in self.budgets[:-1])
        return (
            self.x_norm ** 2
            * self.budget_prod(1, self.depth - 1) ** 2
            * self.budgets[-1] ** 2
            * hidden
        )

    def to_report(self) -> str:
        def fmt(v) -> str:
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return repr(v)
            if isinstance(v, tuple):
                return " ".join(fmt(item) for item in v)
            return str(v)

        pairs = [
            ("samples", self.n_samples),
            ("widths", self.widths),
            ("allowances", self.allowances),
            ("weight_norms", self.weight_norms),
            ("budgets", self.budgets),
            ("svmin_init", self.svmin_init),
            ("initial_loss", self.initial_loss),
            ("x_norm", self.x_norm),
            ("cond_weights", self.cond_weights),
            ("cond_weights_lhs", self.cond_weights_lhs),
            ("cond_weights_rhs", self.cond_weights_rhs),
            ("cond_features", self.cond_features),
            ("cond_features_lhs", self.cond_features_lhs),
            ("cond_features_rhs", self.cond_features_rhs),
            ("cond_stability", self.cond_stability),
            ("cond_stability_lhs", self.cond_stability_lhs),
            ("cond_stability_rhs", self.cond_stability_rhs),
            ("q_move", self.q_move()),
            ("q_cross", self.q_cross()),
            ("lr_max", self.lr_max),
            ("lr", self.lr),
            ("decay", self.decay),
            ("width_ok", self.width_ok),
            ("certified", self.certified),
            ("reason", self.reason),
        ]
        lines = ["relucert-certificate 1"]
        lines += [f"{key} = {fmt(value)}" for key, value in pairs]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LambdaStarEstimate:
    """Monte-Carlo estimate of the smallest eigenvalue of the expected
    single-neuron feature Gram matrix E[relu(Xw) relu(Xw).T]."""

    value: float
    samples: int
    note: str


def parse_report(text: str) -> dict[str, str]:
    """Inverse of Certificate.to_report at the string level (for tooling)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("relucert-certificate"):
        raise ValueError("not a certificate report")
    out: dict[str, str] = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


def allowance_schedule(name: str, widths) -> tuple[float, ...]:
    """Named allowance sequences.

    "ones" gives 1 for every layer. "lecun_deep" gives 1 for the inner layers,
    sqrt(n_{L-1}) for the last hidden layer and n_{L-1} ** (-1/6) for the
    output layer (for depth 2 only the last two entries remain).
    """
    depth = len(widths) - 1
    if depth < 1:
        raise ValueError("widths must describe at least one layer")
    if name == "ones":
        return (1.0,) * depth
    if name == "lecun_deep":
        if depth < 2:
            raise ValueError("lecun_deep schedule needs depth >= 2")
        n_last_hidden = float(widths[-2])
        inner = (1.0,) * (depth - 2)
        return inner + (n_last_hidden ** 0.5, n_last_hidden ** (-1.0 / 6.0))
    raise ValueError(f"unknown allowance schedule {name!r}")


def _condition_sides(svmin, budgets, allowances, x_norm, sqrt_two_loss0):
    """Both sides of the three initialization conditions."""
    depth = len(budgets)
    prod_all = float(np.prod(budgets))
    peak = max(prod_all / (budgets[l] * allowances[l]) for l in range(depth))
    w_lhs = svmin ** 2
    w_rhs = 16.0 * x_norm * peak * sqrt_two_loss0
    if depth == 1:
        hidden_sum = 0.0
    else:
        prod_hidden = float(np.prod(budgets[:-1]))
        hidden_sum = sum(prod_hidden ** 2 / budgets[l] ** 2 for l in range(depth - 1))
    f_lhs = svmin ** 3
    f_rhs = 32.0 * x_norm ** 2 * budgets[-1] * hidden_sum * sqrt_two_loss0
    s_lhs = svmin ** 2
    s_rhs = 16.0 * x_norm ** 2 * budgets[-1] ** 2 * hidden_sum
    return (w_lhs, w_rhs), (f_lhs, f_rhs), (s_lhs, s_rhs)


def _lr_bound(svmin: float, budgets, x_norm: float) -> float:
    depth = len(budgets)
    first = math.inf if svmin == 0.0 else 8.0 / svmin ** 2
    if depth == 1:
        second = 0.0
    else:
        prod_all = float(np.prod(budgets))
        hidden = sum(b ** -2.0 for b in budgets[:-1])
        total = sum(b ** -2.0 for b in budgets)
        second = hidden / (x_norm ** 2 * prod_all ** 2 * total ** 2)
    return min(first, second)


def compute_certificate(
    arch: Architecture,
    params: Params,
    dataset: Dataset,
    allowances=None,
    lr: float | None = None,
    lr_safety: float = DEFAULT_LR_SAFETY,
) -> Certificate:
    """Evaluate the certificate for the given initialization.

    allowances defaults to all ones. lr = None picks lr_safety * lr_max when
    the bound is finite and positive (so the strict inequality always holds),
    otherwise 0, which leaves the run uncertified.
    """
    depth = arch.depth
    if allowances is None:
        allowances = (1.0,) * depth
    allowances = tuple(float(c) for c in allowances)
    if len(allowances) != depth:
        raise ValueError(f"need {depth} allowances, got {len(allowances)}")
    if any(not c > 0 for c in allowances):
        raise ValueError("all allowances must be positive")
    if lr is not None and not lr > 0:
        raise ValueError("lr must be positive")

    cache = forward(arch, params, dataset.x)
    initial_loss = loss(cache, dataset.y)
    x_norm = linalg.frobenius_norm(dataset.x)
    weight_norms = tuple(linalg.spectral_norm(w) for w in params.weights)
    budgets = tuple(wn + c for wn, c in zip(weight_norms, allowances))

    n = dataset.n_samples
    width_ok = arch.widths[-2] >= n
    svmin = linalg.smallest_singular_value(cache.features[depth - 1]) if width_ok else 0.0

    sqrt_two_loss0 = math.sqrt(2.0 * initial_loss)
    (w_lhs, w_rhs), (f_lhs, f_rhs), (s_lhs, s_rhs) = _condition_sides(
        svmin, budgets, allowances, x_norm, sqrt_two_loss0
    )
    cond_w = w_lhs >= w_rhs
    cond_f = f_lhs >= f_rhs
    cond_s = s_lhs >= s_rhs

    lr_max = _lr_bound(svmin, budgets, x_norm)
    if lr is None:
        lr = lr_safety * lr_max if math.isfinite(lr_max) and lr_max > 0 else 0.0
    lr = float(lr)
    lr_ok = 0.0 < lr < lr_max
    decay = 1.0 - lr * svmin ** 2 / 8.0

    certified = cond_w and cond_f and cond_s and lr_ok and width_ok
    if certified:
        reason = ""
    elif not width_ok:
        reason = f"last hidden width {arch.widths[-2]} is below the sample count {n}"
    elif not (cond_w and cond_f and cond_s):
        failing = [
            name
            for name, ok in [
                ("weights", cond_w),
                ("features", cond_f),
                ("stability", cond_s),
            ]
            if not ok
        ]
        reason = "condition(s) failed: " + ", ".join(failing)
    else:
        reason = f"learning rate {lr!r} is not strictly below the bound {lr_max!r}"

    return Certificate(
        widths=arch.widths,
        n_samples=n,
        allowances=allowances,
        weight_norms=weight_norms,
        budgets=budgets,
        svmin_init=float(svmin),
        initial_loss=float(initial_loss),
        x_norm=float(x_norm),
        cond_weights=cond_w,
        cond_weights_lhs=float(w_lhs),
        cond_weights_rhs=float(w_rhs),
        cond_features=cond_f,
        cond_features_lhs=float(f_lhs),
        cond_features_rhs=float(f_rhs),
        cond_stability=cond_s,
        cond_stability_lhs=float(s_lhs),
        cond_stability_rhs=float(s_rhs),
        lr_max=float(lr_max),
        lr=lr,
        decay=float(decay),
        width_ok=width_ok,
        certified=certified,
        reason=reason,
    )


def suggest_lr(cert: Certificate, safety: float = DEFAULT_LR_SAFETY) -> float:
    """A strictly admissible learning rate: safety * lr_max."""
    if not 0.0 < safety < 1.0:
        raise ValueError("safety must lie strictly between 0 and 1")
    if not (math.isfinite(cert.lr_max) and cert.lr_max > 0):
        raise ValueError(f"learning-rate bound {cert.lr_max!r} admits no step size")
    return safety * cert.lr_max


def search_init_scale(
    arch: Architecture,
    base_params: Params,
    dataset: Dataset,
    allowances=None,
    cap: float = 1e12,
) -> float:
    """Smallest hidden-layer scale (to 1% relative) certifying the scaled init.

    The scaled init multiplies the base hidden weights by the scale and zeros
    the output layer. ReLU homogeneity makes every certified quantity a closed
    form in the scale: the feature smallest singular value scales with
    scale ** (depth - 1), each hidden budget is scale * norm + allowance, and
    the initial loss stays at half the squared target norm. The search probes
    those closed forms only; no forward passes are repeated.

    Uses doubling from 1 followed by geometric bisection. Raises
    ScaleSearchError if the doubling phase exceeds ``cap``.
    """
    depth = arch.depth
    if allowances is None:
        allowances = (1.0,) * depth
    allowances = tuple(float(c) for c in allowances)
    if len(allowances) != depth or any(not c > 0 for c in allowances):
        raise ValueError("allowances must be positive and one per layer")

    cache = forward(arch, base_params, dataset.x)
    if arch.widths[-2] < dataset.n_samples:
        raise ValueError(
            f"last hidden width {arch.widths[-2]} is below the sample count "
            f"{dataset.n_samples}; no scale can certify"
        )
    svmin_base = linalg.smallest_singular_value(cache.features[depth - 1])
    if not svmin_base > 0.0:
        raise ValueError("base init has a singular last-hidden feature matrix")
    hidden_norms = [linalg.spectral_norm(w) for w in base_params.weights[:-1]]
    x_norm = linalg.frobenius_norm(dataset.x)
    y_norm = linalg.frobenius_norm(dataset.y)  # sqrt(2 * initial loss): zero output layer

    def satisfied(scale: float) -> bool:
        svmin = scale ** (depth - 1) * svmin_base
        budgets = tuple(scale * wn + c for wn, c in zip(hidden_norms, allowances[:-1]))
        budgets += (allowances[-1],)
        (w_lhs, w_rhs), (f_lhs, f_rhs), (s_lhs, s_rhs) = _condition_sides(
            svmin, budgets, allowances, x_norm, y_norm
        )
        return w_lhs >= w_rhs and f_lhs >= f_rhs and s_lhs >= s_rhs

    if satisfied(1.0):
        return 1.0
    lo, hi = 1.0, 2.0
    while not satisfied(hi):
        lo = hi
        hi *= 2.0
        if hi > cap:
            raise ScaleSearchError(f"no certifying scale found below the cap {cap!r}")
    while hi > 1.01 * lo:
        mid = math.sqrt(lo * hi)
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def estimate_lambda_star(x, samples: int = 2000, seed: int = 0) -> LambdaStarEstimate:
    """Monte-Carlo smallest eigenvalue of E[relu(Xw) relu(Xw).T].

    w is drawn Gaussian with variance 1/n0 per coordinate over ``samples``
    i.i.d. draws; the average Gram matrix is then passed to the symmetric
    eigensolver. This is a diagnostic quantity: it calibrates how wide the
    last hidden layer must be before its feature matrix is well conditioned.
    """
    x = linalg.as_matrix(x, "x")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n0 = x.shape[1]
    rng = substream(seed, DOMAIN_KERNEL, 0)
    draws = rng.standard_normal((n0, samples)) / np.sqrt(n0)
    feats = np.maximum(x @ draws, 0.0)
    gram = (feats @ feats.T) / samples
    value = max(linalg.sym_eig_min(gram), 0.0)
    return LambdaStarEstimate(
        value=float(value),
        samples=int(samples),
        note=f"monte-carlo average of {samples} single-neuron feature Grams",
    )
