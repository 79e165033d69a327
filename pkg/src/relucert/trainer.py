"""Full-batch gradient descent with per-iteration certificate auditing.

The trainer can check, at every iterate, the three invariants that certified
convergence maintains: per-layer operator norms staying within their budgets,
the last hidden layer's smallest singular value staying above half its initial
value, and the loss staying under the geometric envelope. It can also audit
the exact per-step split of the loss change into a movement term, a cross
term and a descent term, together with the three bounds that control them.

Invariant violations under a valid certificate are falsification events: they
are counted and recorded, and the run continues so the trace can be inspected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .certificate import Certificate, compute_certificate
from .initializers import Dataset
from .network import Architecture, GradientSet, Params, forward, gradients, loss

__all__ = [
    "DivergenceError",
    "IterationRecord",
    "DescentAudit",
    "TrainTrace",
    "gd_step",
    "descent_audit",
    "train",
]

REL_SLACK = 1e-9

_ITER_FIELDS = [
    "k",
    "loss",
    "envelope",
    "svmin",
    "weight_norms",
    "weight_drifts",
    "grad_norms",
    "inv_weight_budgets",
    "inv_feature_floor",
    "inv_envelope",
]


class DivergenceError(RuntimeError):
    """Training produced non-finite gradients or iterates."""


@dataclass(frozen=True)
class IterationRecord:
    """One audited iterate: loss, envelope, norms and the invariant flags."""

    k: int
    loss: float
    envelope: float
    svmin: float | None
    weight_norms: tuple[float, ...]
    weight_drifts: tuple[float, ...]
    grad_norms: tuple[float, ...]
    inv_weight_budgets: bool
    inv_feature_floor: bool
    inv_envelope: bool

    @property
    def all_invariants(self) -> bool:
        return self.inv_weight_budgets and self.inv_feature_floor and self.inv_envelope


@dataclass(frozen=True)
class DescentAudit:
    """Exact split of one step's loss change plus the three controlling bounds.

    The identity 2*loss(k+1) = 2*loss(k) + term_move + term_cross +
    term_descent holds up to round-off for every step of every run; the bounds
    (move_rhs on sqrt(term_move), cross_rhs on term_cross / 2, descent_rhs on
    term_descent / 2) are what a valid certificate guarantees, the last one
    only while the feature floor holds.
    """

    q_move: float
    q_cross: float
    term_move: float
    term_cross: float
    term_descent: float
    identity_residual: float
    identity_ok: bool
    move_rhs: float
    cross_rhs: float
    descent_rhs: float
    move_ok: bool
    cross_ok: bool
    descent_ok: bool
    floor_held: bool
    k: int = -1

    @property
    def bounds_ok(self) -> bool:
        return self.move_ok and self.cross_ok and (self.descent_ok or not self.floor_held)


@dataclass
class TrainTrace:
    """Everything a run produced: records, audits and the summary."""

    certificate: Certificate
    lr: float
    target_loss: float
    records: list[IterationRecord] = field(default_factory=list)
    descents: list[DescentAudit] = field(default_factory=list)
    iterations: int = 0
    final_loss: float = float("nan")
    target_reached: bool = False
    violations: int = 0

    @property
    def decay(self) -> float:
        return 1.0 - self.lr * self.certificate.svmin_init ** 2 / 8.0

    def summary(self) -> dict:
        return {
            "record": "summary",
            "iterations": self.iterations,
            "final_loss": self.final_loss,
            "target_loss": self.target_loss,
            "target_reached": self.target_reached,
            "certified": self.certificate.certified,
            "violations": self.violations,
            "lr": self.lr,
            "decay": self.decay,
            "svmin_init": self.certificate.svmin_init,
            "initial_loss": self.certificate.initial_loss,
        }

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "record": "header",
                    "format": "relucert-trace",
                    "version": 1,
                    "fields": _ITER_FIELDS,
                }
            )
        ]
        for rec in self.records:
            lines.append(
                json.dumps(
                    {
                        "record": "iter",
                        "k": rec.k,
                        "loss": rec.loss,
                        "envelope": rec.envelope,
                        "svmin": rec.svmin,
                        "weight_norms": list(rec.weight_norms),
                        "weight_drifts": list(rec.weight_drifts),
                        "grad_norms": list(rec.grad_norms),
                        "inv_weight_budgets": rec.inv_weight_budgets,
                        "inv_feature_floor": rec.inv_feature_floor,
                        "inv_envelope": rec.inv_envelope,
                    }
                )
            )
        for aud in self.descents:
            lines.append(
                json.dumps(
                    {
                        "record": "descent",
                        "k": aud.k,
                        "q_move": aud.q_move,
                        "q_cross": aud.q_cross,
                        "term_move": aud.term_move,
                        "term_cross": aud.term_cross,
                        "term_descent": aud.term_descent,
                        "identity_residual": aud.identity_residual,
                        "identity_ok": aud.identity_ok,
                        "move_rhs": aud.move_rhs,
                        "cross_rhs": aud.cross_rhs,
                        "descent_rhs": aud.descent_rhs,
                        "move_ok": aud.move_ok,
                        "cross_ok": aud.cross_ok,
                        "descent_ok": aud.descent_ok,
                        "floor_held": aud.floor_held,
                    }
                )
            )
        lines.append(json.dumps(self.summary()))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as handle:
            handle.write(self.to_jsonl())


def _finite_grads(grads: GradientSet) -> bool:
    return all(np.isfinite(g).all() for g in grads.grads)


def gd_step(arch: Architecture, params: Params, dataset: Dataset, lr: float):
    """One full-batch step; every layer moves simultaneously.

    Returns (new params, the gradients used). Raises DivergenceError if any
    gradient entry is non-finite.
    """
    if not lr > 0:
        raise ValueError("lr must be positive")
    cache = forward(arch, params, dataset.x)
    grads = gradients(arch, params, cache, dataset.y)
    if not _finite_grads(grads):
        raise DivergenceError("non-finite gradient encountered")
    new_weights = tuple(w - lr * g for w, g in zip(params.weights, grads.grads))
    if not all(np.isfinite(w).all() for w in new_weights):
        raise DivergenceError("weights overflowed during the update")
    return Params(new_weights), grads


def descent_audit(
    arch: Architecture,
    params_k: Params,
    params_k1: Params,
    dataset: Dataset,
    cert: Certificate,
    lr: float | None = None,
) -> DescentAudit:
    """Audit one step params_k -> params_k1 (one gradient step apart).

    Splits the loss change around the transition output G = F_{L-1}(k) @
    W_L(k+1) and evaluates the three bounds that certify contraction.
    """
    lr = cert.lr if lr is None else float(lr)
    cache_k = forward(arch, params_k, dataset.x)
    cache_k1 = forward(arch, params_k1, dataset.x)
    out_k = cache_k.output
    out_k1 = cache_k1.output
    residual_k = out_k - dataset.y
    transition = cache_k.features[arch.depth - 1] @ params_k1.weights[-1]

    term_move = float(np.sum((out_k1 - out_k) ** 2))
    term_cross = float(2.0 * np.sum((out_k1 - transition) * residual_k))
    term_descent = float(2.0 * np.sum((transition - out_k) * residual_k))
    phi_k = float(0.5 * np.sum(residual_k ** 2))
    phi_k1 = loss(cache_k1, dataset.y)
    identity_residual = abs(
        2.0 * phi_k1 - 2.0 * phi_k - term_move - term_cross - term_descent
    )
    identity_ok = identity_residual <= REL_SLACK * (1.0 + 2.0 * phi_k)

    res_norm = float(np.sqrt(2.0 * phi_k))
    q_move = cert.q_move()
    q_cross = cert.q_cross()
    move_rhs = lr * q_move * res_norm
    cross_rhs = lr * q_cross * res_norm ** 2
    descent_rhs = -lr * (cert.svmin_init ** 2 / 4.0) * res_norm ** 2

    def held(lhs: float, rhs: float) -> bool:
        return lhs <= rhs + REL_SLACK * (1.0 + abs(rhs))

    feats_k = cache_k.features[arch.depth - 1]
    if feats_k.shape[0] <= feats_k.shape[1]:
        svmin_k = linalg.smallest_singular_value(feats_k)
        floor_held = svmin_k >= 0.5 * cert.svmin_init * (1.0 - REL_SLACK)
    else:
        floor_held = False

    return DescentAudit(
        q_move=q_move,
        q_cross=q_cross,
        term_move=term_move,
        term_cross=term_cross,
        term_descent=term_descent,
        identity_residual=float(identity_residual),
        identity_ok=identity_ok,
        move_rhs=float(move_rhs),
        cross_rhs=float(cross_rhs),
        descent_rhs=float(descent_rhs),
        move_ok=held(float(np.sqrt(term_move)), move_rhs),
        cross_ok=held(term_cross / 2.0, cross_rhs),
        descent_ok=held(term_descent / 2.0, descent_rhs),
        floor_held=floor_held,
    )


def _iteration_record(
    k: int,
    phi: float,
    cache,
    params: Params,
    params0: Params,
    grads: GradientSet,
    cert: Certificate,
    decay: float,
) -> IterationRecord:
    envelope = decay ** k * cert.initial_loss
    weight_norms = tuple(linalg.spectral_norm(w) for w in params.weights)
    weight_drifts = tuple(
        linalg.frobenius_norm(w - w0) for w, w0 in zip(params.weights, params0.weights)
    )
    grad_norms = tuple(linalg.frobenius_norm(g) for g in grads.grads)
    feats = cache.features[len(params.weights) - 1]
    svmin = (
        linalg.smallest_singular_value(feats) if feats.shape[0] <= feats.shape[1] else None
    )
    inv_weights = all(
        wn <= b * (1.0 + REL_SLACK) for wn, b in zip(weight_norms, cert.budgets)
    )
    floor = 0.5 * cert.svmin_init * (1.0 - REL_SLACK)
    inv_floor = (svmin if svmin is not None else 0.0) >= floor
    inv_envelope = phi <= envelope * (1.0 + REL_SLACK)
    return IterationRecord(
        k=k,
        loss=float(phi),
        envelope=float(envelope),
        svmin=svmin,
        weight_norms=weight_norms,
        weight_drifts=weight_drifts,
        grad_norms=grad_norms,
        inv_weight_budgets=inv_weights,
        inv_feature_floor=inv_floor,
        inv_envelope=inv_envelope,
    )


def train(
    arch: Architecture,
    params0: Params,
    dataset: Dataset,
    lr: float,
    max_iters: int = 10000,
    target_loss: float | None = None,
    certificate: Certificate | None = None,
    allowances=None,
    audit: bool = True,
    audit_stride: int = 1,
    audit_descent: bool = False,
) -> TrainTrace:
    """Run gradient descent until the loss target or the iteration cap.

    When ``audit`` is on, every ``audit_stride``-th iterate (plus the first and
    last) is recorded with the full invariant check. ``audit_descent`` adds the
    per-step loss-split audit for every step. A missing certificate is
    computed from ``allowances`` (default all ones) at this learning rate.
    """
    if not lr > 0:
        raise ValueError("lr must be positive")
    if audit_stride < 1:
        raise ValueError("audit_stride must be >= 1")
    if certificate is None:
        certificate = compute_certificate(arch, params0, dataset, allowances, lr=lr)
    decay = 1.0 - lr * certificate.svmin_init ** 2 / 8.0

    cache = forward(arch, params0, dataset.x)
    phi = loss(cache, dataset.y)
    if target_loss is None:
        target_loss = 1e-10 * phi
    trace = TrainTrace(certificate=certificate, lr=lr, target_loss=float(target_loss))

    params = params0
    k = 0
    while True:
        done = phi <= target_loss or k >= max_iters
        grads = gradients(arch, params, cache, dataset.y)
        if not _finite_grads(grads):
            raise DivergenceError(f"non-finite gradient at iteration {k}")
        if audit and (k % audit_stride == 0 or done):
            rec = _iteration_record(k, phi, cache, params, params0, grads, certificate, decay)
            trace.records.append(rec)
            if certificate.certified and not rec.all_invariants:
                trace.violations += 1
        if done:
            break
        new_weights = tuple(w - lr * g for w, g in zip(params.weights, grads.grads))
        if not all(np.isfinite(w).all() for w in new_weights):
            raise DivergenceError(f"weights overflowed at iteration {k}")
        new_params = Params(new_weights)
        if audit_descent:
            aud = descent_audit(arch, params, new_params, dataset, certificate, lr=lr)
            trace.descents.append(replace(aud, k=k))
        params = new_params
        cache = forward(arch, params, dataset.x)
        phi = loss(cache, dataset.y)
        if not np.isfinite(phi):
            raise DivergenceError(f"non-finite loss at iteration {k + 1}")
        k += 1

    trace.iterations = k
    trace.final_loss = float(phi)
    trace.target_reached = phi <= target_loss
    return trace
