"""Independent oracle implementations used only by the tests.

Everything here deliberately avoids the package's own kernels: matrix
products by triple loops, norms by compensated summation, eigenvalues by the
closed-form cubic, gradients by central finite differences on an independent
forward pass, and training by a self-contained reference loop.
"""

import math

import numpy as np


def matmul_triple_loop(a, b):
    rows, inner = a.shape
    cols = b.shape[1]
    out = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for k in range(inner):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def frobenius_fsum(a):
    return math.sqrt(math.fsum(float(v) * float(v) for v in a.ravel()))


def det3(a):
    return (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


def sym_eigvals_3x3(a):
    """Closed-form eigenvalues of a symmetric 3x3 matrix, ascending."""
    off_sq = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    q = (a[0, 0] + a[1, 1] + a[2, 2]) / 3.0
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2.0 * off_sq
    if p2 == 0.0:
        return np.array([q, q, q])
    p = math.sqrt(p2 / 6.0)
    b = (a - q * np.eye(3)) / p
    r = min(1.0, max(-1.0, det3(b) / 2.0))
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.array(sorted([lo, mid, hi]))


def ref_forward(weights, x):
    """Independent forward pass; returns (features, preacts)."""
    feats = [x]
    preacts = []
    h = x
    for i, w in enumerate(weights):
        z = h.dot(w)
        if i < len(weights) - 1:
            preacts.append(z)
            h = np.where(z > 0.0, z, 0.0)
        else:
            h = z
        feats.append(h)
    return feats, preacts


def ref_loss(weights, x, y):
    feats, _ = ref_forward(weights, x)
    r = feats[-1] - y
    return 0.5 * float((r * r).sum())


def fd_gradients(weights, x, y, step=1e-6):
    """Central finite differences of the loss in every weight entry."""
    grads = []
    for li, w in enumerate(weights):
        g = np.zeros_like(w)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                plus = [u.copy() for u in weights]
                plus[li][i, j] += step
                minus = [u.copy() for u in weights]
                minus[li][i, j] -= step
                g[i, j] = (ref_loss(plus, x, y) - ref_loss(minus, x, y)) / (2.0 * step)
        grads.append(g)
    return grads


def fd_output_jacobian(weights, x, step=1e-6):
    """Finite-difference Jacobian of the column-stacked output in every weight.

    Returns one block per layer with rows indexed like vec(output) (sample
    index fastest) and columns like vec(W_layer).
    """
    feats, _ = ref_forward(weights, x)
    out_size = feats[-1].size
    blocks = []
    for li, w in enumerate(weights):
        block = np.zeros((out_size, w.size))
        for j in range(w.shape[1]):
            for i in range(w.shape[0]):
                plus = [u.copy() for u in weights]
                plus[li][i, j] += step
                minus = [u.copy() for u in weights]
                minus[li][i, j] -= step
                fp, _ = ref_forward(plus, x)
                fm, _ = ref_forward(minus, x)
                col = (fp[-1] - fm[-1]) / (2.0 * step)
                block[:, j * w.shape[0] + i] = col.flatten(order="F")
        blocks.append(block)
    return blocks


def naive_gd_losses(weights, x, y, lr, iters):
    """Reference training loop; returns the loss at iterations 0..iters."""
    ws = [w.copy() for w in weights]
    losses = []
    for _ in range(iters + 1):
        feats, preacts = ref_forward(ws, x)
        r = feats[-1] - y
        losses.append(0.5 * float((r * r).sum()))
        delta = r
        gs = [None] * len(ws)
        for i in range(len(ws) - 1, -1, -1):
            gs[i] = feats[i].T.dot(delta)
            if i > 0:
                delta = delta.dot(ws[i].T) * (preacts[i - 1] > 0.0)
        ws = [w - lr * g for w, g in zip(ws, gs)]
    return losses


def min_abs_preact(weights, x):
    _, preacts = ref_forward(weights, x)
    if not preacts:
        return math.inf
    return min(float(np.min(np.abs(z))) for z in preacts)


def kink_free_problem(rng, widths, n, margin=1e-3, tries=200):
    """Random weights and data with every hidden preactivation away from zero.

    Finite differencing near a ReLU kink is meaningless, so gradient-check
    problems are filtered to keep a margin around every preactivation.
    """
    for _ in range(tries):
        weights = [
            rng.standard_normal((widths[i], widths[i + 1])) / np.sqrt(widths[i])
            for i in range(len(widths) - 1)
        ]
        x = rng.standard_normal((n, widths[0]))
        y = rng.standard_normal((n, widths[-1]))
        if min_abs_preact(weights, x) > margin:
            return weights, x, y
    raise RuntimeError("could not find a kink-free configuration")
