import math

import numpy as np
import pytest

from relucert import (
    Architecture,
    Dataset,
    Params,
    compute_certificate,
    estimate_lambda_star,
    generate_sphere_data,
    init_lecun,
    init_scaled,
    search_init_scale,
    suggest_lr,
)
from relucert.certificate import (
    ScaleSearchError,
    allowance_schedule,
    parse_report,
)


def _toy_two_layer(seed=0, n=4, n0=3, n1=8):
    ds = generate_sphere_data(n, n0, 1, seed=seed)
    arch = Architecture((n0, n1, 1))
    params = init_lecun(arch, seed)
    return arch, params, ds


def test_zero_svmin_fails_all_conditions():
    # zero hidden weights give zero features, hence zero smallest singular value
    arch = Architecture((3, 6, 1))
    params = Params((np.zeros((3, 6)), np.zeros((6, 1))))
    ds = generate_sphere_data(4, 3, 1, seed=0)
    cert = compute_certificate(arch, params, ds)
    assert cert.svmin_init == 0.0
    assert not cert.cond_weights and not cert.cond_features and not cert.cond_stability
    assert not cert.certified


def test_two_layer_stability_condition_with_unit_budgets():
    # zero weights and unit allowances reduce the stability condition to
    # svmin^2 >= 16 * ||X||_F^2
    arch = Architecture((3, 6, 2))
    params = Params((np.zeros((3, 6)), np.zeros((6, 2))))
    ds = generate_sphere_data(4, 3, 2, seed=1)
    cert = compute_certificate(arch, params, ds)
    assert cert.budgets == (1.0, 1.0)
    assert cert.cond_stability_rhs == pytest.approx(16.0 * cert.x_norm ** 2, rel=1e-12)


def test_certificate_against_independent_recomputation():
    # two-layer toy: rebuild every condition side from numpy-computed norms
    arch, params, ds = _toy_two_layer(seed=2)
    cert = compute_certificate(arch, params, ds, lr=1e-3)

    w1, w2 = params.weights
    h1 = np.maximum(ds.x @ w1, 0.0)
    svmin = np.linalg.svd(h1, compute_uv=False)[-1]
    lam1 = np.linalg.norm(w1, 2) + 1.0
    lam2 = np.linalg.norm(w2, 2) + 1.0
    x_norm = np.linalg.norm(ds.x)
    out = h1 @ w2
    phi0 = 0.5 * np.sum((out - ds.y) ** 2)
    root = math.sqrt(2.0 * phi0)

    assert cert.svmin_init == pytest.approx(svmin, rel=1e-10)
    assert cert.initial_loss == pytest.approx(phi0, rel=1e-12)
    assert cert.cond_weights_lhs == pytest.approx(svmin ** 2, rel=1e-10)
    assert cert.cond_weights_rhs == pytest.approx(
        16.0 * x_norm * max(lam2 / 1.0, lam1 / 1.0) * root, rel=1e-10
    )
    assert cert.cond_features_lhs == pytest.approx(svmin ** 3, rel=1e-10)
    assert cert.cond_features_rhs == pytest.approx(
        32.0 * x_norm ** 2 * lam2 * lam1 ** 2 / lam1 ** 2 * root, rel=1e-10
    )
    assert cert.cond_stability_rhs == pytest.approx(
        16.0 * x_norm ** 2 * lam2 ** 2, rel=1e-10
    )
    second = (lam1 ** -2) / (x_norm ** 2 * (lam1 * lam2) ** 2 * (lam1 ** -2 + lam2 ** -2) ** 2)
    assert cert.lr_max == pytest.approx(min(8.0 / svmin ** 2, second), rel=1e-10)


def test_certificate_idempotent():
    arch, params, ds = _toy_two_layer(seed=3)
    a = compute_certificate(arch, params, ds, lr=1e-3)
    b = compute_certificate(arch, params, ds, lr=1e-3)
    assert a == b
    assert a.to_report() == b.to_report()


def test_certificate_narrow_width_reason():
    arch = Architecture((3, 2, 1))  # last hidden width 2 below 5 samples
    params = init_lecun(arch, seed=4)
    ds = generate_sphere_data(5, 3, 1, seed=4)
    cert = compute_certificate(arch, params, ds)
    assert not cert.width_ok
    assert not cert.certified
    assert "below the sample count" in cert.reason


def test_certificate_rejects_bad_inputs():
    arch, params, ds = _toy_two_layer(seed=5)
    with pytest.raises(ValueError):
        compute_certificate(arch, params, ds, allowances=(1.0,))
    with pytest.raises(ValueError):
        compute_certificate(arch, params, ds, allowances=(1.0, 0.0))
    with pytest.raises(ValueError):
        compute_certificate(arch, params, ds, lr=-1.0)


def test_suggest_lr():
    arch, params, ds = _toy_two_layer(seed=6)
    cert = compute_certificate(arch, params, ds, lr=1e-6)
    assert suggest_lr(cert, 0.9) == pytest.approx(0.9 * cert.lr_max)
    assert suggest_lr(cert, 0.9) < cert.lr_max
    with pytest.raises(ValueError):
        suggest_lr(cert, 1.5)


def test_decay_half_at_four_over_svmin_sq():
    arch, params, ds = _toy_two_layer(seed=7)
    probe = compute_certificate(arch, params, ds, lr=1e-9)
    lr = 4.0 / probe.svmin_init ** 2
    cert = compute_certificate(arch, params, ds, lr=lr)
    assert cert.decay == pytest.approx(0.5, rel=1e-12)


def test_certified_decay_in_unit_interval():
    arch = Architecture((10, 12, 32, 1))
    ds = generate_sphere_data(20, 10, 1, seed=8)
    scale = search_init_scale(arch, init_scaled(arch, 8, 1.0), ds)
    cert = compute_certificate(arch, init_scaled(arch, 8, scale), ds)
    assert cert.certified
    assert 0.0 < cert.decay < 1.0


def test_lr_bound_matches_step_coefficients():
    # whenever the stability condition holds, the suggested step keeps
    # lr * q_move^2 <= q_cross, the inequality the bound encodes
    arch = Architecture((10, 12, 32, 1))
    ds = generate_sphere_data(20, 10, 1, seed=9)
    scale = search_init_scale(arch, init_scaled(arch, 9, 1.0), ds)
    cert = compute_certificate(arch, init_scaled(arch, 9, scale), ds)
    assert cert.certified and cert.cond_stability
    assert cert.lr * cert.q_move() ** 2 <= cert.q_cross()


def test_scale_search_returns_one_when_already_satisfied():
    # gigantic hidden weights make every condition hold at scale one
    arch = Architecture((3, 4, 1))
    ds = generate_sphere_data(2, 3, 1, seed=10)
    base = init_lecun(arch, 10)
    boosted = Params((base.weights[0] * 1e6, np.zeros((4, 1))))
    assert search_init_scale(arch, boosted, ds) == 1.0


def test_scale_search_near_minimal():
    arch = Architecture((10, 12, 32, 1))
    ds = generate_sphere_data(20, 10, 1, seed=11)
    base = init_scaled(arch, 11, 1.0)
    scale = search_init_scale(arch, base, ds)

    def certified_at(s):
        cert = compute_certificate(arch, init_scaled(arch, 11, s), ds, lr=1e-30)
        return cert.cond_weights and cert.cond_features and cert.cond_stability

    assert certified_at(scale)
    assert not certified_at(scale / 1.01)
    assert certified_at(scale * 2.0)  # conditions stay satisfied past the threshold


def test_scale_search_svmin_homogeneity_matches_certificate():
    arch = Architecture((6, 10, 16, 1))
    ds = generate_sphere_data(8, 6, 1, seed=12)
    base = init_scaled(arch, 12, 1.0)
    sv_base = compute_certificate(arch, base, ds, lr=1e-9).svmin_init
    scale = 7.0
    cert = compute_certificate(arch, init_scaled(arch, 12, scale), ds, lr=1e-9)
    assert cert.svmin_init == pytest.approx(scale ** 2 * sv_base, rel=1e-10)


def test_scale_search_cap():
    arch = Architecture((3, 4, 1))
    ds = generate_sphere_data(2, 3, 1, seed=13)
    base = init_lecun(arch, 13)
    with pytest.raises(ScaleSearchError):
        search_init_scale(arch, base, ds, cap=4.0)


def test_scale_search_rejects_singular_base():
    arch = Architecture((3, 4, 1))
    ds = generate_sphere_data(2, 3, 1, seed=14)
    dead = Params((np.zeros((3, 4)), np.zeros((4, 1))))
    with pytest.raises(ValueError):
        search_init_scale(arch, dead, ds)


def test_allowance_schedules():
    assert allowance_schedule("ones", (10, 12, 32, 1)) == (1.0, 1.0, 1.0)
    deep = allowance_schedule("lecun_deep", (4, 8, 64, 1))
    assert deep == (1.0, 8.0, 64.0 ** (-1.0 / 6.0))
    two = allowance_schedule("lecun_deep", (4, 64, 1))
    assert two == (8.0, 64.0 ** (-1.0 / 6.0))
    assert allowance_schedule("ones", (7, 64, 1)) == (1.0, 1.0)
    with pytest.raises(ValueError):
        allowance_schedule("bogus", (4, 4))


def test_lambda_star_single_row_half():
    # one unit-variance projection: E relu(z)^2 = 1/2
    x = np.full((1, 4), 1.0)  # norm 2 = sqrt(4)
    est = estimate_lambda_star(x, samples=10000, seed=15)
    assert est.samples == 10000
    assert abs(est.value - 0.5) < 0.05


def test_lambda_star_duplicate_rows_degenerate():
    rng = np.random.default_rng(16)
    row = rng.standard_normal(5)
    row = row / np.linalg.norm(row) * np.sqrt(5)
    x = np.vstack([row, row])
    est = estimate_lambda_star(x, samples=200, seed=17)
    assert est.value <= 1e-10


def test_lambda_star_nonnegative():
    rng = np.random.default_rng(18)
    x = rng.standard_normal((6, 4))
    assert estimate_lambda_star(x, samples=50, seed=19).value >= 0.0


def test_report_roundtrip_fields():
    arch, params, ds = _toy_two_layer(seed=20)
    cert = compute_certificate(arch, params, ds, lr=1e-4)
    parsed = parse_report(cert.to_report())
    assert parsed["samples"] == "4"
    assert parsed["certified"] in ("true", "false")
    assert float(parsed["svmin_init"]) == cert.svmin_init
    assert float(parsed["lr"]) == cert.lr
