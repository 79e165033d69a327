"""Command-line front end: certify, train, verify and sweep.

Exit codes: 0 success, 1 usage or configuration error, 2 well-formed but
uncertified (or the certified run stopped short of its loss target),
3 falsification (an invariant or inequality that the theory guarantees was
observed to fail).

The output directory is taken from --out, else the RELUCERT_OUT environment
variable, else the config's ``out`` key.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, matrixio
from .certificate import (
    ScaleSearchError,
    allowance_schedule,
    compute_certificate,
    search_init_scale,
)
from .config import ConfigError, ExperimentConfig, load_config
from .initializers import (
    DOMAIN_TRIALS,
    Dataset,
    generate_sphere_data,
    init_lecun,
    init_lecun_deep,
    init_scaled,
    substream,
)
from .linalg import smallest_singular_value
from .network import Architecture, forward
from .trainer import train

__all__ = ["main", "console_main", "cell_seed", "EXIT_OK", "EXIT_USAGE", "EXIT_UNCERTIFIED", "EXIT_FALSIFIED"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNCERTIFIED = 2
EXIT_FALSIFIED = 3

OUT_ENV_VAR = "RELUCERT_OUT"


def cell_seed(master: int, samples: int, width: int, rep: int) -> int:
    """Deterministic per-cell seed: cell coordinates folded into the master."""
    seq = np.random.SeedSequence((master, samples, width, rep))
    return int(seq.generate_state(1, np.uint64)[0] >> 1)


def _allowances(cfg: ExperimentConfig, arch: Architecture):
    if isinstance(cfg.c_schedule, tuple):
        return cfg.c_schedule
    return allowance_schedule(cfg.c_schedule, arch.widths)


def _build_params(cfg: ExperimentConfig, arch: Architecture, dataset, allowances, log):
    """Initial weights for the configured scheme.

    For the scaled scheme with scale = auto this searches the smallest
    certifying scale; a base draw with singular last-hidden features is
    redrawn under an incremented seed (logged).
    """
    if cfg.init == "lecun":
        return init_lecun(arch, cfg.seed)
    if cfg.init == "lecun_deep":
        return init_lecun_deep(arch, cfg.seed, cfg.output_exponent)
    width_ok = arch.widths[-2] >= dataset.n_samples
    seed = cfg.seed
    if cfg.scale is not None or not width_ok:
        return init_scaled(arch, seed, cfg.scale if cfg.scale is not None else 1.0)
    for _ in range(8):
        base = init_scaled(arch, seed, 1.0)
        feats = forward(arch, base, dataset.x).features[arch.depth - 1]
        if smallest_singular_value(feats) > 0.0:
            break
        log(f"seed {seed}: base draw has singular last-hidden features, redrawing")
        seed += 1
    scale = search_init_scale(arch, base, dataset, allowances)
    log(f"scale search: smallest certifying scale = {scale!r}")
    return init_scaled(arch, seed, scale)


def _prepare(cfg: ExperimentConfig, log):
    cfg.require_model()
    arch = Architecture(cfg.widths)
    dataset = generate_sphere_data(cfg.samples, arch.widths[0], arch.widths[-1], cfg.seed)
    allowances = _allowances(cfg, arch)
    params = _build_params(cfg, arch, dataset, allowances, log)
    cert = compute_certificate(
        arch, params, dataset, allowances, lr=cfg.lr, lr_safety=cfg.lr_safety
    )
    return arch, dataset, params, cert


def _out_dir(cfg: ExperimentConfig, cli_out: str | None) -> Path:
    out = cli_out or os.environ.get(OUT_ENV_VAR) or cfg.out
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_certify(cfg: ExperimentConfig, cli_out: str | None = None, echo=print) -> int:
    out = _out_dir(cfg, cli_out)
    arch, dataset, params, cert = _prepare(cfg, echo)
    report = cert.to_report()
    (out / "certificate.txt").write_text(report)
    echo(report, end="")
    return EXIT_OK if cert.certified else EXIT_UNCERTIFIED


def cmd_train(cfg: ExperimentConfig, cli_out: str | None = None, echo=print) -> int:
    out = _out_dir(cfg, cli_out)
    arch, dataset, params, cert = _prepare(cfg, echo)
    (out / "certificate.txt").write_text(cert.to_report())
    matrixio.save_dataset(out / "dataset.txt", dataset)
    matrixio.save_params(out / "params_init.txt", params)
    if not cert.lr > 0:
        echo("no admissible learning rate; set `lr` explicitly")
        return EXIT_UNCERTIFIED
    trace = train(
        arch,
        params,
        dataset,
        lr=cert.lr,
        max_iters=cfg.max_iters,
        target_loss=cfg.target_loss_rel * cert.initial_loss,
        certificate=cert,
        audit=True,
        audit_stride=cfg.audit_stride,
    )
    trace.write(out / "trace.jsonl")
    summary = trace.summary()
    echo(
        f"certified={cert.certified} iterations={trace.iterations} "
        f"final_loss={trace.final_loss!r} target_reached={trace.target_reached} "
        f"violations={trace.violations}"
    )
    echo(f"trace written to {out / 'trace.jsonl'}")
    if cert.certified and trace.violations > 0:
        return EXIT_FALSIFIED
    if cert.certified and trace.target_reached:
        return EXIT_OK
    return EXIT_UNCERTIFIED


def _verify_ntk(trials: int, seed: int):
    dims = analysis.TrialDims(depths=(1, 2, 3), max_samples=12, max_width=48, max_outputs=2)
    failures = []
    for trial in range(trials):
        rng = substream(seed, DOMAIN_TRIALS, 3, trial)
        arch, params, x, y = analysis.random_problem(rng, dims)
        dataset = Dataset(x=x, y=y, seed=seed)
        report = analysis.check_ntk_bound(arch, params, dataset)
        if not (report.psd_ok and report.eig_bound_ok and report.pl_ok):
            failures.append((trial, arch.widths, report))
    return trials, failures


def _verify_lemma1(trials: int, seed: int):
    checks = analysis.check_gradient_norm_bound(trials, seed=seed)
    checks += analysis.check_feature_lipschitz_bound(trials, seed=seed)
    failures = [(c.trial, c.widths, c) for c in checks if not c.ok]
    return len(checks), failures


def _verify_descent(trials: int, seed: int):
    checks = analysis.check_descent_identity(trials, seed=seed)
    failures = [(c.trial, c.widths, c) for c in checks if not c.ok]
    return len(checks), failures


def cmd_verify(suite: str, trials: int, seed: int, cli_out: str | None = None, echo=print) -> int:
    if trials < 1:
        echo("verify needs --trials >= 1")
        return EXIT_USAGE
    runner = {"ntk": _verify_ntk, "lemma1": _verify_lemma1, "descent": _verify_descent}[suite]
    total, failures = runner(trials, seed)
    lines = [f"suite={suite} trials={trials} checks={total} violations={len(failures)}"]
    for trial, widths, detail in failures[:10]:
        lines.append(f"violation: trial={trial} seed={seed} widths={widths} detail={detail}")
    report = "\n".join(lines) + "\n"
    echo(report, end="")
    if cli_out or os.environ.get(OUT_ENV_VAR):
        out = Path(cli_out or os.environ[OUT_ENV_VAR])
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{suite}.txt").write_text(report)
    return EXIT_OK if not failures else EXIT_FALSIFIED


def run_sweep_cell(cfg: ExperimentConfig, samples: int, width: int, rep: int):
    """One (samples, width, rep) cell: certify and, if certified, train.

    Returns (certified, converged). Cells are fully independent: the cell seed
    depends only on the master seed and the cell coordinates.
    """
    widths = list(cfg.widths)
    widths[-2] = width
    cell_cfg = replace(
        cfg, seed=cell_seed(cfg.seed, samples, width, rep), samples=samples, widths=tuple(widths)
    )
    try:
        arch, dataset, params, cert = _prepare(cell_cfg, lambda *a, **k: None)
    except (ScaleSearchError, ValueError):
        return False, False
    if not cert.certified:
        return False, False
    trace = train(
        arch,
        params,
        dataset,
        lr=cert.lr,
        max_iters=cell_cfg.max_iters,
        target_loss=cell_cfg.target_loss_rel * cert.initial_loss,
        certificate=cert,
        audit=False,
    )
    return True, trace.target_reached


def cmd_sweep(cfg: ExperimentConfig, cli_out: str | None = None, echo=print) -> int:
    cfg.require_sweep()
    out = _out_dir(cfg, cli_out)
    rows = []
    for samples in sorted(cfg.sweep_samples):
        for width in sorted(cfg.sweep_widths):
            certified = converged = 0
            for rep in range(cfg.sweep_seeds):
                ok_cert, ok_conv = run_sweep_cell(cfg, samples, width, rep)
                certified += ok_cert
                converged += ok_conv
            rows.append((samples, width, cfg.sweep_seeds, certified, converged))
    lines = ["samples\twidth\tseeds\tcertified\tconverged\tcertified_frac\tconverged_frac"]
    for samples, width, seeds, certified, converged in rows:
        lines.append(
            f"{samples}\t{width}\t{seeds}\t{certified}\t{converged}\t"
            f"{certified / seeds!r}\t{converged / seeds!r}"
        )
    table = "\n".join(lines) + "\n"
    (out / "sweep.tsv").write_text(table)
    echo(table, end="")
    echo(f"table written to {out / 'sweep.tsv'}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relucert",
        description="Certified gradient-descent training for deep ReLU networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("certify", "evaluate the convergence certificate for a configuration"),
        ("train", "run audited gradient descent"),
        ("sweep", "certified/converged fractions over a (samples, width) grid"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to a key-value config file")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--out", default=None, help="output directory")

    verify = sub.add_parser("verify", help="run an inequality verification suite")
    verify.add_argument("--suite", required=True, choices=["ntk", "lemma1", "descent"])
    verify.add_argument("--trials", type=int, default=1000)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", default=None, help="optional report directory")
    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.trials, args.seed, args.out)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.command == "certify":
            return cmd_certify(cfg, args.out)
        if args.command == "train":
            return cmd_train(cfg, args.out)
        return cmd_sweep(cfg, args.out)
    except (ConfigError, OSError, ValueError, ScaleSearchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    raise SystemExit(main())
