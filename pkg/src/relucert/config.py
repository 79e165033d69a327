"""Flat key-value experiment configuration.

Grammar: one ``key = value`` pair per line; blank lines and lines starting
with ``#`` are ignored. Values are scalars, the literal ``auto``, or
space-separated lists. Unknown keys are rejected. ``serialize_config``
produces a canonical form, so parse -> serialize -> parse is the identity.

Keys::

    seed             master seed (int)
    widths           layer widths, e.g. "10 12 32 1"
    samples          number of training samples
    init             lecun | lecun_deep | scaled
    scale            hidden-layer scale for init=scaled; auto = search
    output_exponent  output-layer variance exponent for init=lecun_deep
    c_schedule       ones | lecun_deep | explicit list of per-layer allowances
    lr               learning rate; auto = lr_safety * certified bound
    lr_safety        fraction of the bound used when lr = auto
    max_iters        iteration cap
    target_loss_rel  stop when loss <= target_loss_rel * initial loss
    audit_stride     record every k-th iterate (1 = every iterate)
    out              output directory
    sweep_samples    sample counts of the sweep grid (sweep only)
    sweep_widths     last-hidden widths of the sweep grid (sweep only)
    sweep_seeds      seeds per sweep cell (sweep only)
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config", "load_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    widths: tuple[int, ...] = ()
    samples: int = 0
    init: str = "lecun"
    scale: float | None = None
    output_exponent: float = 4.0 / 3.0
    c_schedule: str | tuple[float, ...] = "ones"
    lr: float | None = None
    lr_safety: float = 0.9
    max_iters: int = 10000
    target_loss_rel: float = 1e-10
    audit_stride: int = 1
    out: str = "runs"
    sweep_samples: tuple[int, ...] = ()
    sweep_widths: tuple[int, ...] = ()
    sweep_seeds: int = 0

    def require_model(self) -> None:
        """Validate the fields every certify/train run needs."""
        if len(self.widths) < 2:
            raise ConfigError("config needs `widths` with at least two entries")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"widths must be positive, got {self.widths}")
        if self.samples < 1:
            raise ConfigError("config needs `samples` >= 1")
        if self.init not in ("lecun", "lecun_deep", "scaled"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.scale is not None and not self.scale > 0:
            raise ConfigError("scale must be positive")
        if self.lr is not None and not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not 0.0 < self.lr_safety < 1.0:
            raise ConfigError("lr_safety must lie strictly between 0 and 1")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if not self.target_loss_rel > 0:
            raise ConfigError("target_loss_rel must be positive")
        if self.audit_stride < 1:
            raise ConfigError("audit_stride must be >= 1")
        if isinstance(self.c_schedule, tuple):
            if len(self.c_schedule) != len(self.widths) - 1:
                raise ConfigError(
                    f"c_schedule needs {len(self.widths) - 1} entries, "
                    f"got {len(self.c_schedule)}"
                )
            if any(not c > 0 for c in self.c_schedule):
                raise ConfigError("c_schedule entries must be positive")
        elif self.c_schedule not in ("ones", "lecun_deep"):
            raise ConfigError(f"unknown c_schedule {self.c_schedule!r}")

    def require_sweep(self) -> None:
        self.require_model()
        if not self.sweep_samples or not self.sweep_widths or self.sweep_seeds < 1:
            raise ConfigError(
                "sweep config needs `sweep_samples`, `sweep_widths` and `sweep_seeds`"
            )


def _parse_int_list(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split())


def _parse_value(key: str, value: str):
    if key in ("seed", "samples", "max_iters", "audit_stride", "sweep_seeds"):
        return int(value)
    if key in ("widths", "sweep_samples", "sweep_widths"):
        return _parse_int_list(value)
    if key in ("scale", "lr"):
        return None if value == "auto" else float(value)
    if key in ("output_exponent", "lr_safety", "target_loss_rel"):
        return float(value)
    if key == "c_schedule":
        if value in ("ones", "lecun_deep"):
            return value
        return tuple(float(v) for v in value.split())
    if key in ("init", "out"):
        return value
    raise ConfigError(f"unknown config key {key!r}")


def parse_config(text: str) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, value)
    return ExperimentConfig(**values)


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return " ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
