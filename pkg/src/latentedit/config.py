"""Edit-job configuration: paper-default hyperparameters, strict parsing.

Config files are plain-text "key = value" lines with '#' comments. Unknown
and duplicate keys are rejected so a config echoed into a report always
reproduces the run byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .ngm import ALIGNMENTS, GuidanceWindow
from .schedule import SAMPLERS, SCHEDULES
from .snis import INPAINT_MODES, SnisConfig

DEFAULT_TOTAL_STEPS = 100
DEFAULT_TAU = 5
DEFAULT_TRANSITION_WIDTH = 16.0
DEFAULT_ALPHA = 0.48
DEFAULT_BETA = 0.85


@dataclass(frozen=True)
class EditConfig:
    total_steps: int = DEFAULT_TOTAL_STEPS
    tau: int = DEFAULT_TAU
    transition_width: float = DEFAULT_TRANSITION_WIDTH
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    t_start: int | None = None  # resolved to total_steps - tau when unset
    seed: int = 0
    schedule: str = "linear"
    sampler: str = "ddim"
    inpaint: str = "none"
    inpaint_url: str | None = None
    condition_length: int = 8
    invert_inpainted: bool = False
    literal_coefficient_tail: bool = False
    ngm_alignment: str = "post"
    # explicit [lo, hi] overriding alpha/beta, or "off" to disable guidance
    window: tuple[int, int] | str | None = None

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if self.transition_width <= 0:
            raise ConfigError(f"transition_width must be positive, got {self.transition_width}")
        if not 0.0 < self.alpha <= self.beta <= 1.0:
            raise ConfigError(f"need 0 < alpha <= beta <= 1, got alpha={self.alpha}, beta={self.beta}")
        if self.resolved_t_start < 0:
            raise ConfigError(f"t_start must be >= 0, got {self.t_start}")
        if self.resolved_t_start + self.tau > self.total_steps:
            raise ConfigError(
                f"t_start + tau = {self.resolved_t_start + self.tau} exceeds total_steps {self.total_steps}"
            )
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.inpaint not in INPAINT_MODES:
            raise ConfigError(f"inpaint must be one of {INPAINT_MODES}, got {self.inpaint!r}")
        if self.inpaint == "external" and not self.inpaint_url:
            raise ConfigError("inpaint=external requires inpaint_url")
        if self.condition_length < 1:
            raise ConfigError(f"condition_length must be >= 1, got {self.condition_length}")
        if self.ngm_alignment not in ALIGNMENTS:
            raise ConfigError(f"ngm_alignment must be one of {ALIGNMENTS}, got {self.ngm_alignment!r}")
        if isinstance(self.window, str):
            if self.window != "off":
                raise ConfigError(f"window must be lo:hi or off, got {self.window!r}")
        elif self.window is not None:
            lo, hi = self.window
            if lo > hi or lo < 0:
                raise ConfigError(f"window must satisfy 0 <= lo <= hi, got {lo}:{hi}")

    @property
    def resolved_t_start(self) -> int:
        return self.total_steps - self.tau if self.t_start is None else self.t_start

    def guidance_window(self) -> GuidanceWindow | None:
        if self.window == "off":
            return None
        if self.window is not None:
            return GuidanceWindow(*self.window)
        return GuidanceWindow.from_fractions(self.alpha, self.beta, self.total_steps)

    def snis_config(self) -> SnisConfig:
        return SnisConfig(
            t_start=self.resolved_t_start,
            tau=self.tau,
            transition_width=self.transition_width,
            seed=self.seed,
            inpaint=self.inpaint,
            inpaint_url=self.inpaint_url,
            invert_inpainted=self.invert_inpainted,
            literal_coefficient_tail=self.literal_coefficient_tail,
        )


_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _parse_bool(key: str, raw: str) -> bool:
    try:
        return _BOOL_WORDS[raw.lower()]
    except KeyError:
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}") from None


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None


def _parse_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}") from None


def parse_window(raw: str):
    if raw.strip().lower() == "off":
        return "off"
    parts = raw.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must look like lo:hi (or off), got {raw!r}")
    return (_parse_int("window.lo", parts[0]), _parse_int("window.hi", parts[1]))


_PARSERS = {
    "total_steps": _parse_int,
    "tau": _parse_int,
    "transition_width": _parse_float,
    "alpha": _parse_float,
    "beta": _parse_float,
    "t_start": _parse_int,
    "seed": _parse_int,
    "schedule": lambda k, v: v,
    "sampler": lambda k, v: v,
    "inpaint": lambda k, v: v,
    "inpaint_url": lambda k, v: v,
    "condition_length": _parse_int,
    "invert_inpainted": _parse_bool,
    "literal_coefficient_tail": _parse_bool,
    "ngm_alignment": lambda k, v: v,
    "window": lambda k, v: parse_window(v),
}


def parse_config(text: str) -> EditConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _PARSERS[key](key, value)
    return EditConfig(**values)


def load_config(path) -> EditConfig:
    return parse_config(Path(path).read_text())


def apply_overrides(cfg: EditConfig, overrides: dict[str, str]) -> EditConfig:
    updates: dict = {}
    for key, raw in overrides.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        updates[key] = _PARSERS[key](key, raw)
    return replace(cfg, **updates)


def config_to_text(cfg: EditConfig) -> str:
    lines = []
    for field in fields(cfg):
        value = getattr(cfg, field.name)
        if value is None:
            continue
        if field.name == "window" and isinstance(value, tuple):
            value = f"{value[0]}:{value[1]}"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{field.name} = {value}")
    return "\n".join(lines) + "\n"
