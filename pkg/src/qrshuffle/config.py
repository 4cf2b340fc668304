"""Flat dotted-key configuration files for the pipeline.

Format: one `key = value` per line, `#` comments, blank lines ignored.
Values are typed by the schema below; parse -> serialize -> parse is the
identity on settings.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .enhance import LossConfig


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    message: bytes = b"https://example.com/profile"
    qr_version: int = 5
    qr_ec_level: str = "H"
    source: str = ""
    face_mask: str = ""
    stylized: str = ""                  # optional externally regenerated image
    out_dir: str = "out"
    blueprint_sub_square_ratio: float = 0.75
    face_mask_coverage: float = 0.5
    stylize_blend_weight: float = 0.6   # blueprint share of the stand-in blend
    optimize_padding: bool = False
    loss: LossConfig = field(default_factory=LossConfig)
    harness_trials: int = 50
    harness_seed: int = 0

    def __post_init__(self):
        if self.qr_ec_level not in ("L", "M", "Q", "H"):
            raise ConfigError(f"unknown ec level {self.qr_ec_level!r}")
        if not 1 <= self.qr_version <= 10:
            raise ConfigError("qr version must be in 1..10")
        if not 0.0 <= self.stylize_blend_weight <= 1.0:
            raise ConfigError("stylize blend weight must be in [0, 1]")


# dotted key -> (section attr or None, field name, type)
_KEYMAP: dict[str, tuple[str | None, str, type]] = {
    "message": (None, "message", bytes),
    "qr.version": (None, "qr_version", int),
    "qr.ec_level": (None, "qr_ec_level", str),
    "paths.source": (None, "source", str),
    "paths.face_mask": (None, "face_mask", str),
    "paths.stylized": (None, "stylized", str),
    "paths.out_dir": (None, "out_dir", str),
    "blueprint.sub_square_ratio": (None, "blueprint_sub_square_ratio", float),
    "blueprint.coverage": (None, "face_mask_coverage", float),
    "stylize.blend_weight": (None, "stylize_blend_weight", float),
    "reshuffle.optimize_padding": (None, "optimize_padding", bool),
    "harness.trials": (None, "harness_trials", int),
    "harness.seed": (None, "harness_seed", int),
}
for f in fields(LossConfig):
    _KEYMAP[f"loss.{f.name}"] = ("loss", f.name, f.type if isinstance(f.type, type) else
                                 {"float": float, "int": int, "bool": bool}[f.type])


def _parse_value(raw: str, typ: type):
    raw = raw.strip()
    if typ is bool:
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    if typ is bytes:
        return raw.encode("utf-8")
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r}: {exc}") from exc


def _format_value(value) -> str:
    if isinstance(value, bytes):
        return value.decode("utf-8")
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    config = base if base is not None else PipelineConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _KEYMAP:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        section, name, typ = _KEYMAP[key]
        target = getattr(config, section) if section else config
        setattr(target, name, _parse_value(raw, typ))
    # re-run validation with the final values
    config.__post_init__()
    config.loss.__post_init__()
    return config


def apply_overrides(config: PipelineConfig, overrides: dict[str, str]
                    ) -> PipelineConfig:
    """Apply `key=value` command-line overrides on top of a parsed config."""
    lines = [f"{k} = {v}" for k, v in overrides.items()]
    return parse_config("\n".join(lines), base=config)


def serialize_config(config: PipelineConfig) -> str:
    lines = []
    for key, (section, name, _) in _KEYMAP.items():
        target = getattr(config, section) if section else config
        lines.append(f"{key} = {_format_value(getattr(target, name))}")
    return "\n".join(lines) + "\n"


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
