"""``key=value`` configuration files mapped onto the config dataclasses."""
from __future__ import annotations

import dataclasses
import typing
from pathlib import Path


class ConfigFileError(ValueError):
    pass


def parse_config(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def read_config(path: str | Path | None) -> dict[str, str]:
    return parse_config(Path(path).read_text(encoding="utf-8")) if path else {}


def _coerce(raw: str, annotation, default):
    text = str(annotation)
    if "list" in text or "tuple" in text:
        items = [s.strip() for s in raw.split(",") if s.strip()]
        inner = int if "int" in text else float if "float" in text else str
        items = [inner(x) for x in items]
        return tuple(items) if "tuple" in text else items
    if "bool" in text:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigFileError(f"not a boolean: {raw!r}")
    if "int" in text and "float" not in text:
        return int(raw)
    if "float" in text:
        return float(raw)
    return raw


def build(cls, values: dict[str, str], **overrides):
    """Instantiate dataclass ``cls`` from the keys it recognises; unknown keys are ignored."""
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in values:
            try:
                kwargs[f.name] = _coerce(values[f.name], hints[f.name], f.default)
            except ValueError as exc:
                raise ConfigFileError(f"{f.name}: {exc}") from None
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)
