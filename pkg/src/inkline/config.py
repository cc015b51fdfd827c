"""Config file parsing for the pipeline and augmentation stages.

One human-readable format covers every tunable:

    # comment
    [pipeline]
    dilation_se = rect:15x5
    min_component_area = relative:0.05
    ...
    [augment]
    seed = 7
    ...

Sections are fixed, keys are validated against the owning dataclass, and
parse errors carry the 1-based line number. Floats are written with repr()
so a save/load round trip is lossless.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

from inkline.errors import ConfigError
from inkline.imaging import SEShape, StructuringElement

SECTION_PIPELINE = "pipeline"
SECTION_AUGMENT = "augment"
_KNOWN_SECTIONS = (SECTION_PIPELINE, SECTION_AUGMENT)

# raw parse result: section -> key -> (value string, line number)
RawConfig = dict[str, dict[str, tuple[str, int]]]


def parse_config_text(text: str) -> RawConfig:
    """Parse the key/value document into per-section string maps."""
    sections: RawConfig = {}
    current: Union[str, None] = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _KNOWN_SECTIONS:
                raise ConfigError(f"line {line_no}: unknown section [{name}]")
            if name in sections:
                raise ConfigError(f"line {line_no}: duplicate section [{name}]")
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(f"line {line_no}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        if key in sections[current]:
            raise ConfigError(f"line {line_no}: duplicate key {key!r} in [{current}]")
        sections[current][key] = (value, line_no)
    return sections


def read_config_file(path: Union[str, Path]) -> RawConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config_text(p.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Typed value codecs


def parse_int(value: str, line_no: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} expects an integer, got {value!r}") from None


def parse_float(value: str, line_no: int, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"line {line_no}: {key} expects a number, got {value!r}") from None


def parse_bool(value: str, line_no: int, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"line {line_no}: {key} expects true/false, got {value!r}")


def parse_se(value: str, line_no: int, key: str) -> StructuringElement:
    """Decode 'rect:WxH' or 'cross:WxH' (W and H odd)."""
    shape_token, _, size_token = value.partition(":")
    ctor = {"rect": StructuringElement.rect, "cross": StructuringElement.cross}.get(shape_token)
    if ctor is None or "x" not in size_token:
        raise ConfigError(
            f"line {line_no}: {key} expects 'rect:WxH' or 'cross:WxH', got {value!r}"
        )
    w_token, _, h_token = size_token.partition("x")
    w = parse_int(w_token, line_no, key)
    h = parse_int(h_token, line_no, key)
    try:
        return ctor(w, h)
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: {key}: {exc}") from None


def format_se(se: StructuringElement) -> str:
    token = "rect" if se.shape is SEShape.RECT else "cross"
    return f"{token}:{se.width}x{se.height}"


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, StructuringElement):
        return format_se(value)
    return str(value)


def format_config(sections: dict[str, dict[str, object]]) -> str:
    """Render sections back to the file format (inverse of parse for our types)."""
    out = []
    for name, body in sections.items():
        out.append(f"[{name}]")
        for key, value in body.items():
            out.append(f"{key} = {format_value(value)}")
        out.append("")
    return "\n".join(out)


def reject_unknown(section: dict[str, tuple[str, int]], known: tuple[str, ...], name: str):
    for key, (_, line_no) in section.items():
        if key not in known:
            raise ConfigError(f"line {line_no}: unknown key {key!r} in [{name}]")
