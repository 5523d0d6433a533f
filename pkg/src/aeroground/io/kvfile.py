"""Plain-text ``key = value`` files (configs, scenarios, reports).

Blank lines and ``#`` comments are ignored; keys are unique.
"""

from __future__ import annotations

from pathlib import Path


def parse(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load(path) -> dict[str, str]:
    return parse(Path(path).read_text())


def dump(values: dict) -> str:
    lines = []
    for key, value in values.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def save(path, values: dict) -> None:
    Path(path).write_text(dump(values))
