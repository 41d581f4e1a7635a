"""Transcript assembly and golden-file comparison.

Probe lines follow the fault-injection tool shape so frozen golden
files can be compared byte for byte:

    <17 spaces><Verb> <SYMBOLIC_NAME padded to 39>...  <PASS!|FAILED!>
"""

from __future__ import annotations

import difflib
from pathlib import Path

from .errors import MissingGolden

PASS = "PASS!"
FAILED = "FAILED!"
SKIPPED = "Skipped to avoid memory collision!"

_INDENT = " " * 17
_NAME_WIDTH = 39


def probe_line(verb: str, name: str, verdict: str) -> str:
    return f"{_INDENT}{verb} {name:<{_NAME_WIDTH}}...  {verdict}"


class Transcript:
    """Ordered, append-only text lines; byte-stable across runs."""

    def __init__(self):
        self.lines: list[str] = []

    def emit(self, line: str = "") -> None:
        self.lines.append(line)

    def emit_block(self, text: str) -> None:
        for line in text.splitlines():
            self.lines.append(line)

    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")

    def verdicts(self) -> list[str]:
        """The PASS!/FAILED!/Skipped sequence, for figure-level checks."""
        out = []
        for line in self.lines:
            stripped = line.rstrip()
            if stripped.endswith(PASS):
                out.append(PASS)
            elif stripped.endswith(FAILED):
                out.append(FAILED)
            elif stripped.endswith(SKIPPED):
                out.append(SKIPPED)
        return out


def normalize(text: str) -> str:
    lines = [line.rstrip() for line in text.splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines) + "\n" if lines else ""


def compare_transcript(actual: str, golden_path) -> str | None:
    """None when equal after trailing-whitespace normalization, else a
    minimal unified diff."""
    golden_path = Path(golden_path)
    if not golden_path.exists():
        raise MissingGolden(f"golden transcript {golden_path} does not exist")
    expected = normalize(golden_path.read_text())
    got = normalize(actual)
    if expected == got:
        return None
    diff = difflib.unified_diff(
        expected.splitlines(), got.splitlines(),
        fromfile=str(golden_path), tofile="<actual>", lineterm="")
    return "\n".join(diff)
