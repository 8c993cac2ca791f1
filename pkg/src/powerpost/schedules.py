"""Deterministic tempering schedules ``alpha_n = c * n**e``."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ConfigError

_PATTERN = re.compile(r"^\s*(?:(?P<c>[0-9.eE+-]+)\s*\*?\s*)?n(?:\s*\^\s*(?P<e>[-+]?[0-9./]+))?\s*$")


@dataclass(frozen=True)
class Schedule:
    coef: float
    exponent: float

    def __call__(self, n):
        return self.coef * n ** self.exponent

    @property
    def label(self) -> str:
        return format_exponent(self.exponent)


def format_exponent(e: float) -> str:
    for num, den in ((-3, 4), (-1, 2), (-1, 4), (1, 1), (-1, 1), (0, 1)):
        if abs(e - num / den) < 1e-12:
            return "n" if (num, den) == (1, 1) else f"n^{num}/{den}" if den != 1 else f"n^{num}"
    return f"n^{e:g}"


def parse_schedule(text) -> Schedule:
    """Parse ``"0.5n^-3/4"``, ``"n^-0.5"``, ``"n"`` and the like."""
    if isinstance(text, Schedule):
        return text
    m = _PATTERN.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse schedule {text!r}; expected like 0.5n^-3/4")
    coef = float(m.group("c")) if m.group("c") else 1.0
    e = m.group("e") or "1"
    try:
        if "/" in e:
            num, den = e.split("/")
            exponent = float(num) / float(den)
        else:
            exponent = float(e)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad exponent in schedule {text!r}") from exc
    if coef <= 0:
        raise ConfigError("schedule coefficient must be positive")
    return Schedule(coef, exponent)
