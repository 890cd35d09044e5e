"""Residue classes (N*k + l)* of free ultrafilters: the computational
stand-in for individual p in N*. Literal syntax: `2k+1`; `1k+0` is all of N*.
"""

from __future__ import annotations

import re
from typing import NamedTuple

from .errors import MalformedPointError


class ResidueClass(NamedTuple):
    mod: int
    rem: int

    def __str__(self) -> str:
        return f"{self.mod}k+{self.rem}"


ALL_FREE = ResidueClass(1, 0)

_CLASS_RE = re.compile(r"^\s*(\d+)\s*k\s*\+\s*(\d+)\s*$")


def parse_class(text: str) -> ResidueClass:
    m = _CLASS_RE.match(text)
    if not m:
        raise MalformedPointError(f"bad residue class literal {text!r}")
    mod, rem = int(m.group(1)), int(m.group(2))
    if mod < 1 or not (0 <= rem < mod):
        raise MalformedPointError(f"bad residue class literal {text!r}")
    return ResidueClass(mod, rem)


def refine(c: ResidueClass, modulus: int) -> list[ResidueClass]:
    """Split c into classes at lcm(c.mod, modulus)."""
    from math import lcm

    m = lcm(c.mod, modulus)
    return [ResidueClass(m, l) for l in range(c.rem, m, c.mod)]
