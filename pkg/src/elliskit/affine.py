"""Integer affine expressions over named parameters.

These are the common currency between the rule DSL (pattern variables
and sequence binders in images), escape families (the divergent index t
and symbolic auxiliaries), and the symbolic orbit executor.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Affine:
    """sum(coeff * param) + const with integer coefficients."""

    coeffs: tuple[tuple[str, int], ...]  # sorted by name, zero coeffs dropped
    const: int = 0

    @staticmethod
    def of(const: int) -> "Affine":
        return Affine((), const)

    @staticmethod
    def var(name: str, coeff: int = 1, const: int = 0) -> "Affine":
        if coeff == 0:
            return Affine((), const)
        return Affine(((name, coeff),), const)

    @staticmethod
    def make(coeffs: dict[str, int], const: int) -> "Affine":
        items = tuple(sorted((n, c) for n, c in coeffs.items() if c != 0))
        return Affine(items, const)

    @property
    def is_const(self) -> bool:
        return not self.coeffs

    def params(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.coeffs)

    def coeff(self, name: str) -> int:
        for n, c in self.coeffs:
            if n == name:
                return c
        return 0

    def add(self, other: "Affine") -> "Affine":
        d = dict(self.coeffs)
        for n, c in other.coeffs:
            d[n] = d.get(n, 0) + c
        return Affine.make(d, self.const + other.const)

    def add_const(self, k: int) -> "Affine":
        return Affine(self.coeffs, self.const + k)

    def sub(self, other: "Affine") -> "Affine":
        return self.add(other.scale(-1))

    def scale(self, k: int) -> "Affine":
        if k == 0:
            return Affine((), 0)
        return Affine(tuple((n, c * k) for n, c in self.coeffs), self.const * k)

    def subst(self, env: dict[str, "Affine | int"]) -> "Affine":
        out = Affine.of(self.const)
        for n, c in self.coeffs:
            v = env.get(n)
            if v is None:
                out = out.add(Affine.var(n, c))
            elif isinstance(v, int):
                out = out.add_const(c * v)
            else:
                out = out.add(v.scale(c))
        return out

    def shift_param(self, name: str, delta: int) -> "Affine":
        """Substitute name := name + delta."""
        c = self.coeff(name)
        if c == 0:
            return self
        return Affine(self.coeffs, self.const + c * delta)

    def eval(self, env: dict[str, int]) -> int:
        v = self.const
        for n, c in self.coeffs:
            v += c * env[n]
        return v

    def __str__(self) -> str:
        parts = []
        for n, c in self.coeffs:
            if c == 1:
                parts.append(n)
            elif c == -1:
                parts.append(f"-{n}")
            else:
                parts.append(f"{c}*{n}")
        if self.const or not parts:
            parts.append(str(self.const))
        s = parts[0]
        for p in parts[1:]:
            s += p if p.startswith("-") else "+" + p
        return s
