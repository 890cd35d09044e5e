"""Declared index sequences: first-order linear recurrences with polynomial
forcing term, or explicit polynomials. Strictly increasing over the naturals;
membership and inversion are decided by monotone search with a memoized prefix.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def poly_eval(coeffs: tuple[int, ...], n: int) -> int:
    """coeffs are low-to-high degree."""
    v = 0
    for c in reversed(coeffs):
        v = v * n + c
    return v


@dataclass
class SeqDef:
    name: str
    # recurrence: a(0) = init ; a(n) = a(n-1) + forcing(n).  explicit: a(n) = forcing(n).
    kind: str  # "recurrence" | "explicit"
    forcing: tuple[int, ...]
    init: int = 0
    _memo: list[int] = field(default_factory=list, repr=False)

    def value(self, n: int) -> int:
        if n < 0:
            raise ValueError(f"sequence {self.name} index {n} < 0")
        if self.kind == "explicit":
            return poly_eval(self.forcing, n)
        memo = self._memo
        if not memo:
            memo.append(self.init)
        while len(memo) <= n:
            k = len(memo)
            memo.append(memo[-1] + poly_eval(self.forcing, k))
        return memo[n]

    def index_of(self, v: int) -> int | None:
        """Return n with value(n) == v, or None. Monotone search."""
        if v < self.value(0):
            return None
        n = 0
        while True:
            t = self.value(n)
            if t == v:
                return n
            if t > v:
                return None
            n += 1

    def check_increasing(self, prefix: int = 64) -> bool:
        vals = [self.value(n) for n in range(prefix)]
        return all(a < b for a, b in zip(vals, vals[1:]))
