"""System validation: totality, determinism, image nonnegativity.

For sequence-free systems totality and determinism are decided exactly by
interval-congruence decomposition: per rule bucket (tree, depth) the matching
profile of a coordinate value v is determined by min(v, T) together with
v mod L, where T exceeds every interval breakpoint of the bucket and L is the
lcm of its moduli; testing the fundamental domain [0, T+L) per position is
therefore exhaustive. Systems with sequence guards are checked pointwise on a
finite truncation and reported as such.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import lcm

from .dsl import Rule, SeqTerm, SystemSpec, matching_rules
from .space import Point, enumerate_truncation


@dataclass
class ValidationReport:
    system: str
    mode: str  # "exact" | "verified to depth N"
    ordered: bool
    total: bool = True
    totality_witness: Point | None = None
    deterministic: bool = True
    overlap_witness: tuple[Point, int, int] | None = None
    nonneg: bool = True
    nonneg_witness: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.total and (self.deterministic or self.ordered) and self.nonneg

    def render(self) -> str:
        if self.ok:
            det = "deterministic" if self.deterministic else "deterministic (ordered)"
            return f"valid: total, {det} ({self.mode})"
        parts = []
        if not self.total:
            parts.append(f"totality violation, witness {self.totality_witness}")
        if not self.deterministic and not self.ordered:
            p, i, j = self.overlap_witness
            parts.append(f"overlap at {p} (rules {i} and {j})")
        if not self.nonneg:
            parts.append(f"negative image: {self.nonneg_witness}")
        return "invalid: " + "; ".join(parts) + f" ({self.mode})"


def _var_bounds(rule: Rule, depth_cap: int) -> dict[str, tuple[int, int | None]]:
    """Per-variable (lo, hi) from plain guard atoms; hi None when unbounded."""
    bounds: dict[str, tuple[int, int | None]] = {}
    names = set(rule.pattern_vars()) | set(rule.binders())
    for n in names:
        bounds[n] = (0, None)
    for a in rule.guard:
        if a.kind == "ge":
            lo, hi = bounds[a.var]
            bounds[a.var] = (max(lo, a.a), hi)
        elif a.kind == "le":
            lo, hi = bounds[a.var]
            bounds[a.var] = (lo, a.a if hi is None else min(hi, a.a))
    return bounds


def _check_nonneg(s: SystemSpec, depth: int) -> tuple[bool, str | None]:
    """Every image expression must be provably >= 0 under the rule's guard.
    Expressions involving sequence-bound variables or binders are scanned
    numerically over admissible binder indices up to a bound."""
    for r in s.rules:
        bounds = _var_bounds(r, depth)
        seq_atoms = [a for a in r.guard if a.kind == "seq"]
        bound_by_seq = {a.var: a for a in seq_atoms}
        for e in r.image:
            exprs = [e.index] if isinstance(e, SeqTerm) else [e]
            for expr in exprs:
                names = expr.params()
                if any(n in bound_by_seq or any(n == a.binder for a in seq_atoms)
                       for n in names):
                    # correlated via v = seq(binder)+offset: scan binder range
                    ok = _scan_seq_expr(s, r, expr, bounds, seq_atoms, limit=512)
                    if not ok:
                        return False, f"rule {r.index}: {r.render()}"
                    continue
                m = expr.const
                unbounded = False
                for n, c in expr.coeffs:
                    lo, hi = bounds.get(n, (0, None))
                    if c > 0:
                        m += c * lo
                    else:
                        if hi is None:
                            unbounded = True
                            break
                        m += c * hi
                if unbounded or m < 0:
                    return False, f"rule {r.index}: {r.render()}"
    return True, None


def _scan_seq_expr(s, r, expr, bounds, seq_atoms, limit: int) -> bool:
    binder_domains = []
    for a in seq_atoms:
        lo, hi = bounds.get(a.binder, (0, None))
        hi = min(hi, limit) if hi is not None else limit
        binder_domains.append((a, range(lo, hi + 1)))
    free = [n for n in expr.params()
            if n not in {a.var for a in seq_atoms}
            and n not in {a.binder for a in seq_atoms}]
    for combo in itertools.product(*(rng for _, rng in binder_domains)):
        env: dict[str, int] = {}
        for (a, _), idx in zip(binder_domains, combo):
            env[a.binder] = idx
            env[a.var] = s.seqs[a.seq].value(idx) + a.offset
        for n in free:
            lo, hi = bounds.get(n, (0, None))
            env[n] = lo  # worst case only if coefficient >= 0
            if expr.coeff(n) < 0:
                if hi is None:
                    return False
                env[n] = hi
        if expr.eval(env) < 0:
            return False
    return True


def _exact_scan(s: SystemSpec) -> tuple[Point | None, tuple[Point, int, int] | None]:
    """Exhaustive totality/determinism over the fundamental domains."""
    bad_total: Point | None = None
    bad_overlap: tuple[Point, int, int] | None = None
    for tree in s.space.trees:
        for depth in range(tree.height + 1):
            bucket = s.bucket(tree.id, depth)
            if depth == 0:
                probes = [()]
            else:
                per_pos: list[list[int]] = []
                for pos in range(depth):
                    breaks = {0}
                    mods = [1]
                    for r in bucket:
                        e = r.pattern[pos]
                        if isinstance(e, int):
                            breaks.update((e, e + 1))
                        else:
                            for a in r.guard:
                                if a.var != e:
                                    continue
                                if a.kind == "ge":
                                    breaks.add(a.a)
                                elif a.kind == "le":
                                    breaks.add(a.a + 1)
                                elif a.kind == "mod":
                                    mods.append(a.a)
                    t_max = max(breaks)
                    period = lcm(*mods)
                    per_pos.append(list(range(0, t_max + period)))
                probes = itertools.product(*per_pos)
            for path in probes:
                p = Point(tree.id, tuple(path))
                matched = matching_rules(s, p)
                if not matched and bad_total is None:
                    bad_total = p
                if len(matched) > 1 and bad_overlap is None:
                    bad_overlap = (p, matched[0].index, matched[1].index)
    return bad_total, bad_overlap


def _bounded_scan(s: SystemSpec, depth: int):
    bad_total = None
    bad_overlap = None
    for p in enumerate_truncation(s.space, depth):
        matched = matching_rules(s, p)
        if not matched and bad_total is None:
            bad_total = p
        if len(matched) > 1 and bad_overlap is None:
            bad_overlap = (p, matched[0].index, matched[1].index)
    return bad_total, bad_overlap


def validate_system(s: SystemSpec, depth: int = 100) -> ValidationReport:
    """Check totality, determinism and image nonnegativity. Verdicts are
    carried in the report, never raised."""
    exact = not s.has_seq_guards()
    mode = "exact" if exact else f"verified to depth {depth}"
    report = ValidationReport(system=s.name, mode=mode, ordered=s.ordered)

    ok, witness = _check_nonneg(s, depth)
    report.nonneg = ok
    report.nonneg_witness = witness

    for sd in s.seqs.values():
        if not sd.check_increasing():
            report.notes.append(f"sequence {sd.name} not strictly increasing")
            report.nonneg = False

    if exact:
        bad_total, bad_overlap = _exact_scan(s)
    else:
        bad_total, bad_overlap = _bounded_scan(s, depth)
    if bad_total is not None:
        report.total = False
        report.totality_witness = bad_total
    if bad_overlap is not None:
        report.deterministic = False
        report.overlap_witness = bad_overlap
    return report


def validated(s: SystemSpec, depth: int = 100) -> ValidationReport:
    """Cached validation used by engine entry points."""
    rep = s.caches.get("validation")
    if rep is None:
        rep = validate_system(s, depth)
        s.caches["validation"] = rep
    return rep
