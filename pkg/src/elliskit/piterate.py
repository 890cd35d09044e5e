"""Ultrafilter iterates f^p on residue classes.

Values are computed by the exact eventually-periodic formulas (never by
simulation): for a finite orbit with preperiod m and period n and p in
(n*k + l)*, f^p(x) = f^e(x) where e is the least exponent >= m congruent to
l mod n; for a linear escape with period q, f^p(x) = u_{(l - m) mod q}.
The brute-force progression oracle re-checks any claimed value by walking
f along the arithmetic progression itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lcm

from .classes import ResidueClass, refine
from .dsl import SystemSpec, apply_map, iterate_map
from .errors import UndecidedOrbitError
from .orbits import (
    DEFAULT_PERIOD_BOUND,
    DEFAULT_STEP_BOUND,
    FiniteOrbit,
    LinearEscape,
    Undecided,
    analyze_orbit,
)
from .space import Point, in_neighborhood, rank_of


def resolution_modulus(s: SystemSpec, x: Point,
                       step_bound: int = DEFAULT_STEP_BOUND,
                       period_bound: int = DEFAULT_PERIOD_BOUND) -> int:
    """Minimal modulus making f^p(x) constant per residue class."""
    a = analyze_orbit(s, x, step_bound, period_bound)
    if isinstance(a, Undecided):
        raise UndecidedOrbitError(a.steps)
    return a.n if isinstance(a, FiniteOrbit) else a.q


@dataclass(frozen=True)
class ClassIterateValue:
    point: Point
    cls: ResidueClass
    entries: tuple[tuple[ResidueClass, Point], ...]

    def single(self) -> Point:
        vals = {v for _, v in self.entries}
        if len(vals) != 1:
            raise ValueError(f"f^p({self.point}) is not constant on {self.cls}")
        return next(iter(vals))

    @property
    def is_constant(self) -> bool:
        return len({v for _, v in self.entries}) == 1

    def value_for(self, c: ResidueClass) -> Point:
        for rc, v in self.entries:
            if rc.mod == c.mod and rc.rem == c.rem % rc.mod:
                return v
        for rc, v in self.entries:
            if c.mod % rc.mod == 0 and c.rem % rc.mod == rc.rem:
                return v
        raise KeyError(c)


def _finite_value(a: FiniteOrbit, l: int, n: int) -> Point:
    e = l if l >= a.m else l + n * (-(-(a.m - l) // n))
    return a.point_at(e)


def class_iterate(s: SystemSpec, x: Point, c: ResidueClass,
                  step_bound: int = DEFAULT_STEP_BOUND,
                  period_bound: int = DEFAULT_PERIOD_BOUND) -> ClassIterateValue:
    a = analyze_orbit(s, x, step_bound, period_bound)
    if isinstance(a, Undecided):
        raise UndecidedOrbitError(a.steps)
    res = a.n if isinstance(a, FiniteOrbit) else a.q
    if c.mod % res == 0:
        classes = [c]
    else:
        classes = refine(c, res)
    entries = []
    for rc in classes:
        l = rc.rem % res
        if isinstance(a, FiniteOrbit):
            entries.append((rc, _finite_value(a, l, res)))
        else:
            entries.append((rc, a.limits[(l - a.m) % a.q]))
    return ClassIterateValue(x, c, tuple(entries))


def progression_oracle(s: SystemSpec, x: Point, c: ResidueClass, claimed: Point,
                       nbhd_depth: int = 15, horizon: int = 10_000,
                       window: int = 51) -> bool:
    """Necessary condition for claimed == p-lim f^n(x) over p in (N*k+l)*:
    some K0 <= horizon has f^{k*N+l}(x) inside V_nbhd(claimed) for all
    k in [K0, K0+window). Walks the progression by repeated application."""
    cur = iterate_map(s, x, c.rem)
    run = 0
    k = 0
    while k <= horizon + window:
        if in_neighborhood(cur, claimed, nbhd_depth):
            run += 1
            if run >= window and k - window + 1 <= horizon:
                return True
        else:
            run = 0
        cur = iterate_map(s, cur, c.mod)
        k += 1
    return False


# ---------------------------------------------------------------------------
# continuity of the base map and of class iterates at accumulation points


@dataclass(frozen=True)
class ContinuityVerdict:
    kind: str  # "continuous" | "discontinuous" | "undecided"
    witness: object = None  # EscapeFamily for discontinuous verdicts
    witness_limit: object = None  # Point, or a description for diagonal cases
    expected: Point | None = None
    reason: str = ""

    @property
    def is_continuous(self) -> bool:
        return self.kind == "continuous"

    @property
    def is_discontinuous(self) -> bool:
        return self.kind == "discontinuous"

    def render(self) -> str:
        if self.kind == "continuous":
            return "CONTINUOUS"
        if self.kind == "discontinuous":
            return (f"DISCONTINUOUS witness={self.witness} "
                    f"limit={self.witness_limit} expected={self.expected}")
        return f"UNDECIDED ({self.reason})"


@dataclass(frozen=True)
class ContinuityReport:
    point: Point
    entries: tuple[tuple[ResidueClass | None, ContinuityVerdict], ...]

    def verdict_for(self, c: ResidueClass | None) -> ContinuityVerdict:
        for rc, v in self.entries:
            if rc == c:
                return v
        if c is not None:
            for rc, v in self.entries:
                if rc is not None and c.mod % rc.mod == 0 and c.rem % rc.mod == rc.rem:
                    return v
        raise KeyError(c)

    @property
    def merged(self) -> ContinuityVerdict:
        verdicts = [v for _, v in self.entries]
        if all(v.is_continuous for v in verdicts):
            return verdicts[0]
        disc = [v for v in verdicts if v.is_discontinuous]
        if len(disc) == len(verdicts):
            return disc[0]
        if disc:
            return ContinuityVerdict("undecided", reason="mixed verdicts across refined classes")
        und = [v for v in verdicts if v.kind == "undecided"]
        return und[0]


BASE_MAP = "base"


def continuity_at(s: SystemSpec, cls, a: Point,
                  instance_budget: int = 25) -> ContinuityReport:
    """Continuity of f (cls == BASE_MAP) or of the class iterate f^p at the
    accumulation point a. Returns one verdict per refined residue class."""
    from .symbolic import continuity_analysis

    if rank_of(s.space, a) < 1:
        raise ValueError(f"{a} is isolated; continuity is probed at accumulation points")
    return continuity_analysis(s, cls, a, instance_budget)


# ---------------------------------------------------------------------------
# theorem-backed classification of points (all accumulation points fixed)


@dataclass(frozen=True)
class T36Verdict:
    kind: str  # "all_discontinuous" | "all_continuous" | "undecided"
    b: Point | None = None
    family: object = None
    reason: str = ""


def _check_all_accumulation_fixed(s: SystemSpec) -> bool:
    from .dsl import restrict_to_derived
    from .space import enumerate_truncation

    der = restrict_to_derived(s)
    for r in der.rules:
        if r.src != r.dst:
            return False
    for p in enumerate_truncation(der.space, 8):
        if apply_map(der, p) != p:
            return False
    for r in der.rules:
        # symbolic identity: image entries must echo the pattern
        if len(r.image) != len(r.pattern):
            return False
        for pe, ie in zip(r.pattern, r.image):
            from .dsl import SeqTerm

            if isinstance(ie, SeqTerm):
                return False
            if isinstance(pe, int):
                if not (ie.is_const and ie.const == pe):
                    return False
            else:
                if ie.coeffs != ((pe, 1),) or ie.const != 0:
                    return False
    return True


def _check_all_accumulation_periodic(s: SystemSpec, depth: int = 8) -> bool:
    from .dsl import restrict_to_derived
    from .space import enumerate_truncation

    try:
        der = restrict_to_derived(s)
    except Exception:
        return False
    for p in enumerate_truncation(der.space, depth):
        a = analyze_orbit(der, p, 4096, 64)
        if not (isinstance(a, FiniteOrbit)):
            return False
    return True


def t36_classify(s: SystemSpec, a: Point, search_depth: int = 12) -> T36Verdict:
    """Decide whether every class iterate is discontinuous at `a` (equivalently,
    whether some periodic b != a sits in the orbit closure of a family
    converging to a), for systems whose accumulation points are all fixed."""
    from .errors import PreconditionError
    from .symbolic import family_closure_candidates

    if not _check_all_accumulation_fixed(s):
        raise PreconditionError("some accumulation point is not fixed")
    if rank_of(s.space, a) < 1:
        raise ValueError(f"{a} is isolated")
    candidates, all_decided = family_closure_candidates(s, a, search_depth)
    for fam, b in candidates:
        return T36Verdict("all_discontinuous", b=b, family=fam)
    if all_decided and not s.has_seq_guards():
        return T36Verdict("all_continuous")
    return T36Verdict("undecided", reason="family enumeration not exact")


@dataclass(frozen=True)
class T39Verdict:
    kind: str  # "discontinuous_all" | "hypothesis_fails"
    which: str = ""


def t39_sufficient(s: SystemSpec, a: Point, b: Point, family,
                   probe: int = 12) -> T39Verdict:
    """Sufficient condition: b periodic, b outside the orbit of a, and b in the
    closure of the orbit of every family instance; then every class iterate is
    discontinuous at a. Requires all accumulation points periodic."""
    from .errors import PreconditionError
    from .orbits import orbit_closure

    if not _check_all_accumulation_periodic(s):
        raise PreconditionError("some accumulation point is not periodic")
    ab = analyze_orbit(s, b, 4096, 64)
    if not (isinstance(ab, FiniteOrbit) and ab.m == 0):
        return T39Verdict("hypothesis_fails", which="b is not periodic")
    closure_a = orbit_closure(s, a)
    if closure_a.contains(b):
        return T39Verdict("hypothesis_fails", which="b in O_f(a)")
    for x in family.instances(probe):
        cl = orbit_closure(s, x)
        if not cl.contains(b):
            return T39Verdict("hypothesis_fails",
                              which=f"b not in closure of orbit of {x}")
    return T39Verdict("discontinuous_all")
