"""Exact orbit analysis for concrete points.

Finite orbits are found by hash-based cycle detection. Infinite orbits are
certified as linear escapes when a window of the trace repeats its rule cells
with a constant nonnegative coordinate drift and every guard along the window
is upward-closed in the drifting coordinates; anything else is reported
Undecided rather than guessed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dsl import Rule, SystemSpec, apply_map
from .errors import NotEventuallyPeriodicError, UndecidedOrbitError
from .space import (
    DIVERGENT,
    EscapeFamily,
    Point,
    enumerate_truncation,
    family_from_point,
    in_neighborhood,
    limit_of_family,
)
from .affine import Affine

DEFAULT_STEP_BOUND = 10_000
DEFAULT_PERIOD_BOUND = 64


@dataclass(frozen=True)
class FiniteOrbit:
    prefix: tuple[Point, ...]
    cycle: tuple[Point, ...]

    @property
    def m(self) -> int:
        return len(self.prefix)

    @property
    def n(self) -> int:
        return len(self.cycle)

    def point_at(self, e: int) -> Point:
        if e < self.m:
            return self.prefix[e]
        return self.cycle[(e - self.m) % self.n]


@dataclass(frozen=True)
class LinearEscape:
    m: int
    q: int
    prefix: tuple[Point, ...]  # x_0 .. x_{m-1}
    bases: tuple[Point, ...]  # x_m .. x_{m+q-1}
    deltas: tuple[tuple[int, ...], ...]  # per-residue coordinate increments
    limits: tuple[Point, ...]  # u_0 .. u_{q-1}

    def point_at(self, e: int) -> Point:
        if e < self.m:
            return self.prefix[e]
        r = (e - self.m) % self.q
        k = (e - self.m) // self.q
        base = self.bases[r]
        d = self.deltas[r]
        return Point(base.tree, tuple(c + k * dc for c, dc in zip(base.path, d)))

    def residue_family(self, r: int) -> EscapeFamily:
        base = self.bases[r]
        d = self.deltas[r]
        entries = tuple(
            Affine.var(DIVERGENT, dc, c) if dc else Affine.of(c)
            for c, dc in zip(base.path, d)
        )
        return EscapeFamily(base.tree, entries)


@dataclass(frozen=True)
class Undecided:
    steps: int


OrbitAnalysis = FiniteOrbit | LinearEscape | Undecided


@dataclass(frozen=True)
class OmegaSet:
    points: frozenset[Point]
    generator: Point

    def __iter__(self):
        return iter(sorted(self.points))


def _guards_upward_closed(s: SystemSpec, rule: Rule, point: Point,
                          delta: tuple[int, ...]) -> bool:
    """Would `rule` keep matching point + k*delta for all k >= 0?"""
    var_of: dict[str, int] = {}
    for i, e in enumerate(rule.pattern):
        if isinstance(e, str):
            var_of[e] = i
        elif delta[i] != 0:
            return False  # constant entry cannot drift
    for a in rule.guard:
        pos = var_of.get(a.var)
        if pos is None:
            continue  # binder atom; binders attach to sequence atoms
        d = delta[pos]
        if d == 0:
            continue
        if a.kind == "le":
            return False
        if a.kind == "mod" and d % a.a != 0:
            return False
        if a.kind == "seq":
            return False  # sequence membership never shift-stable
    return True


def _trace(s: SystemSpec, x: Point, step_bound: int):
    """Simulate, stopping at a repeat. Returns (points, rules, first_repeat)."""
    pts: list[Point] = [x]
    rules: list[Rule] = []
    seen: dict[Point, int] = {x: 0}
    cur = x
    for _ in range(step_bound):
        bucket = s.bucket(cur.tree, len(cur.path))
        env = None
        for r in bucket:
            cr = s.compiled(r)
            env = cr.match(cur.path)
            if env is not None:
                cur = cr.apply(env, r.dst)
                rules.append(r)
                break
        if env is None:
            from .errors import CoverageGapError

            raise CoverageGapError(cur)
        if cur in seen:
            pts.append(cur)
            return pts, rules, seen[cur]
        seen[cur] = len(pts)
        pts.append(cur)
    return pts, rules, None


def analyze_orbit(
    s: SystemSpec,
    x: Point,
    step_bound: int = DEFAULT_STEP_BOUND,
    period_bound: int = DEFAULT_PERIOD_BOUND,
) -> OrbitAnalysis:
    cache = s.caches.setdefault("orbits", {})
    hit = cache.get(x)
    if hit is not None and not (isinstance(hit, Undecided) and hit.steps < step_bound):
        return hit
    result = _analyze_orbit(s, x, step_bound, period_bound)
    cache[x] = result
    return result


def _analyze_orbit(s, x, step_bound, period_bound) -> OrbitAnalysis:
    pts, rules, rep = _trace(s, x, step_bound)
    if rep is not None:
        j = len(pts) - 1  # pts[j] == pts[rep]
        return FiniteOrbit(tuple(pts[:rep]), tuple(pts[rep:j]))

    # escape scan: same rule window of length q with constant drift >= 0
    n = len(pts)
    occ: dict[tuple, list[int]] = {}
    keys = []
    for i in range(n - 1):
        k = (pts[i].tree, len(pts[i].path), rules[i].index)
        keys.append(k)
        occ.setdefault(k, []).append(i)
    for m in range(n - 1):
        for j in occ[keys[m]]:
            q = j - m
            if q <= 0 or q > period_bound or m + 2 * q > n - 1:
                continue
            if keys[m : m + q] != keys[m + q : m + 2 * q]:
                continue
            ok = True
            deltas = []
            for r in range(q):
                a, b = pts[m + r], pts[m + q + r]
                if a.tree != b.tree or len(a.path) != len(b.path):
                    ok = False
                    break
                d = tuple(y - z for y, z in zip(b.path, a.path))
                if any(c < 0 for c in d) or all(c == 0 for c in d):
                    ok = False
                    break
                if not _guards_upward_closed(s, rules[m + r], a, d):
                    ok = False
                    break
                deltas.append(d)
            if not ok:
                continue
            # sanity: observed trace beyond the window follows the drift
            consistent = True
            for e in range(m, n - 1):
                r = (e - m) % q
                k = (e - m) // q
                base = pts[m + r]
                want = tuple(c + k * dc for c, dc in zip(base.path, deltas[r]))
                if pts[e].path != want or pts[e].tree != base.tree:
                    consistent = False
                    break
            if not consistent:
                continue
            bases = tuple(pts[m + r] for r in range(q))
            esc = LinearEscape(m, q, tuple(pts[:m]), bases, tuple(deltas), ())
            limits = []
            for r in range(q):
                fam = esc.residue_family(r)
                u = limit_of_family(s.space, fam)
                limits.append(u)
            esc = LinearEscape(m, q, tuple(pts[:m]), bases, tuple(deltas), tuple(limits))
            # limit cycle must be f-invariant: f(u_r) = u_{r+1 mod q}
            for r in range(q):
                if apply_map(s, limits[r]) != limits[(r + 1) % q]:
                    return Undecided(n - 1)
            return esc
    return Undecided(n - 1)


def omega_limit(s: SystemSpec, x: Point, step_bound: int = DEFAULT_STEP_BOUND,
                period_bound: int = DEFAULT_PERIOD_BOUND) -> OmegaSet:
    a = analyze_orbit(s, x, step_bound, period_bound)
    if isinstance(a, Undecided):
        raise UndecidedOrbitError(a.steps)
    if isinstance(a, FiniteOrbit):
        return OmegaSet(frozenset(a.cycle), a.cycle[0])
    return OmegaSet(frozenset(a.limits), a.limits[0])


def eventually_periodic_data(s: SystemSpec, x: Point,
                             step_bound: int = DEFAULT_STEP_BOUND,
                             period_bound: int = DEFAULT_PERIOD_BOUND) -> tuple[int, int]:
    """(m, n): least m with f^m(x) periodic, and its period."""
    a = analyze_orbit(s, x, step_bound, period_bound)
    if isinstance(a, Undecided):
        raise UndecidedOrbitError(a.steps)
    if isinstance(a, LinearEscape):
        raise NotEventuallyPeriodicError(f"{x} has infinite orbit")
    return a.m, a.n


@dataclass(frozen=True)
class OrbitClosure:
    """Finite description of the orbit closure: explicit points, escape
    families per residue, and limit nodes. Membership of concrete points is
    decidable; `partial` descriptions only certify the explored prefix."""

    base: Point
    explicit: frozenset[Point]
    families: tuple[EscapeFamily, ...]
    limits: frozenset[Point]
    partial: bool = False

    def contains(self, p: Point) -> bool:
        if p in self.explicit or p in self.limits:
            return True
        for fam in self.families:
            if _family_contains(fam, p):
                return True
        return False

    def periodic_members(self, s: SystemSpec, bounds=(2048, 64)) -> list[Point]:
        out = []
        for p in sorted(self.explicit | self.limits):
            a = analyze_orbit(s, p, *bounds)
            if isinstance(a, FiniteOrbit) and a.m == 0:
                out.append(p)
        return out


def _family_contains(fam: EscapeFamily, p: Point) -> bool:
    if fam.tree != p.tree or len(fam.entries) != len(p.path):
        return False
    k = None
    for e, c in zip(fam.entries, p.path):
        dc = e.coeff(DIVERGENT)
        if dc == 0:
            if e.const != c:
                return False
        else:
            if (c - e.const) % dc != 0 or (c - e.const) // dc < 0:
                return False
            kk = (c - e.const) // dc
            if k is None:
                k = kk
            elif k != kk:
                return False
    return True


def orbit_closure(s: SystemSpec, x: Point, step_bound: int = DEFAULT_STEP_BOUND,
                  period_bound: int = DEFAULT_PERIOD_BOUND,
                  partial: bool = False) -> OrbitClosure:
    a = analyze_orbit(s, x, step_bound, period_bound)
    if isinstance(a, Undecided):
        if not partial:
            raise UndecidedOrbitError(a.steps)
        pts, _, _ = _trace(s, x, step_bound)
        return OrbitClosure(x, frozenset(pts), (), frozenset(), partial=True)
    if isinstance(a, FiniteOrbit):
        return OrbitClosure(x, frozenset(a.prefix) | frozenset(a.cycle), (), frozenset())
    fams = tuple(a.residue_family(r) for r in range(a.q))
    return OrbitClosure(x, frozenset(a.prefix) | frozenset(a.bases), fams,
                        frozenset(a.limits))


def orbit_prefix(s: SystemSpec, x: Point, steps: int) -> list[Point]:
    out = [x]
    cur = x
    for _ in range(steps):
        cur = apply_map(s, cur)
        out.append(cur)
    return out


def covers_truncation(s: SystemSpec, closure: OrbitClosure, depth: int,
                      nbhd_depth: int = 0) -> bool:
    """Bounded density check: every truncation point is a member (isolated)
    or approached within every cutoff <= nbhd_depth (internal)."""
    from .space import rank_of

    nbhd_depth = nbhd_depth or depth
    members = sorted(closure.explicit)
    for p in enumerate_truncation(s.space, depth):
        if rank_of(s.space, p) == 0:
            if not closure.contains(p):
                return False
        else:
            for cutoff in range(1, nbhd_depth + 1):
                if any(in_neighborhood(m, p, cutoff) and m != p for m in members):
                    continue
                if any(
                    in_neighborhood(fam.instance({DIVERGENT: tv, **{n: 0 for n in fam.aux_names()}}), p, cutoff)
                    for fam in closure.families
                    for tv in fam.t_values(max(cutoff + 2, 4))
                ):
                    continue
                if p in closure.limits or closure.contains(p):
                    continue
                return False
    return True
