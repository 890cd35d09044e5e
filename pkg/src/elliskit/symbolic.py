"""Symbolic analysis of point families converging to an accumulation point.

A family is a parametric point: concrete prefix coordinates, one divergent
index t (tail semantics: claims hold for all sufficiently large t; finitely
many instances never affect limits), and universally quantified auxiliaries
for the deeper coordinates. The executor iterates the system map on
affine-in-parameters states, partitioning the parameter cell whenever a guard
is not decided on it, and certifies one of four terminal shapes per branch:

  concrete   the state lost all parameters; ordinary orbit analysis applies
  cycle      the state expression repeats exactly (uniform eventual period)
  escape     a rule window repeats with constant nonnegative drift and
             shift-stable guards (uniform linear escape)
  descent    f^sigma maps the state to itself with one parameter lowered by
             d (self-similar staircase; values reduce to finitely many base
             orbits with a class shift of sigma per unit)

Everything else is honestly Undecided. Per-branch class-iterate values are
exact; limits of value expressions reuse the escape-family topology.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import gcd, lcm

from .affine import Affine
from .classes import ResidueClass
from .dsl import Rule, SeqTerm, SystemSpec, apply_map
from .errors import UndecidedOrbitError
from .orbits import analyze_orbit, orbit_closure
from .piterate import (
    BASE_MAP,
    ContinuityReport,
    ContinuityVerdict,
    class_iterate,
    resolution_modulus,
)
from .space import DIVERGENT, EscapeFamily, Point

MAX_STEPS = 60
MAX_FRAGMENTS = 240
PIN_BOUND = 16
MODULUS_CAP = 720_720


# ---------------------------------------------------------------------------
# parameter domains


@dataclass(frozen=True)
class Domain:
    lo: int
    mod: int = 1
    rem: int = 0

    def first(self) -> int:
        r = self.rem % self.mod
        return self.lo + ((r - self.lo) % self.mod)

    def values(self, count: int) -> list[int]:
        v = self.first()
        return [v + k * self.mod for k in range(count)]

    def with_lo(self, lo: int) -> "Domain":
        return Domain(max(self.lo, lo), self.mod, self.rem)

    def refined(self, m: int) -> list["Domain"]:
        """Partition into congruence classes at modulus mod*m."""
        out = []
        mm = self.mod * m
        for v in range(m):
            out.append(Domain(self.lo, mm, (self.rem + self.mod * v) % mm))
        return out


Cell = dict[str, Domain]


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class State:
    tree: str
    exprs: tuple[Affine, ...]

    def coeff_sig(self):
        return (self.tree, tuple(e.coeffs for e in self.exprs))

    def consts(self) -> tuple[int, ...]:
        return tuple(e.const for e in self.exprs)

    def subst(self, env: dict[str, int]) -> "State":
        return State(self.tree, tuple(e.subst(env) for e in self.exprs))

    def is_const(self) -> bool:
        return all(e.is_const for e in self.exprs)

    def point(self) -> Point:
        return Point(self.tree, self.consts())

    def render(self) -> str:
        return f"{self.tree}({','.join(str(e) for e in self.exprs)})"


def _point_state(p: Point) -> State:
    return State(p.tree, tuple(Affine.of(c) for c in p.path))


def _min_over(expr: Affine, cell: Cell) -> int | None:
    """Minimum over the cell; None when some negative coefficient makes it
    unbounded below."""
    v = expr.const
    for n, c in expr.coeffs:
        if c > 0:
            v += c * cell[n].first()
        else:
            return None
    return v


# ---------------------------------------------------------------------------
# symbolic matching: atoms either decide on the whole cell or request a split


class _Split(Exception):
    def __init__(self, kind: str, param: str, arg: int):
        self.kind = kind  # "tlo" | "congruence" | "pins"
        self.param = param
        self.arg = arg


class _Undecidable(Exception):
    def __init__(self, reason: str):
        self.reason = reason


def _decide_ge(e: Affine, k: int, cell: Cell) -> bool:
    if e.is_const:
        return e.const >= k
    for n, c in e.coeffs:
        if c < 0:
            if n == DIVERGENT:
                raise _Undecidable(f"negative divergent coefficient in {e}")
            if cell[n].lo >= PIN_BOUND:
                raise _Undecidable(f"unbounded negative coefficient in {e}")
            raise _Split("pins", n, PIN_BOUND)
    m = _min_over(e, cell)
    if m >= k:
        return True
    tc = e.coeff(DIVERGENT)
    if tc > 0:
        rest = e.const + sum(c * cell[n].first() for n, c in e.coeffs if n != DIVERGENT)
        dom = cell[DIVERGENT]
        need = -(-(k - rest) // (tc * dom.mod))  # in units of the domain step
        raise _Split("tlo", DIVERGENT, dom.first() + need * dom.mod)
    aux = [n for n, c in e.coeffs if c > 0]
    n = aux[0]
    c = e.coeff(n)
    rest = e.const + sum(cc * cell[nn].first() for nn, cc in e.coeffs if nn != n)
    raise _Split("pins", n, -(-(k - rest) // c))


def _decide_le(e: Affine, k: int, cell: Cell) -> bool:
    if e.is_const:
        return e.const <= k
    if e.coeff(DIVERGENT) > 0:
        return False  # fails for every sufficiently large t
    for n, c in e.coeffs:
        if c < 0:
            raise _Undecidable(f"negative coefficient in {e}")
    m = _min_over(e, cell)
    if m > k:
        return False
    aux = [n for n, _ in e.coeffs]
    raise _Split("pins", aux[0], k + 1)


def _decide_eq(e: Affine, k: int, cell: Cell) -> bool:
    if e.is_const:
        return e.const == k
    if e.coeff(DIVERGENT) != 0:
        return False  # pins finitely many t
    m = _min_over(e, cell)
    if m is not None and m > k:
        return False
    aux = [n for n, _ in e.coeffs]
    raise _Split("pins", aux[0], k + 1)


def _decide_mod(e: Affine, m: int, r: int, cell: Cell) -> bool:
    v = e.const % m
    for n, c in e.coeffs:
        dom = cell[n]
        if (c * dom.mod) % m != 0:
            raise _Split("congruence", n, m)
        v = (v + c * dom.first()) % m
    return v == r % m


def _try_rule(s: SystemSpec, state: State, cell: Cell, rule: Rule):
    """Match `rule` on the whole fragment. Returns an env on a tail-match,
    None for a definite non-match; raises _Split / _Undecidable otherwise."""
    env: dict[str, Affine | int] = {}
    var_expr: dict[str, Affine] = {}
    for pos, entry in enumerate(rule.pattern):
        e = state.exprs[pos]
        if isinstance(entry, int):
            if not _decide_eq(e, entry, cell):
                return None
        else:
            var_expr[entry] = e
            env[entry] = e
    for a in rule.guard:
        if a.kind == "seq":
            e = var_expr.get(a.var)
            if e is None:
                raise _Undecidable("sequence atom on unbound variable")
            if not e.is_const:
                raise _Undecidable(f"sequence atom on parametric coordinate {e}")
            idx = s.seqs[a.seq].index_of(e.const - a.offset)
            if idx is None:
                return None
            env[a.binder] = idx
            continue
        e = var_expr.get(a.var)
        if e is not None:
            if a.kind == "ge":
                if not _decide_ge(e, a.a, cell):
                    return None
            elif a.kind == "le":
                if not _decide_le(e, a.a, cell):
                    return None
            else:
                if not _decide_mod(e, a.a, a.b, cell):
                    return None
    for a in rule.guard:  # binder constraints bind after seq atoms
        if a.kind == "seq" or a.var in var_expr:
            continue
        v = env.get(a.var)
        if not isinstance(v, int):
            raise _Undecidable(f"constraint on unbound binder {a.var}")
        if a.kind == "ge" and v < a.a:
            return None
        if a.kind == "le" and v > a.a:
            return None
        if a.kind == "mod" and v % a.a != a.b:
            return None
    return env


def _image_state(s: SystemSpec, rule: Rule, env) -> State | None:
    coords = []
    for e in rule.image:
        if isinstance(e, SeqTerm):
            idx = e.index.subst(env)
            if not idx.is_const:
                return None
            coords.append(Affine.of(s.seqs[e.seq].value(idx.const) + e.plus))
        else:
            coords.append(e.subst(env))
    return State(rule.dst, tuple(coords))


def _split_fragments(state: State, cell: Cell, trace, meta, sp: _Split):
    """Partition a fragment per a split request. Yields (state, cell, trace,
    meta). For 'tlo' the sub-threshold part is dropped (finitely many t)."""
    if sp.kind == "tlo":
        nc = dict(cell)
        nc[DIVERGENT] = nc[DIVERGENT].with_lo(sp.arg)
        yield (state, nc, trace, meta)
        return
    dom = cell[sp.param]
    if sp.kind == "congruence":
        for nd in dom.refined(sp.arg):
            nc = dict(cell)
            nc[sp.param] = nd
            yield (state, nc, trace, meta)
        return
    # pins
    bound = max(sp.arg, dom.first() + 1)
    pins = [v for v in dom.values(PIN_BOUND) if v < bound]
    for v in pins[:PIN_BOUND]:
        env = {sp.param: v}
        nc = {k: d for k, d in cell.items() if k != sp.param}
        yield (state.subst(env), nc, [st.subst(env) for st in trace], list(meta))
    nc = dict(cell)
    nc[sp.param] = dom.with_lo((pins[-1] + 1) if pins else dom.lo)
    yield (state, nc, trace, meta)


# ---------------------------------------------------------------------------
# certificates


def _drift_stable(rule: Rule, delta: tuple[int, ...]) -> bool:
    var_of: dict[str, int] = {}
    for i, e in enumerate(rule.pattern):
        if isinstance(e, str):
            var_of[e] = i
        elif delta[i] != 0:
            return False
    for a in rule.guard:
        pos = var_of.get(a.var)
        if pos is None or delta[pos] == 0:
            continue
        if a.kind in ("le", "seq"):
            return False
        if a.kind == "mod" and delta[pos] % a.a != 0:
            return False
    return True


def _classify_pair(si: State, sj: State):
    """cycle / drift / single-parameter descent between same-shape states."""
    delta = tuple(b - a for a, b in zip(si.consts(), sj.consts()))
    if all(c == 0 for c in delta):
        return ("cycle", None)
    if all(c >= 0 for c in delta):
        return ("drift", delta)
    params = sorted({n for e in si.exprs for n, _ in e.coeffs},
                    key=lambda n: (n != DIVERGENT, n))
    for p in params:
        vec = tuple(e.coeff(p) for e in si.exprs)
        if all(v == 0 for v in vec):
            continue
        ss = None
        ok = True
        for dv, cv in zip(delta, vec):
            if cv == 0:
                if dv != 0:
                    ok = False
                    break
            else:
                if dv % cv:
                    ok = False
                    break
                q = dv // cv
                if ss is None:
                    ss = q
                elif ss != q:
                    ok = False
                    break
        if ok and ss is not None and ss < 0:
            return ("descent", (p, -ss))
    return None


@dataclass
class Branch:
    kind: str  # concrete | cycle | escape | descent | undecided
    trace: list[State]
    rules: list[Rule]
    cell: Cell
    i: int = 0
    period: int = 0
    deltas: tuple[tuple[int, ...], ...] = ()
    param: str = ""
    d: int = 0
    point: Point | None = None
    j: int = 0
    reason: str = ""
    base_cache: dict = field(default_factory=dict)


class _Frag:
    __slots__ = ("state", "cell", "trace", "rules", "pending")

    def __init__(self, state, cell, trace, rules):
        self.state = state
        self.cell = cell
        self.trace = trace
        self.rules = rules
        self.pending = None


class FamilyAnalysis:
    """Symbolic analysis of one parametric family against one system."""

    def __init__(self, s: SystemSpec, state: State, cell: Cell, depth: int = 0):
        self.s = s
        self.cell = cell
        self.depth = depth
        self.branches: list[Branch] = []
        self.undecided = False
        self._value_cache: dict = {}
        if depth > 4:
            self.undecided = True
            return
        self._run(state, cell)
        if any(b.kind == "undecided" for b in self.branches):
            self.undecided = True

    # -- execution -----------------------------------------------------------

    def _run(self, state: State, cell: Cell):
        frags = [_Frag(state, cell, [state], [])]
        budget = MAX_FRAGMENTS
        while frags:
            budget -= 1
            if budget < 0:
                for f in frags:
                    self.branches.append(Branch("undecided", f.trace, f.rules,
                                                f.cell, reason="fragment budget"))
                return
            self._drive(frags.pop(0), frags)

    def _drive(self, f: _Frag, frags: list):
        while True:
            if f.state.is_const():
                self.branches.append(Branch("concrete", f.trace, f.rules, f.cell,
                                            point=f.state.point(),
                                            j=len(f.trace) - 1))
                return
            if len(f.trace) > MAX_STEPS:
                self.branches.append(Branch("undecided", f.trace, f.rules, f.cell,
                                            reason="step budget"))
                return
            # one symbolic application
            rules = self.s.bucket(f.state.tree, len(f.state.exprs))
            applied = False
            for rule in rules:
                try:
                    env = _try_rule(self.s, f.state, f.cell, rule)
                except _Split as sp:
                    for st, nc, tr, rl in _split_fragments(f.state, f.cell,
                                                           f.trace, f.rules, sp):
                        frags.append(_Frag(st, nc, list(tr), list(rl)))
                    return
                except _Undecidable as un:
                    self.branches.append(Branch("undecided", f.trace, f.rules,
                                                f.cell, reason=un.reason))
                    return
                if env is None:
                    continue
                nxt = _image_state(self.s, rule, env)
                if nxt is None:
                    self.branches.append(Branch("undecided", f.trace, f.rules,
                                                f.cell,
                                                reason="parametric sequence index"))
                    return
                f.state = nxt
                f.trace.append(nxt)
                f.rules.append(rule)
                applied = True
                break
            if not applied:
                self.branches.append(Branch("undecided", f.trace, f.rules, f.cell,
                                            reason="no rule matches symbolic cell"))
                return
            if self._certify(f):
                return

    def _certify(self, f: _Frag) -> bool:
        j = len(f.trace) - 1
        sj = f.trace[j]
        sig = sj.coeff_sig()
        for i in range(j):
            if f.trace[i].coeff_sig() != sig:
                continue
            cls = _classify_pair(f.trace[i], sj)
            if cls is None:
                continue
            kind, data = cls
            if kind == "cycle":
                self.branches.append(Branch("cycle", f.trace, f.rules, f.cell,
                                            i=i, period=j - i))
                return True
            if kind == "descent":
                p, d = data
                self.branches.append(Branch("descent", f.trace, f.rules, f.cell,
                                            i=i, period=j - i, param=p, d=d))
                return True
            if kind == "drift" and f.pending is None:
                f.pending = (i, j - i)
        if f.pending is not None:
            i, sigma = f.pending
            if j >= i + 2 * sigma:
                deltas = []
                ok = True
                for r in range(sigma):
                    a, b = f.trace[i + r], f.trace[i + sigma + r]
                    if a.coeff_sig() != b.coeff_sig():
                        ok = False
                        break
                    cl = _classify_pair(a, b)
                    if cl is None or cl[0] != "drift":
                        ok = False
                        break
                    if not _drift_stable(f.rules[i + r], cl[1]):
                        ok = False
                        break
                    deltas.append(cl[1])
                if ok:
                    self.branches.append(Branch("escape", f.trace, f.rules,
                                                f.cell, i=i, period=sigma,
                                                deltas=tuple(deltas)))
                    return True
                f.pending = None
        return False

    # -- values ----------------------------------------------------------------

    def modulus(self) -> int:
        m = 1
        for b in self.branches:
            if b.kind == "concrete":
                try:
                    m = lcm(m, resolution_modulus(self.s, b.point))
                except UndecidedOrbitError:
                    self.undecided = True
            elif b.kind in ("cycle", "escape"):
                m = lcm(m, b.period)
            elif b.kind == "descent":
                for _tstar, ba in self._descent_bases(b).values():
                    if isinstance(ba, FamilyAnalysis):
                        m = lcm(m, ba.modulus())
                        if ba.undecided:
                            self.undecided = True
                    else:
                        try:
                            m = lcm(m, resolution_modulus(self.s, ba))
                        except UndecidedOrbitError:
                            self.undecided = True
            if m > MODULUS_CAP:
                self.undecided = True
                return 1
        return m

    def _descent_bases(self, b: Branch):
        got = b.base_cache.get("bases")
        if got is not None:
            return got
        dom = b.cell.get(b.param, Domain(0))
        P = lcm(dom.mod, b.d)
        lo = dom.first()
        bases = {}
        for rr in range(P // dom.mod):
            rho = (dom.rem + dom.mod * rr) % P
            tstar = lo + ((rho - lo) % b.d)
            base_state = b.trace[b.i].subst({b.param: tstar})
            if base_state.is_const():
                bases[rho] = (tstar, base_state.point())
            else:
                nc = {k: d for k, d in b.cell.items() if k != b.param}
                bases[rho] = (tstar, FamilyAnalysis(self.s, base_state, nc,
                                                    self.depth + 1))
        b.base_cache["bases"] = bases
        return bases

    def values(self, G: int, l: int) -> list[State] | None:
        """All value expressions of f^p over the family for p in (G*k+l)*,
        or None when some branch is undecided."""
        ck = (G, l)
        if ck in self._value_cache:
            return self._value_cache[ck]
        out: list[State] = []
        result = out
        for b in self.branches:
            vs = self._branch_values(b, G, l)
            if vs is None:
                result = None
                break
            out.extend(vs)
        self._value_cache[ck] = result
        return result

    def _branch_values(self, b: Branch, G: int, l: int) -> list[State] | None:
        if b.kind == "undecided":
            return None
        if b.kind == "concrete":
            r = (l - b.j) % G
            try:
                civ = class_iterate(self.s, b.point, ResidueClass(G, r))
            except UndecidedOrbitError:
                return None
            return [_point_state(p) for _, p in civ.entries]
        if b.kind == "cycle":
            n = b.period
            e = l % n
            while e < b.i:
                e += n
            return [b.trace[e]]
        if b.kind == "escape":
            r = (l - b.i) % b.period
            st = b.trace[b.i + r]
            delta = b.deltas[r]
            cut = next(k for k, dv in enumerate(delta) if dv > 0)
            return [State(st.tree, st.exprs[:cut])]
        # descent: class shift of `period` per parameter unit d
        out: list[State] = []
        dom = b.cell.get(b.param, Domain(0))
        P = lcm(dom.mod, b.d)
        step = P // b.d
        for rho, (tstar, base) in self._descent_bases(b).items():
            attained = set()
            r0 = (l - b.i) % G
            for k in range(G):
                attained.add((r0 - b.period * step * k) % G)
            # members of this residue sit at u = 0, step, 2*step, ... units
            # above the base; exponent l needs class (l - i - period*u) at it.
            for r in sorted(attained):
                if isinstance(base, FamilyAnalysis):
                    vs = base.values(G, r)
                    if vs is None:
                        return None
                    out.extend(vs)
                else:
                    try:
                        civ = class_iterate(self.s, base, ResidueClass(G, r))
                    except UndecidedOrbitError:
                        return None
                    out.extend(_point_state(p) for _, p in civ.entries)
        return out

    # -- guaranteed closure members (all-fixed classifier) ---------------------

    def guaranteed_periodic(self, bounds=(2048, 64)) -> tuple[list[Point], bool]:
        """Concrete periodic points certified to lie in the orbit closure of
        every instance of some cofinal subfamily, plus a decidedness flag."""
        pts: list[Point] = []
        decided = True

        def add_from(z: Point):
            nonlocal decided
            try:
                cl = orbit_closure(self.s, z, *bounds)
            except UndecidedOrbitError:
                decided = False
                return
            for p in cl.periodic_members(self.s, bounds):
                if p not in pts:
                    pts.append(p)

        for b in self.branches:
            if b.kind == "undecided":
                decided = False
                continue
            for st in b.trace:
                if st.is_const():
                    add_from(st.point())
                elif not any(e.coeff(DIVERGENT) for e in st.exprs):
                    aux = {n for e in st.exprs for n, _ in e.coeffs}
                    for env in _aux_probes(b.cell, aux, 3):
                        z = st.subst(env)
                        if z.is_const():
                            add_from(z.point())
            if b.kind == "escape":
                for r in range(b.period):
                    st = b.trace[b.i + r]
                    cut = next(k for k, dv in enumerate(b.deltas[r]) if dv > 0)
                    node = State(st.tree, st.exprs[:cut])
                    if node.is_const():
                        add_from(node.point())
            if b.kind == "descent":
                for _rho, (_tstar, base) in self._descent_bases(b).items():
                    if isinstance(base, FamilyAnalysis):
                        sub, subdec = base.guaranteed_periodic(bounds)
                        decided = decided and subdec
                        for p in sub:
                            if p not in pts:
                                pts.append(p)
                    else:
                        add_from(base)
        return pts, decided


def _aux_probes(cell: Cell, names, count):
    doms = [(n, cell.get(n, Domain(0)).values(count)) for n in sorted(names)]
    for combo in itertools.product(*(vs for _, vs in doms)):
        yield {n: v for (n, _), v in zip(doms, combo)}


# ---------------------------------------------------------------------------
# family enumeration, limits, continuity assembly


def family_templates(s: SystemSpec, a: Point) -> list[tuple[State, Cell]]:
    height = s.space.height(a.tree)
    out = []
    for extra in range(1, height - len(a.path) + 1):
        entries = [Affine.of(c) for c in a.path]
        entries.append(Affine.var(DIVERGENT))
        cell: Cell = {DIVERGENT: Domain(0)}
        for k in range(extra - 1):
            name = f"w{k + 1}"
            entries.append(Affine.var(name))
            cell[name] = Domain(0)
        out.append((State(a.tree, tuple(entries)), cell))
    return out


def _value_limit(v: State):
    """('point', Point): limit of the value family; ('diagonal', State) when
    the value depends on an unconstrained auxiliary."""
    prefix: list[int] = []
    for e in v.exprs:
        tc = e.coeff(DIVERGENT)
        aux = [n for n, _ in e.coeffs if n != DIVERGENT]
        if aux:
            return ("diagonal", v)
        if tc != 0:
            return ("point", Point(v.tree, tuple(prefix)))
        prefix.append(e.const)
    return ("point", Point(v.tree, tuple(prefix)))


def _family_repr(state: State, cell: Cell) -> EscapeFamily:
    doms = tuple((n, (d.lo, d.mod, d.rem)) for n, d in sorted(cell.items()))
    return EscapeFamily(state.tree, state.exprs, doms)


def _cached_analyses(s: SystemSpec, a: Point) -> list:
    """Lazily built FamilyAnalysis list per probed point."""
    cache = s.caches.setdefault("families", {})
    slot = cache.get(a)
    if slot is None:
        slot = {"templates": family_templates(s, a), "built": []}
        cache[a] = slot
    return slot


def continuity_analysis(s: SystemSpec, cls, a: Point,
                        instance_budget: int = 25) -> ContinuityReport:
    if cls == BASE_MAP:
        expected = apply_map(s, a)
        verdict = _base_verdict(s, a, family_templates(s, a), expected)
        return ContinuityReport(a, ((None, verdict),))

    try:
        res_a = resolution_modulus(s, a)
    except UndecidedOrbitError as e:
        v = ContinuityVerdict("undecided",
                              reason=f"orbit of {a} undecided ({e.steps} steps)")
        return ContinuityReport(a, ((cls, v),))

    slot = _cached_analyses(s, a)
    templates = slot["templates"]
    built: list = slot["built"]

    while True:
        G = lcm(cls.mod, res_a)
        for an in built:
            G = lcm(G, an.modulus())
        if G > MODULUS_CAP:
            v = ContinuityVerdict("undecided", reason="resolution modulus exceeds cap")
            return ContinuityReport(a, ((cls, v),))
        entries = []
        all_final = True
        for l in range(cls.rem, G, cls.mod):
            rc = ResidueClass(G, l)
            expected = class_iterate(s, a, rc).single()
            verdict = _class_verdict(s, built, templates, G, l, expected)
            if not verdict.is_discontinuous:
                all_final = False
            entries.append((rc, verdict))
        if all_final or len(built) == len(templates):
            return ContinuityReport(a, tuple(entries))
        st, cell = templates[len(built)]
        built.append(FamilyAnalysis(s, st, cell))


def _class_verdict(s, built, templates, G, l, expected) -> ContinuityVerdict:
    undecided_reason = None
    for an, (st, cell) in zip(built, templates):
        vs = an.values(G, l)
        if vs is None:
            if undecided_reason is None:
                reasons = "; ".join(sorted({b.reason for b in an.branches
                                            if b.kind == "undecided"})) or "undecided"
                undecided_reason = f"family {st.render()}: {reasons}"
            continue
        lims = []
        for v in vs:
            kind, data = _value_limit(v)
            if kind == "diagonal":
                return ContinuityVerdict(
                    "discontinuous", witness=_family_repr(st, cell),
                    witness_limit=f"diagonal {data.render()}", expected=expected)
            if data not in lims:
                lims.append(data)
        bad = [p for p in lims if p != expected]
        if bad or len(lims) > 1:
            return ContinuityVerdict(
                "discontinuous", witness=_family_repr(st, cell),
                witness_limit=bad[0] if bad else lims[0], expected=expected)
    if len(built) < len(templates):
        return ContinuityVerdict("undecided", reason="families pending")
    if undecided_reason:
        return ContinuityVerdict("undecided", reason=undecided_reason)
    return ContinuityVerdict("continuous", expected=expected)


def _base_verdict(s: SystemSpec, a: Point, templates, expected: Point) -> ContinuityVerdict:
    undecided = None
    for st, cell in templates:
        outcomes = _one_step_images(s, st, cell)
        if outcomes is None:
            if undecided is None:
                undecided = f"family {st.render()}"
            continue
        for img, icell in outcomes:
            kind, data = _value_limit(img)
            if kind == "diagonal":
                return ContinuityVerdict(
                    "discontinuous", witness=_family_repr(st, icell),
                    witness_limit=f"diagonal {data.render()}", expected=expected)
            if data != expected:
                return ContinuityVerdict(
                    "discontinuous", witness=_family_repr(st, icell),
                    witness_limit=data, expected=expected)
    if undecided:
        return ContinuityVerdict("undecided", reason=undecided)
    return ContinuityVerdict("continuous", expected=expected)


def _one_step_images(s: SystemSpec, state: State, cell: Cell):
    out = []
    work = [(state, cell)]
    guard = 0
    while work:
        guard += 1
        if guard > MAX_FRAGMENTS:
            return None
        st, c = work.pop(0)
        if st.is_const():
            out.append((_point_state(apply_map(s, st.point())), c))
            continue
        rules = s.bucket(st.tree, len(st.exprs))
        progressed = False
        for rule in rules:
            try:
                env = _try_rule(s, st, c, rule)
            except _Split as sp:
                for nst, nc, _tr, _rl in _split_fragments(st, c, [], [], sp):
                    work.append((nst, nc))
                progressed = True
                break
            except _Undecidable:
                return None
            if env is None:
                continue
            img = _image_state(s, rule, env)
            if img is None:
                return None
            out.append((img, c))
            progressed = True
            break
        if not progressed:
            return None
    return out


# ---------------------------------------------------------------------------
# closure candidates for the all-accumulation-points-fixed classifier


def family_closure_candidates(s: SystemSpec, a: Point, search_depth: int):
    """(family, periodic b != a) witnesses with b certified to lie in the
    orbit closure of every instance of a cofinal subfamily converging to a;
    plus a flag telling whether every family branch was decided."""
    witnesses = []
    all_decided = True
    for st, cell in family_templates(s, a):
        an = FamilyAnalysis(s, st, cell)
        pts, decided = an.guaranteed_periodic()
        all_decided = all_decided and decided and not an.undecided
        for b in sorted(pts):
            if b == a:
                continue
            fam = _family_repr(st, cell)
            if _probe_candidate(s, fam, b, search_depth):
                witnesses.append((fam, b))
                return witnesses, all_decided
    return witnesses, all_decided


def _probe_candidate(s: SystemSpec, fam: EscapeFamily, b: Point, depth: int) -> bool:
    """Concrete cross-check on small instances. Cofinal subfamilies may skip
    small t, so require presence in at least half the decided probes."""
    env = {n: 0 for n in fam.aux_names()}
    hits = total = 0
    for tv in fam.t_values(max(depth, 4)):
        x = fam.instance({**env, DIVERGENT: tv})
        try:
            cl = orbit_closure(s, x, 4096, 64)
        except UndecidedOrbitError:
            continue
        total += 1
        if cl.contains(b):
            hits += 1
    return total > 0 and hits * 2 >= total
