"""The .dsk rule-system language: parser, printer, and map application.

A system presents a continuous self-map of a forest space as guarded rewrite
rules on point addresses. Patterns are fixed-length (one rule bucket per tree
and depth); guards are conjunctions of univariate atoms; images are integer
affine expressions over pattern variables and sequence binders, or terms of a
declared sequence. See GRAMMAR.md for the exact grammar.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterator

from .affine import Affine
from .errors import (
    CoverageGapError,
    DerivedNotInvariantError,
    MalformedPointError,
    ParseError,
)
from .sequences import SeqDef
from .space import Point, SpaceSpec, TreeSpec

# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class GuardAtom:
    kind: str  # 'ge' | 'le' | 'mod' | 'seq'
    var: str
    a: int = 0  # ge/le bound; mod modulus
    b: int = 0  # mod remainder
    seq: str = ""
    binder: str = ""
    offset: int = 0  # seq: var == seq(binder) + offset

    def render(self) -> str:
        if self.kind == "ge":
            return f"{self.var} >= {self.a}"
        if self.kind == "le":
            return f"{self.var} <= {self.a}"
        if self.kind == "mod":
            return f"{self.var} % {self.a} == {self.b}"
        s = f"{self.var} in {self.seq}({self.binder})"
        if self.offset > 0:
            s += f" + {self.offset}"
        elif self.offset < 0:
            s += f" - {-self.offset}"
        return s


@dataclass(frozen=True)
class SeqTerm:
    """seq(name) evaluated at an affine index, plus a constant."""

    seq: str
    index: Affine
    plus: int = 0

    def render(self) -> str:
        s = f"{self.seq}({self.index})"
        if self.plus > 0:
            s += f"+{self.plus}"
        elif self.plus < 0:
            s += str(self.plus)
        return s


ImageExpr = object  # Affine | SeqTerm


@dataclass(frozen=True)
class Rule:
    index: int
    src: str
    pattern: tuple[object, ...]  # int | str (variable name)
    guard: tuple[GuardAtom, ...]
    dst: str
    image: tuple[ImageExpr, ...]

    def pattern_vars(self) -> tuple[str, ...]:
        return tuple(e for e in self.pattern if isinstance(e, str))

    def binders(self) -> tuple[str, ...]:
        return tuple(a.binder for a in self.guard if a.kind == "seq")

    def render(self) -> str:
        items = [str(e) for e in self.pattern]
        if self.guard:
            tail = ", ".join(a.render() for a in self.guard)
            if items:
                items[-1] = f"{items[-1]} | {tail}"
            else:  # guards without variables cannot arise, but be safe
                items = [f"| {tail}"]
        img = []
        for e in self.image:
            img.append(e.render() if isinstance(e, SeqTerm) else str(e))
        return f"rule {self.src}({', '.join(items)}) -> {self.dst}({', '.join(img)})"


@dataclass
class SystemSpec:
    name: str
    ordered: bool
    space: SpaceSpec
    seqs: dict[str, SeqDef]
    rules: tuple[Rule, ...]
    expect: dict[str, str] = field(default_factory=dict)
    _buckets: dict = field(default_factory=dict, repr=False)
    _compiled: dict = field(default_factory=dict, repr=False)
    caches: dict = field(default_factory=dict, repr=False)

    def signature(self):
        return (
            self.name,
            self.ordered,
            self.space,
            tuple(sorted((s.name, s.kind, s.forcing, s.init) for s in self.seqs.values())),
            self.rules,
            tuple(sorted(self.expect.items())),
        )

    def bucket(self, tree: str, depth: int) -> list[Rule]:
        key = (tree, depth)
        b = self._buckets.get(key)
        if b is None:
            b = [r for r in self.rules if r.src == tree and len(r.pattern) == depth]
            self._buckets[key] = b
        return b

    def compiled(self, rule: Rule) -> "_CompiledRule":
        c = self._compiled.get(rule.index)
        if c is None:
            c = _CompiledRule(rule, self.seqs)
            self._compiled[rule.index] = c
        return c

    def has_seq_guards(self) -> bool:
        return any(a.kind == "seq" for r in self.rules for a in r.guard)


# ---------------------------------------------------------------------------
# matching and application


class _CompiledRule:
    __slots__ = ("rule", "consts", "slots", "plain", "seq_atoms", "binder_atoms", "image")

    def __init__(self, rule: Rule, seqs: dict[str, SeqDef]):
        self.rule = rule
        self.consts = [(i, e) for i, e in enumerate(rule.pattern) if isinstance(e, int)]
        self.slots = [(i, e) for i, e in enumerate(rule.pattern) if isinstance(e, str)]
        pvars = set(rule.pattern_vars())
        self.plain = [a for a in rule.guard if a.kind != "seq" and a.var in pvars]
        self.seq_atoms = [(a, seqs[a.seq]) for a in rule.guard if a.kind == "seq"]
        self.binder_atoms = [a for a in rule.guard if a.kind != "seq" and a.var not in pvars]
        self.image = []
        for e in rule.image:
            if isinstance(e, SeqTerm):
                self.image.append((seqs[e.seq], e.index, e.plus))
            else:
                self.image.append(e)

    def match(self, path: tuple[int, ...]) -> dict[str, int] | None:
        for i, c in self.consts:
            if path[i] != c:
                return None
        env: dict[str, int] = {}
        for i, name in self.slots:
            env[name] = path[i]
        for a in self.plain:
            v = env[a.var]
            if a.kind == "ge":
                if v < a.a:
                    return None
            elif a.kind == "le":
                if v > a.a:
                    return None
            elif v % a.a != a.b:
                return None
        for a, seq in self.seq_atoms:
            idx = seq.index_of(env[a.var] - a.offset)
            if idx is None:
                return None
            env[a.binder] = idx
        for a in self.binder_atoms:
            v = env[a.var]
            if a.kind == "ge":
                if v < a.a:
                    return None
            elif a.kind == "le":
                if v > a.a:
                    return None
            elif v % a.a != a.b:
                return None
        return env

    def apply(self, env: dict[str, int], dst: str) -> Point:
        coords = []
        for e in self.image:
            if isinstance(e, Affine):
                coords.append(e.eval(env))
            else:
                seq, idx, plus = e
                coords.append(seq.value(idx.eval(env)) + plus)
        if any(c < 0 for c in coords):
            raise CoverageGapError(Point(dst, tuple(coords)))
        return Point(dst, tuple(coords))


def matching_rules(s: SystemSpec, p: Point) -> list[Rule]:
    out = []
    for r in s.bucket(p.tree, len(p.path)):
        if s.compiled(r).match(p.path) is not None:
            out.append(r)
    return out


def apply_map(s: SystemSpec, p: Point) -> Point:
    """One application of the system's map. First matching rule wins (for
    validated unordered systems the match is unique)."""
    s.space.check_point(p)
    for r in s.bucket(p.tree, len(p.path)):
        cr = s.compiled(r)
        env = cr.match(p.path)
        if env is not None:
            return cr.apply(env, r.dst)
    raise CoverageGapError(p)


def iterate_map(s: SystemSpec, p: Point, n: int) -> Point:
    for _ in range(n):
        p = apply_map(s, p)
    return p


def restrict_to_derived(s: SystemSpec) -> SystemSpec:
    """The subsystem on the derived set X' (all heights reduced by one; trees
    of height 1 collapse to their top point). Keeps exactly the rules whose
    pattern is shorter than the source height; fails if any such rule maps an
    internal point to an isolated one."""
    new_trees = tuple(TreeSpec(t.id, t.height - 1) for t in s.space.trees)
    kept: list[Rule] = []
    for r in s.rules:
        if len(r.pattern) < s.space.height(r.src):
            if len(r.image) >= s.space.height(r.dst):
                raise DerivedNotInvariantError(r.render())
            kept.append(
                Rule(len(kept), r.src, r.pattern, r.guard, r.dst, r.image)
            )
    return SystemSpec(
        name=s.name + "_derived",
        ordered=s.ordered,
        space=SpaceSpec(new_trees),
        seqs=s.seqs,
        rules=tuple(kept),
    )


# ---------------------------------------------------------------------------
# tokenizer


_TOKEN_RE = re.compile(
    r"""
    (?P<WS>[ \t\r]+)
  | (?P<COMMENT>\#[^\n]*)
  | (?P<NEWLINE>\n)
  | (?P<STRING>"[^"\n]*")
  | (?P<NAME>[A-Za-z_]\w*)
  | (?P<INT>\d+)
  | (?P<OP>->|>=|<=|==|[{}(),|=%+\-*:;^])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Tok:
    kind: str
    val: str
    line: int
    col: int


def _tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        val = m.group()
        if kind == "NEWLINE":
            toks.append(Tok("NEWLINE", "\n", line, col))
            line += 1
            col = 1
        else:
            if kind not in ("WS", "COMMENT"):
                toks.append(Tok(kind, val, line, col))
            col += len(val)
        pos = m.end()
    toks.append(Tok("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, skip_nl: bool = True) -> Tok:
        j = self.i
        while skip_nl and self.toks[j].kind == "NEWLINE":
            j += 1
        return self.toks[j]

    def next(self, skip_nl: bool = True) -> Tok:
        while skip_nl and self.toks[self.i].kind == "NEWLINE":
            self.i += 1
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str, val: str | None = None, skip_nl: bool = True) -> Tok:
        t = self.next(skip_nl)
        if t.kind != kind or (val is not None and t.val != val):
            want = val or kind
            raise ParseError(f"expected {want!r}, got {t.val!r}", t.line, t.col)
        return t

    def accept(self, kind: str, val: str | None = None, skip_nl: bool = True) -> Tok | None:
        t = self.peek(skip_nl)
        if t.kind == kind and (val is None or t.val == val):
            return self.next(skip_nl)
        return None

    def err(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.col)

    # -- grammar -----------------------------------------------------------

    def parse(self) -> SystemSpec:
        self.expect("NAME", "system")
        name = self.expect("NAME").val
        ordered = bool(self.accept("NAME", "ordered"))
        if not (self.peek().kind == "NAME" and self.peek().val == "space"):
            raise self.err("no space declared")
        space = self.parse_space()
        seqs: dict[str, SeqDef] = {}
        while self.peek().kind == "NAME" and self.peek().val == "seq":
            sd = self.parse_seq()
            if sd.name in seqs:
                raise self.err(f"sequence {sd.name!r} declared twice")
            seqs[sd.name] = sd
        if not (self.peek().kind == "NAME" and self.peek().val == "rules"):
            raise self.err("no rules declared")
        rules = self.parse_rules(space, seqs)
        expect: dict[str, str] = {}
        if self.peek().kind == "NAME" and self.peek().val == "expect":
            expect = self.parse_expect()
        t = self.peek()
        if t.kind != "EOF":
            raise ParseError(f"trailing input {t.val!r}", t.line, t.col)
        return SystemSpec(name, ordered, space, seqs, rules, expect)

    def parse_space(self) -> SpaceSpec:
        self.expect("NAME", "space")
        self.expect("OP", "{")
        trees = []
        while not self.accept("OP", "}"):
            self.expect("NAME", "tree")
            tid = self.expect("NAME").val
            self.expect("NAME", "height")
            h = int(self.expect("INT").val)
            if h < 1:
                raise self.err("tree height must be >= 1")
            trees.append(TreeSpec(tid, h))
        if not trees:
            raise self.err("space needs at least one tree")
        try:
            return SpaceSpec(tuple(trees))
        except ValueError as e:
            raise self.err(str(e)) from None

    def parse_seq(self) -> SeqDef:
        self.expect("NAME", "seq")
        name = self.expect("NAME").val
        self.expect("OP", ":")
        # first clause: NAME '(' ('0' | 'n') ')' '=' ...
        n1 = self.expect("NAME").val
        if n1 != name:
            raise self.err(f"sequence clause names {n1!r}, expected {name!r}")
        self.expect("OP", "(")
        arg = self.next()
        self.expect("OP", ")")
        self.expect("OP", "=")
        if arg.kind == "INT":  # recurrence: a(0) = init ; a(n) = a(n-1) + poly
            if arg.val != "0":
                raise self.err("recurrence base case must be a(0)")
            neg = bool(self.accept("OP", "-"))
            init = int(self.expect("INT").val)
            if neg:
                init = -init
            self.expect("OP", ";")
            n2 = self.expect("NAME").val
            if n2 != name:
                raise self.err(f"sequence clause names {n2!r}")
            self.expect("OP", "(")
            self.expect("NAME", "n")
            self.expect("OP", ")")
            self.expect("OP", "=")
            self.expect("NAME", name)
            self.expect("OP", "(")
            self.expect("NAME", "n")
            self.expect("OP", "-")
            one = self.expect("INT")
            if one.val != "1":
                raise self.err("only first-order recurrences a(n-1) supported")
            self.expect("OP", ")")
            forcing = (0,)
            if self.accept("OP", "+"):
                forcing = self.parse_poly()
            sd = SeqDef(name, "recurrence", forcing, init)
        else:
            if arg.kind != "NAME" or arg.val != "n":
                raise self.err("sequence clause must be a(0)=... or a(n)=...")
            forcing = self.parse_poly()
            sd = SeqDef(name, "explicit", forcing)
        self._end_of_line()
        if not sd.check_increasing():
            raise self.err(f"sequence {name!r} is not strictly increasing")
        return sd

    def _end_of_line(self):
        t = self.peek(skip_nl=False)
        if t.kind not in ("NEWLINE", "EOF"):
            raise ParseError(f"unexpected {t.val!r} at end of line", t.line, t.col)

    def parse_poly(self) -> tuple[int, ...]:
        """Integer polynomial in n; terms INT | n | INT*n | n^K | INT*n^K."""
        coeffs: dict[int, int] = {}
        sign = 1
        while True:
            c, d = self.parse_poly_term()
            coeffs[d] = coeffs.get(d, 0) + sign * c
            if self.accept("OP", "+", skip_nl=False):
                sign = 1
            elif self.accept("OP", "-", skip_nl=False):
                sign = -1
            else:
                break
        deg = max(coeffs) if coeffs else 0
        return tuple(coeffs.get(d, 0) for d in range(deg + 1))

    def parse_poly_term(self) -> tuple[int, int]:
        t = self.next()
        if t.kind == "INT":
            c = int(t.val)
            if self.accept("OP", "*", skip_nl=False):
                self.expect("NAME", "n")
                d = 1
                if self.accept("OP", "^", skip_nl=False):
                    d = int(self.expect("INT").val)
                return c, d
            return c, 0
        if t.kind == "NAME" and t.val == "n":
            d = 1
            if self.accept("OP", "^", skip_nl=False):
                d = int(self.expect("INT").val)
            return 1, d
        raise ParseError(f"bad polynomial term {t.val!r}", t.line, t.col)

    def parse_rules(self, space: SpaceSpec, seqs: dict[str, SeqDef]) -> tuple[Rule, ...]:
        self.expect("NAME", "rules")
        self.expect("OP", "{")
        rules: list[Rule] = []
        while not self.accept("OP", "}"):
            rules.append(self.parse_rule(space, seqs, len(rules)))
        if not rules:
            raise self.err("rules block is empty")
        return tuple(rules)

    def parse_rule(self, space: SpaceSpec, seqs: dict[str, SeqDef], index: int) -> Rule:
        self.expect("NAME", "rule")
        src_t = self.expect("NAME")
        src = src_t.val
        try:
            src_h = space.height(src)
        except MalformedPointError:
            raise ParseError(f"unknown tree {src!r}", src_t.line, src_t.col) from None
        pattern, guard = self.parse_pattern()
        if len(pattern) > src_h:
            raise ParseError(
                f"pattern longer than tree height {src_h}", src_t.line, src_t.col
            )
        self.expect("OP", "->")
        dst_t = self.expect("NAME")
        dst = dst_t.val
        try:
            dst_h = space.height(dst)
        except MalformedPointError:
            raise ParseError(f"unknown tree {dst!r}", dst_t.line, dst_t.col) from None
        pvars = [e for e in pattern if isinstance(e, str)]
        if len(set(pvars)) != len(pvars):
            raise ParseError("repeated pattern variable", src_t.line, src_t.col)
        binders = [a.binder for a in guard if a.kind == "seq"]
        if len(set(binders)) != len(binders):
            raise ParseError("repeated sequence binder", src_t.line, src_t.col)
        seq_vars = [a.var for a in guard if a.kind == "seq"]
        if len(set(seq_vars)) != len(seq_vars):
            raise ParseError("two sequence binders on one variable", src_t.line, src_t.col)
        known = set(pvars) | set(binders)
        for a in guard:
            if a.var not in known:
                raise ParseError(f"guard references unknown variable {a.var!r}",
                                 src_t.line, src_t.col)
            if a.kind == "mod" and a.a < 2:
                raise ParseError("modulus must be >= 2", src_t.line, src_t.col)
            if a.kind == "seq" and a.seq not in seqs:
                raise ParseError(f"unknown sequence {a.seq!r}", src_t.line, src_t.col)
        image = self.parse_image(seqs, dst_t)
        if len(image) > dst_h:
            raise ParseError(f"image longer than tree height {dst_h}",
                             dst_t.line, dst_t.col)
        for e in image:
            names = e.index.params() if isinstance(e, SeqTerm) else e.params()
            for nm in names:
                if nm not in known:
                    raise ParseError(f"image references unknown variable {nm!r}",
                                     dst_t.line, dst_t.col)
        return Rule(index, src, tuple(pattern), tuple(guard), dst, tuple(image))

    def parse_pattern(self) -> tuple[list[object], list[GuardAtom]]:
        self.expect("OP", "(")
        entries: list[object] = []
        guard: list[GuardAtom] = []
        if self.accept("OP", ")"):
            return entries, guard
        in_guard = False
        while True:
            if in_guard and self._at_guard_atom():
                guard.append(self.parse_guard_atom())
            else:
                in_guard = False
                t = self.next()
                if t.kind == "INT":
                    entries.append(int(t.val))
                elif t.kind == "NAME":
                    entries.append(t.val)
                else:
                    raise ParseError(f"bad pattern entry {t.val!r}", t.line, t.col)
            if self.accept("OP", "|"):
                in_guard = True
                continue
            if self.accept("OP", ","):
                continue
            self.expect("OP", ")")
            break
        return entries, guard

    def _at_guard_atom(self) -> bool:
        t = self.peek()
        if t.kind != "NAME":
            return False
        j = self.i
        while self.toks[j].kind == "NEWLINE":
            j += 1
        j += 1
        while self.toks[j].kind == "NEWLINE":
            j += 1
        nxt = self.toks[j]
        return (nxt.kind == "OP" and nxt.val in (">=", "<=", "%")) or (
            nxt.kind == "NAME" and nxt.val == "in"
        )

    def parse_guard_atom(self) -> GuardAtom:
        var = self.expect("NAME").val
        t = self.next()
        if t.kind == "OP" and t.val == ">=":
            return GuardAtom("ge", var, int(self.expect("INT").val))
        if t.kind == "OP" and t.val == "<=":
            return GuardAtom("le", var, int(self.expect("INT").val))
        if t.kind == "OP" and t.val == "%":
            m = int(self.expect("INT").val)
            self.expect("OP", "==")
            r = int(self.expect("INT").val)
            return GuardAtom("mod", var, m, r)
        if t.kind == "NAME" and t.val == "in":
            seq = self.expect("NAME").val
            self.expect("OP", "(")
            binder = self.expect("NAME").val
            self.expect("OP", ")")
            offset = 0
            if self.accept("OP", "+"):
                offset = int(self.expect("INT").val)
            elif self.accept("OP", "-"):
                offset = -int(self.expect("INT").val)
            return GuardAtom("seq", var, seq=seq, binder=binder, offset=offset)
        raise ParseError(f"bad guard operator {t.val!r}", t.line, t.col)

    def parse_image(self, seqs: dict[str, SeqDef], where: Tok) -> list[ImageExpr]:
        self.expect("OP", "(")
        exprs: list[ImageExpr] = []
        if self.accept("OP", ")"):
            return exprs
        while True:
            exprs.append(self.parse_expr(seqs))
            if self.accept("OP", ","):
                continue
            self.expect("OP", ")")
            break
        return exprs

    def parse_expr(self, seqs: dict[str, SeqDef]) -> ImageExpr:
        """Affine over variables/binders, optionally one sequence term."""
        acc = Affine.of(0)
        seqterm: SeqTerm | None = None
        sign = 1
        while True:
            t = self.next()
            if t.kind == "INT":
                c = int(t.val)
                if self.accept("OP", "*"):
                    name = self.expect("NAME").val
                    acc = acc.add(Affine.var(name, sign * c))
                else:
                    acc = acc.add_const(sign * c)
            elif t.kind == "NAME":
                if self.peek().kind == "OP" and self.peek().val == "(" and t.val in seqs:
                    if seqterm is not None or sign != 1:
                        raise ParseError("at most one sequence term per expression",
                                         t.line, t.col)
                    self.expect("OP", "(")
                    idx = self.parse_expr(seqs)
                    if isinstance(idx, SeqTerm):
                        raise ParseError("nested sequence terms", t.line, t.col)
                    self.expect("OP", ")")
                    seqterm = SeqTerm(t.val, idx)
                else:
                    acc = acc.add(Affine.var(t.val, sign))
            else:
                raise ParseError(f"bad expression token {t.val!r}", t.line, t.col)
            if self.accept("OP", "+"):
                sign = 1
            elif self.accept("OP", "-"):
                sign = -1
            else:
                break
        if seqterm is not None:
            if acc.coeffs:
                raise ParseError("sequence term only combines with constants",
                                 where.line, where.col)
            return SeqTerm(seqterm.seq, seqterm.index, acc.const)
        return acc

    def parse_expect(self) -> dict[str, str]:
        self.expect("NAME", "expect")
        self.expect("OP", "{")
        out: dict[str, str] = {}
        while not self.accept("OP", "}"):
            key = self.expect("NAME").val
            self.expect("OP", "=")
            t = self.next()
            if t.kind == "STRING":
                out[key] = t.val[1:-1]
            elif t.kind in ("NAME", "INT"):
                out[key] = t.val
            else:
                raise ParseError(f"bad expect value {t.val!r}", t.line, t.col)
        return out


def parse_system(text: str) -> SystemSpec:
    """Parse a .dsk source. Deterministic; declaration order is preserved."""
    return _Parser(text).parse()


def pretty(s: SystemSpec) -> str:
    """Canonical textual form; parse(pretty(parse(x))) == parse(x)."""
    lines = [f"system {s.name}" + (" ordered" if s.ordered else "")]
    trees = "  ".join(f"tree {t.id} height {t.height}" for t in s.space.trees)
    lines.append(f"space {{ {trees} }}")
    for sd in s.seqs.values():

        def fmt_poly(coeffs: tuple[int, ...]) -> str:
            parts = []
            for d, c in enumerate(coeffs):
                if c == 0:
                    continue
                if d == 0:
                    parts.append(str(c))
                else:
                    base = "n" if d == 1 else f"n^{d}"
                    parts.append(base if c == 1 else f"{c}*{base}")
            return " + ".join(parts) if parts else "0"

        if sd.kind == "recurrence":
            lines.append(
                f"seq {sd.name} : {sd.name}(0) = {sd.init} ; "
                f"{sd.name}(n) = {sd.name}(n-1) + {fmt_poly(sd.forcing)}"
            )
        else:
            lines.append(f"seq {sd.name} : {sd.name}(n) = {fmt_poly(sd.forcing)}")
    lines.append("rules {")
    for r in s.rules:
        lines.append(f"  {r.render()}")
    lines.append("}")
    if s.expect:
        body = "  ".join(
            f'{k} = "{v}"' if not v.replace("_", "").isalnum() else f"{k} = {v}"
            for k, v in s.expect.items()
        )
        lines.append(f"expect {{ {body} }}")
    return "\n".join(lines) + "\n"
