"""Phase spaces: finite forests of uniform-branching trees.

A tree of height r is a copy of the ordinal w^r + 1. A point is addressed
by a path of natural coordinates, outermost level first: the empty path is
the top of the tree, full-length paths are the isolated points (leaves).
Basic neighborhoods of an internal node s are the clopen sets
V_N(s) = {s} + union of the subtrees under children s^n with n >= N.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .affine import Affine
from .errors import MalformedPointError, NotAFamilyError

MAX_TREE_HEIGHT = 4


class Point(NamedTuple):
    tree: str
    path: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.tree}({','.join(str(c) for c in self.path)})"


@dataclass(frozen=True)
class TreeSpec:
    id: str
    height: int  # >= 1 for user-declared trees; 0 allowed for derived spaces

    def __post_init__(self):
        if not (0 <= self.height <= MAX_TREE_HEIGHT):
            raise ValueError(f"tree height {self.height} outside supported range")


@dataclass(frozen=True)
class SpaceSpec:
    trees: tuple[TreeSpec, ...]

    def __post_init__(self):
        if not self.trees:
            raise ValueError("space needs at least one tree")
        ids = [t.id for t in self.trees]
        if len(set(ids)) != len(ids):
            raise ValueError("tree ids must be unique")

    def tree(self, tid: str) -> TreeSpec:
        for t in self.trees:
            if t.id == tid:
                return t
        raise MalformedPointError(f"unknown tree id {tid!r}")

    def height(self, tid: str) -> int:
        return self.tree(tid).height

    def check_point(self, p: Point) -> None:
        h = self.height(p.tree)
        if len(p.path) > h:
            raise MalformedPointError(f"path of {p} longer than tree height {h}")
        if any(c < 0 for c in p.path):
            raise MalformedPointError(f"negative coordinate in {p}")


class NeighborhoodDepth(NamedTuple):
    """The basic neighborhood V_cutoff(node)."""

    node: Point
    cutoff: int


_POINT_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*\(\s*([^)]*)\)\s*$")


def parse_point(text: str) -> Point:
    m = _POINT_RE.match(text)
    if not m:
        raise MalformedPointError(f"bad point literal {text!r}")
    tid, inner = m.group(1), m.group(2).strip()
    if not inner:
        return Point(tid, ())
    try:
        coords = tuple(int(c.strip()) for c in inner.split(","))
    except ValueError:
        raise MalformedPointError(f"bad point literal {text!r}") from None
    if any(c < 0 for c in coords):
        raise MalformedPointError(f"negative coordinate in {text!r}")
    return Point(tid, coords)


def format_point(p: Point) -> str:
    return str(p)


def rank_of(space: SpaceSpec, p: Point) -> int:
    """Cantor-Bendixson rank: height - depth; 0 iff isolated."""
    space.check_point(p)
    return space.height(p.tree) - len(p.path)


def is_isolated(space: SpaceSpec, p: Point) -> bool:
    return rank_of(space, p) == 0


def parent(p: Point) -> Point:
    if not p.path:
        raise MalformedPointError(f"{p} has no parent")
    return Point(p.tree, p.path[:-1])


def in_neighborhood(member: Point, node: Point, cutoff: int) -> bool:
    """member in V_cutoff(node)? For isolated nodes this degenerates to equality
    (an isolated point's only basic neighborhood is the singleton)."""
    if member.tree != node.tree:
        return False
    np = node.path
    mp = member.path
    if mp == np:
        return True
    return len(mp) > len(np) and mp[: len(np)] == np and mp[len(np)] >= cutoff


# ---------------------------------------------------------------------------
# Ordinal codes (Cantor normal form restricted to exponents 0..MAX_TREE_HEIGHT)


@dataclass(frozen=True, order=False)
class OrdinalCode:
    """Coefficient vector for w^k terms, highest exponent first."""

    coeffs: tuple[int, ...]  # index i = coefficient of w^(len-1-i); normalized length

    def key(self) -> tuple[int, ...]:
        return self.coeffs

    def __lt__(self, other: "OrdinalCode") -> bool:
        return self.coeffs < other.coeffs

    def __le__(self, other: "OrdinalCode") -> bool:
        return self.coeffs <= other.coeffs

    def render(self) -> str:
        n = len(self.coeffs)
        parts = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            e = n - 1 - i
            if e == 0:
                parts.append(str(c))
            elif e == 1:
                parts.append(f"w*{c}")
            else:
                parts.append(f"w^{e}*{c}")
        return "+".join(parts) if parts else "0"

    def __str__(self) -> str:
        return self.render()


def _ordinal_add(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    """Ordinal addition on fixed-width coefficient vectors (highest first)."""
    n = len(a)
    # leading exponent of b
    lead = None
    for i, c in enumerate(b):
        if c != 0:
            lead = i
            break
    if lead is None:
        return a
    out = list(a)
    for i in range(lead + 1, n):
        out[i] = 0
    out[lead] += b[lead]
    for i in range(lead + 1, n):
        out[i] = b[i]
    return tuple(out)


def ordinal_code(space: SpaceSpec, p: Point) -> OrdinalCode:
    """Order-isomorphic code: within a height-r tree,
    code(p1..pm) = sum over w^(r-t) * p_t  +  w^(r-m); trees are concatenated
    in declaration order by ordinal addition of their w^r offsets."""
    space.check_point(p)
    width = MAX_TREE_HEIGHT + 1

    def within(tid: str, path: tuple[int, ...]) -> tuple[int, ...]:
        r = space.height(tid)
        v = [0] * width
        for t, c in enumerate(path, start=1):
            v[width - 1 - (r - t)] += c
        v[width - 1 - (r - len(path))] += 1
        return tuple(v)

    total = tuple([0] * width)
    for t in space.trees:
        if t.id == p.tree:
            total = _ordinal_add(total, within(p.tree, p.path))
            break
        off = [0] * width
        off[width - 1 - t.height] = 1
        total = _ordinal_add(total, tuple(off))
    return OrdinalCode(total)


def enumerate_truncation(space: SpaceSpec, depth: int) -> list[Point]:
    """All points with every coordinate < depth, plus the internal nodes over
    them, ordered by ordinal code (children before their parent)."""
    if depth < 1:
        raise ValueError("truncation depth must be >= 1")
    pts: list[Point] = []

    def emit(tid: str, height: int, prefix: tuple[int, ...]):
        if len(prefix) < height:
            for c in range(depth):
                emit(tid, height, prefix + (c,))
        pts.append(Point(tid, prefix))

    for t in space.trees:
        emit(t.id, t.height, ())
    return pts


# ---------------------------------------------------------------------------
# Escape families: parametric point sets with one divergent index


DIVERGENT = "t"


@dataclass(frozen=True)
class EscapeFamily:
    """Points tree(e_1, ..., e_m) where each entry is affine over the divergent
    variable t (exactly one entry, positive coefficient) and bound auxiliaries.
    Auxiliary constraints are kept as simple lower bounds / congruences by the
    producers; instances are concrete Points for admissible assignments."""

    tree: str
    entries: tuple[Affine, ...]
    # aux name -> (lo, mod, rem); the divergent variable's domain, if present
    # in the mapping, restricts admissible t values the same way.
    domains: tuple[tuple[str, tuple[int, int, int]], ...] = ()

    def domain(self, name: str) -> tuple[int, int, int]:
        for n, d in self.domains:
            if n == name:
                return d
        return (0, 1, 0)

    def t_index(self) -> int:
        idx = None
        for i, e in enumerate(self.entries):
            c = e.coeff(DIVERGENT)
            if c > 0:
                if idx is not None:
                    raise NotAFamilyError("divergent variable occurs twice")
                idx = i
            elif c < 0:
                raise NotAFamilyError("divergent variable must increase")
        if idx is None:
            raise NotAFamilyError("no divergent variable in family")
        return idx

    def aux_names(self) -> tuple[str, ...]:
        names: list[str] = []
        for e in self.entries:
            for n in e.params():
                if n != DIVERGENT and n not in names:
                    names.append(n)
        return tuple(names)

    def instance(self, env: dict[str, int]) -> Point:
        return Point(self.tree, tuple(e.eval(env) for e in self.entries))

    def t_values(self, count: int) -> list[int]:
        lo, mod, rem = self.domain(DIVERGENT)
        v = lo + ((rem - lo) % mod)
        out = []
        while len(out) < count:
            out.append(v)
            v += mod
        return out

    def instances(self, count: int, aux_env: dict[str, int] | None = None) -> list[Point]:
        env = dict(aux_env or {})
        missing = [n for n in self.aux_names() if n not in env]
        if missing:
            raise NotAFamilyError(f"unbound auxiliaries {missing}")
        out = []
        for tv in self.t_values(count):
            env[DIVERGENT] = tv
            out.append(self.instance(env))
        return out

    def __str__(self) -> str:
        return f"{self.tree}({','.join(str(e) for e in self.entries)})"


@dataclass(frozen=True)
class ParametricLimit:
    """A family of limit nodes: the prefix before the divergent entry still
    contains auxiliaries."""

    tree: str
    entries: tuple[Affine, ...]

    def __str__(self) -> str:
        return f"{self.tree}({','.join(str(e) for e in self.entries)})"


def family_from_point(p: Point, position: int) -> EscapeFamily:
    """Replace the coordinate at `position` with the divergent variable."""
    entries = tuple(
        Affine.var(DIVERGENT) if i == position else Affine.of(c)
        for i, c in enumerate(p.path)
    )
    return EscapeFamily(p.tree, entries)


def limit_of_family(space: SpaceSpec, fam: EscapeFamily) -> Point | ParametricLimit:
    """The node under which the family's instances eventually accumulate:
    the template prefix strictly before the divergent entry. Entries after it
    are irrelevant to the limit; auxiliaries in the prefix make it parametric."""
    idx = fam.t_index()
    prefix = fam.entries[:idx]
    if all(e.is_const for e in prefix):
        p = Point(fam.tree, tuple(e.const for e in prefix))
        space.check_point(p)
        return p
    return ParametricLimit(fam.tree, prefix)
