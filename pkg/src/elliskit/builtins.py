"""Compiled-in example systems.

swap2, collapse2, collapse2b, omega3_transitive and omega3_cantor transcribe
published clause lists; marcher, descender and fixedline are constructed test
fixtures for the all-accumulation-points-fixed regime.
"""

from __future__ import annotations

from .dsl import SystemSpec, parse_system

SOURCES: dict[str, str] = {}

SOURCES["swap2"] = """\
system swap2
space { tree A height 1  tree B height 1 }
rules {
  rule A() -> B()
  rule B() -> A()
  rule A(n) -> B(n)
  rule B(n) -> A(n+1)
}
expect { transitive = true  classify = HOMEO_TO_X  star_size = 2 }
"""

SOURCES["collapse2"] = """\
system collapse2
space { tree A height 1  tree B height 1 }
rules {
  rule A() -> B()
  rule B() -> A()
  rule A(0) -> A(0)
  rule A(n | n >= 1) -> B(n-1)
  rule B(n) -> A(n)
}
expect { transitive = false  classify = COUNTABLY_INFINITE  star_size = 2 }
"""

SOURCES["collapse2b"] = """\
system collapse2b
space { tree A height 1  tree B height 1 }
rules {
  rule A() -> B()
  rule B() -> A()
  rule A(0) -> B()
  rule A(n | n >= 1) -> B(n-1)
  rule B(n) -> A(n)
}
expect { transitive = false  classify = COUNTABLY_INFINITE  star_size = 2 }
"""

# Height-3 transitive system with a dense orbit; the j >= 4 / j % 3 tracks
# encode the c_n = 2+3n index families of the source clause list.
SOURCES["omega3_transitive"] = """\
system omega3_transitive
space { tree D height 3 }
rules {
  rule D() -> D()
  rule D(n) -> D(n)
  rule D(0, 0) -> D()
  rule D(0, 1) -> D(0, 3)
  rule D(0, 2) -> D(0, 0)
  rule D(0, j | j >= 4, j % 3 == 1) -> D(0, j-3)
  rule D(0, j | j >= 5, j % 3 == 2) -> D(0, j-3)
  rule D(0, j | j >= 3, j % 3 == 0) -> D(0, j+3)
  rule D(k | k >= 1, j | j >= 1) -> D(k, j-1)
  rule D(k | k >= 1, 0) -> D(k-1)
  rule D(k | k >= 1, j | j >= 1, i) -> D(k, j-1, i+1)
  rule D(2, 0, i) -> D(1, i, 0)
  rule D(k | k >= 3, 0, i) -> D(k-1, i+1, 0)
  rule D(1, 0, i) -> D(0, 3*i+4, 0)
  rule D(0, 2, i) -> D(0, 0, i+1)
  rule D(0, j | j >= 5, j % 3 == 2, i) -> D(0, j-3, i+1)
  rule D(0, j | j >= 7, j % 3 == 1, i) -> D(0, j-3, i+1)
  rule D(0, j | j >= 3, j % 3 == 0, 0) -> D(0, j-1, 0)
  rule D(0, j | j >= 3, j % 3 == 0, i | i >= 1) -> D(0, j+3, i-1)
  rule D(0, 4, i) -> D(0, 1, i)
  rule D(0, 1, i) -> D(0, 3, i)
  rule D(0, 0, i) -> D(i+2, 0, 0)
}
expect { transitive = true  classify = HOMEO_TO_X }
"""

# Height-3 transitive system with periodic accumulation points of unbounded
# period; index blocks follow the quadratic sequence a(0)=0, a(n)=a(n-1)+n+1.
SOURCES["omega3_cantor"] = """\
system omega3_cantor ordered
space { tree D height 3 }
seq a : a(0) = 0 ; a(n) = a(n-1) + n + 1
rules {
  rule D() -> D()
  rule D(v | v in a(n)) -> D(v + n + 1)
  rule D(v | v >= 1) -> D(v - 1)
  rule D(0, 0) -> D()
  rule D(k | k in a(n), n >= 1, 0) -> D(k - n - 1)
  rule D(k | k in a(n), j | j >= 1) -> D(k + n + 1, j - 1)
  rule D(k | k >= 1, j) -> D(k - 1, j)
  rule D(0, 0, 0) -> D(1, 0, 0)
  rule D(0, 0, i | i >= 1) -> D(a(i), 0, 0)
  rule D(0, j | j >= 1, i) -> D(1, j - 1, i + 1)
  rule D(1, 0, i) -> D(0, 0, i + 1)
  rule D(1, j | j >= 1, i) -> D(0, j, i)
  rule D(k | k in a(n), n >= 1, j | j >= 1, i) -> D(k + n + 1, j - 1, i)
  rule D(k | k in a(n), n >= 1, 0, i) -> D(k - 1, i + 1, 0)
  rule D(k | k in a(n) + 1, n >= 1, j | j >= 1, i) -> D(k - 1, j, i)
  rule D(k | k in a(n) + 1, n >= 1, 0, i) -> D(k - 1, 0, i + 1)
  rule D(k | k >= 2, j, i) -> D(k - 1, j, i)
}
expect { transitive = true  classify = CANTOR_FLAG  period_family = "D(a(n))"  period_expr = "n+2" }
"""

SOURCES["marcher"] = """\
system marcher
space { tree C height 2 }
rules {
  rule C() -> C()
  rule C(k) -> C(k)
  rule C(k, i | i >= 1) -> C(k, i-1)
  rule C(k, 0) -> C(k+1, 0)
}
expect { transitive = false }
"""

SOURCES["descender"] = """\
system descender
space { tree C height 2 }
rules {
  rule C() -> C()
  rule C(k) -> C(k)
  rule C(k, i | i >= 1) -> C(k, i-1)
  rule C(k, 0) -> C(k, 0)
}
expect { transitive = false  classify = COUNTABLY_INFINITE  star_size = 1 }
"""

SOURCES["fixedline"] = """\
system fixedline
space { tree F height 1 }
rules {
  rule F() -> F()
  rule F(n) -> F(n+1)
}
expect { transitive = true  classify = HOMEO_TO_X  star_size = 1 }
"""

_cache: dict[str, SystemSpec] = {}


def builtin_names() -> list[str]:
    return list(SOURCES)


def get_builtin(name: str) -> SystemSpec:
    if name not in SOURCES:
        raise KeyError(f"unknown builtin {name!r}")
    if name not in _cache:
        _cache[name] = parse_system(SOURCES[name])
    return _cache[name]
