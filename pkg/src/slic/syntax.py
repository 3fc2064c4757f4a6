"""Abstract syntax, level lattices, and the read/write/sample analyses.

A program is a typing environment (name -> base type + level slot) paired
with a statement. Levels come in two flavours: the execution-phase chain
DATA <= MODEL <= GENQUANT, and the lower semi-lattice L1 <= L2, L1 <= L3
used for conditional-independence analysis. Both are driven through the
same code via a small Lattice object.

All AST values are immutable after construction; every function here is
pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union


# ---------------------------------------------------------------------------
# Levels


@dataclass(frozen=True)
class Level:
    name: str
    rank: int  # position used for deterministic ordering only

    def __repr__(self) -> str:
        return self.name


DATA = Level("data", 0)
MODEL = Level("model", 1)
GENQUANT = Level("genquant", 2)

L1 = Level("l1", 0)
L2 = Level("l2", 1)
L3 = Level("l3", 2)


class Lattice:
    """A finite level order with lub where it exists.

    `chain` lattices are totally ordered; the CI lattice has one bottom and
    two incomparable tops, so lub(L2, L3) is undefined (returned as None).
    """

    def __init__(self, name: str, levels: list[Level], order: set[tuple[Level, Level]]):
        self.name = name
        self.levels = levels
        self._leq = order

    def leq(self, a: Level, b: Level) -> bool:
        return a == b or (a, b) in self._leq

    def lt(self, a: Level, b: Level) -> bool:
        return a != b and self.leq(a, b)

    def lub2(self, a: Level, b: Level) -> Optional[Level]:
        if self.leq(a, b):
            return b
        if self.leq(b, a):
            return a
        uppers = [l for l in self.levels if self.leq(a, l) and self.leq(b, l)]
        least = [u for u in uppers if all(self.leq(u, v) for v in uppers)]
        return least[0] if least else None

    def lub(self, ls: Iterable[Level]) -> Optional[Level]:
        out = self.bottom
        for l in ls:
            nxt = self.lub2(out, l)
            if nxt is None:
                return None
            out = nxt
        return out

    @property
    def bottom(self) -> Level:
        return self.levels[0]

    def above(self, l: Level) -> list[Level]:
        """Levels strictly above l."""
        return [x for x in self.levels if self.lt(l, x)]

    def at_or_above(self, l: Level) -> list[Level]:
        return [x for x in self.levels if self.leq(l, x)]

    def __repr__(self) -> str:
        return f"Lattice({self.name})"


BASE = Lattice("base", [DATA, MODEL, GENQUANT],
               {(DATA, MODEL), (DATA, GENQUANT), (MODEL, GENQUANT)})
CI = Lattice("ci", [L1, L2, L3], {(L1, L2), (L1, L3)})


def lub(levels: Iterable[Level]) -> Level:
    """Least upper bound in the total DATA/MODEL/GENQUANT order."""
    ls = list(levels)
    if not ls:
        raise ValueError("lub of empty level list")
    out = BASE.lub(ls)
    assert out is not None
    return out


def lub_ci(a: Level, b: Level) -> Optional[Level]:
    """lub in the semi-lattice; None when L2 and L3 are mixed."""
    return CI.lub2(a, b)


# ---------------------------------------------------------------------------
# Base types


@dataclass(frozen=True)
class RealT:
    def __repr__(self) -> str:
        return "real"


@dataclass(frozen=True)
class IntT:
    bound: Optional[int] = None  # int<bound>; values range over 1..bound

    def __repr__(self) -> str:
        return f"int<{self.bound}>" if self.bound is not None else "int"


@dataclass(frozen=True)
class ArrayT:
    elem: "BaseType"
    size: Optional[int] = None

    def __repr__(self) -> str:
        return f"{self.elem!r}[{self.size if self.size is not None else ''}]"


BaseType = Union[RealT, IntT, ArrayT]

REAL = RealT()
INT = IntT()


def types_compatible(a: BaseType, b: BaseType) -> bool:
    """Equality up to int bounds, unknown sizes, and int->real widening."""
    if isinstance(a, ArrayT) and isinstance(b, ArrayT):
        if a.size is not None and b.size is not None and a.size != b.size:
            return False
        return types_compatible(a.elem, b.elem)
    if isinstance(a, IntT) and isinstance(b, IntT):
        return True
    if isinstance(a, RealT) and isinstance(b, (RealT, IntT)):
        return True  # int widens to real
    return isinstance(a, RealT) and isinstance(b, RealT)


def is_continuous(t: BaseType) -> bool:
    """real or a (nested) array of real."""
    while isinstance(t, ArrayT):
        t = t.elem
    return isinstance(t, RealT)


def is_bounded_int(t: BaseType) -> bool:
    return isinstance(t, IntT) and t.bound is not None


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Var:
    name: str
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ConstR:
    value: float
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ConstI:
    value: int
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Arr:
    elems: tuple["Expr", ...]
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Index:
    arr: "Expr"
    idx: "Expr"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Comp:
    """Array comprehension [body | binder in lo:hi]."""
    body: "Expr"
    binder: str
    lo: "Expr"
    hi: "Expr"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TargetE:
    """target(S): runs S with weight 1 and yields the accumulated weight."""
    stmt: "Stmt"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class PhiE:
    """phi(int<K1> z1, ..., int<Kn> zn){ S }: the table of target(S) over
    all binder assignments; the first binder indexes the outermost dimension."""
    binders: tuple[tuple[str, int], ...]
    body: "Stmt"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


Expr = Union[Var, ConstR, ConstI, Arr, Index, Call, Comp, TargetE, PhiE]


# ---------------------------------------------------------------------------
# Statements


@dataclass(frozen=True)
class LValue:
    base: str
    indices: tuple[Expr, ...] = ()

    def __repr__(self) -> str:
        return self.base + "".join(f"[{i!r}]" for i in self.indices)


@dataclass(frozen=True)
class Assign:
    lvalue: LValue
    expr: Expr
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    first: "Stmt"
    second: "Stmt"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class For:
    binder: str
    lo: Expr
    hi: Expr
    body: "Stmt"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    els: "Stmt"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Skip:
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FactorS:
    expr: Expr
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Sample:
    lvalue: LValue
    dist: str
    args: tuple[Expr, ...]
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ElimS:
    """elim(int<K> z){ S }: factor in the sum of target(S) over z in 1..K."""
    var: str
    bound: int
    body: "Stmt"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class GenS:
    """gen(int<K> z){ S }: draw z from its exact conditional under S."""
    var: str
    bound: int
    body: "Stmt"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


Stmt = Union[Assign, Seq, For, If, Skip, FactorS, Sample, ElimS, GenS]

SKIP = Skip()


# ---------------------------------------------------------------------------
# Typing environment and programs


@dataclass(frozen=True)
class Decl:
    type: BaseType
    level: Optional[Level]  # None = to be inferred


class Gamma:
    """Ordered map from variable names to declarations."""

    def __init__(self, entries: Optional[Iterable[tuple[str, Decl]]] = None):
        self._entries: dict[str, Decl] = dict(entries or [])

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> Decl:
        return self._entries[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, name: str) -> Optional[Decl]:
        return self._entries.get(name)

    def items(self) -> Iterable[tuple[str, Decl]]:
        return self._entries.items()

    def names(self) -> list[str]:
        return list(self._entries)

    def level_of(self, name: str) -> Optional[Level]:
        return self._entries[name].level

    def type_of(self, name: str) -> BaseType:
        return self._entries[name].type

    def with_entry(self, name: str, decl: Decl) -> "Gamma":
        new = dict(self._entries)
        new[name] = decl
        return Gamma(new.items())

    def with_levels(self, assignment: dict[str, Level]) -> "Gamma":
        new = {n: (Decl(d.type, assignment[n]) if n in assignment else d)
               for n, d in self._entries.items()}
        return Gamma(new.items())

    def restrict(self, names: Iterable[str]) -> "Gamma":
        keep = set(names)
        return Gamma((n, d) for n, d in self._entries.items() if n in keep)

    def placeholders(self) -> list[str]:
        return [n for n, d in self._entries.items() if d.level is None]

    def concrete(self) -> bool:
        return not self.placeholders()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Gamma):
            return NotImplemented
        return list(self._entries.items()) == list(other._entries.items())

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}: ({d.type!r}, {d.level})" for n, d in self.items())
        return "{" + inner + "}"


@dataclass(frozen=True)
class Program:
    gamma: Gamma
    body: Stmt

    def sigma_names(self) -> list[str]:
        """Variables deterministically assigned somewhere in the body."""
        w = writes(self.body)
        return [n for n in self.gamma if n in w]

    def param_names(self) -> list[str]:
        """Variables never deterministically assigned (the density's domain)."""
        w = writes(self.body)
        return [n for n in self.gamma if n not in w]


# ---------------------------------------------------------------------------
# Structural helpers


def stmts_of(s: Stmt) -> list[Stmt]:
    """Flatten nested Seq into a list, dropping Skip units."""
    if isinstance(s, Seq):
        return stmts_of(s.first) + stmts_of(s.second)
    if isinstance(s, Skip):
        return []
    return [s]


def seq_of(stmts: list[Stmt]) -> Stmt:
    """Right-nested Seq of the given statements; Skip when empty."""
    if not stmts:
        return SKIP
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def normalize(s: Stmt) -> Stmt:
    """Canonical form: right-nested Seq, Skip elided, empty if/for dropped."""
    if isinstance(s, Seq):
        return seq_of([normalize(x) for x in stmts_of(s) if not isinstance(normalize(x), Skip)])
    if isinstance(s, For):
        body = normalize(s.body)
        return SKIP if isinstance(body, Skip) else For(s.binder, s.lo, s.hi, body)
    if isinstance(s, If):
        t, e = normalize(s.then), normalize(s.els)
        if isinstance(t, Skip) and isinstance(e, Skip):
            return SKIP
        return If(s.cond, t, e)
    if isinstance(s, ElimS):
        return ElimS(s.var, s.bound, normalize(s.body))
    if isinstance(s, GenS):
        return GenS(s.var, s.bound, normalize(s.body))
    return s


def stmt_equal(a: Stmt, b: Stmt) -> bool:
    """Structural equality after normalisation."""
    return normalize(a) == normalize(b)


def programs_equivalent(p: Program, q: Program) -> bool:
    """Same declarations (order-insensitive) and normal-form-equal bodies."""
    da = {n: (d.type, d.level) for n, d in p.gamma.items()}
    db = {n: (d.type, d.level) for n, d in q.gamma.items()}
    return da == db and stmt_equal(p.body, q.body)


# ---------------------------------------------------------------------------
# Read / write / sample analyses


def free_vars(node: Union[Stmt, Expr, LValue]) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (ConstR, ConstI, Skip)):
        return set()
    if isinstance(node, Arr):
        return set().union(*[free_vars(e) for e in node.elems]) if node.elems else set()
    if isinstance(node, Index):
        return free_vars(node.arr) | free_vars(node.idx)
    if isinstance(node, Call):
        return set().union(*[free_vars(e) for e in node.args]) if node.args else set()
    if isinstance(node, Comp):
        return (free_vars(node.body) - {node.binder}) | free_vars(node.lo) | free_vars(node.hi)
    if isinstance(node, TargetE):
        return free_vars(node.stmt)
    if isinstance(node, PhiE):
        bound = {n for n, _ in node.binders}
        return free_vars(node.body) - bound
    if isinstance(node, LValue):
        out = {node.base}
        for i in node.indices:
            out |= free_vars(i)
        return out
    if isinstance(node, Assign):
        return free_vars(node.lvalue) | free_vars(node.expr)
    if isinstance(node, Seq):
        return free_vars(node.first) | free_vars(node.second)
    if isinstance(node, For):
        return free_vars(node.lo) | free_vars(node.hi) | (free_vars(node.body) - {node.binder})
    if isinstance(node, If):
        return free_vars(node.cond) | free_vars(node.then) | free_vars(node.els)
    if isinstance(node, FactorS):
        return free_vars(node.expr)
    if isinstance(node, Sample):
        out = free_vars(node.lvalue)
        for a in node.args:
            out |= free_vars(a)
        return out
    if isinstance(node, ElimS):
        return free_vars(node.body) - {node.var}
    if isinstance(node, GenS):
        return (free_vars(node.body) - {node.var}) | {node.var}
    raise TypeError(f"free_vars: unknown node {node!r}")


def writes(s: Stmt) -> set[str]:
    """Global names deterministically assigned in s."""
    if isinstance(s, Assign):
        return {s.lvalue.base}
    if isinstance(s, Seq):
        return writes(s.first) | writes(s.second)
    if isinstance(s, If):
        return writes(s.then) | writes(s.els)
    if isinstance(s, For):
        return writes(s.body) - {s.binder}
    if isinstance(s, (Skip, FactorS, Sample, ElimS, GenS)):
        return set()
    raise TypeError(f"writes: unknown statement {s!r}")


def samples(s: Stmt) -> set[str]:
    """Global names on the left of a ~ in s (derived gen forms count)."""
    if isinstance(s, Sample):
        return {s.lvalue.base}
    if isinstance(s, Seq):
        return samples(s.first) | samples(s.second)
    if isinstance(s, If):
        return samples(s.then) | samples(s.els)
    if isinstance(s, For):
        return samples(s.body) - {s.binder}
    if isinstance(s, GenS):
        return {s.var}
    if isinstance(s, (Skip, FactorS, Assign, ElimS)):
        return set()
    raise TypeError(f"samples: unknown statement {s!r}")


def reads(s: Stmt) -> set[str]:
    """Global names read anywhere in s (inner target bodies included)."""
    if isinstance(s, Assign):
        out = free_vars(s.expr)
        for i in s.lvalue.indices:
            out |= free_vars(i)
        return out
    if isinstance(s, Seq):
        return reads(s.first) | reads(s.second)
    if isinstance(s, If):
        return free_vars(s.cond) | reads(s.then) | reads(s.els)
    if isinstance(s, For):
        return free_vars(s.lo) | free_vars(s.hi) | (reads(s.body) - {s.binder})
    if isinstance(s, Skip):
        return set()
    if isinstance(s, FactorS):
        return free_vars(s.expr)
    if isinstance(s, Sample):
        return free_vars(s)
    if isinstance(s, ElimS):
        return reads(s.body) - {s.var}
    if isinstance(s, GenS):
        return (reads(s.body) - {s.var}) | {s.var}
    raise TypeError(f"reads: unknown statement {s!r}")


class UnboundVariable(Exception):
    def __init__(self, name: str):
        super().__init__(f"unbound variable: {name}")
        self.name = name


def _level_of(gamma: Gamma, name: str, local: dict[str, Level]) -> Level:
    if name in local:
        return local[name]
    d = gamma.get(name)
    if d is None or d.level is None:
        raise UnboundVariable(name)
    return d.level


def _fv_lub(gamma: Gamma, names: set[str], local: dict[str, Level],
            lattice: Lattice) -> Optional[Level]:
    """lub of the levels of the given names; None when it does not exist."""
    return lattice.lub(_level_of(gamma, n, local) for n in names)


def reads_at(gamma: Gamma, s: Stmt, level: Level, lattice: Lattice = BASE,
             local: Optional[dict[str, Level]] = None) -> set[str]:
    """Names read at exactly `level` in s.

    Assignment reads belong to the level of the assigned variable. A sample
    statement attributes all its reads to the lub of the levels of its free
    variables; a factor to the level MODEL in the base lattice (factors only
    type there) and, in the CI lattice, to the lub of its reads. When the
    required lub does not exist no level claims the reads.
    """
    local = local or {}

    def go(s: Stmt, local: dict[str, Level]) -> set[str]:
        if isinstance(s, Assign):
            tgt = _level_of(gamma, s.lvalue.base, local)
            if tgt != level:
                return set()
            out = free_vars(s.expr)
            for i in s.lvalue.indices:
                out |= free_vars(i)
            return out
        if isinstance(s, Seq):
            return go(s.first, local) | go(s.second, local)
        if isinstance(s, If):
            gv = free_vars(s.cond)
            at = _fv_lub(gamma, gv, local, lattice)
            guard_reads = gv if at == level else set()
            return guard_reads | go(s.then, local) | go(s.els, local)
        if isinstance(s, For):
            gv = free_vars(s.lo) | free_vars(s.hi)
            guard = _fv_lub(gamma, gv, local, lattice)
            inner = dict(local)
            # the binder lives at the loop's own level (its bounds' lub)
            inner[s.binder] = guard if guard is not None else lattice.bottom
            body = go(s.body, inner) - {s.binder}
            return (gv if guard == level else set()) | body
        if isinstance(s, Skip):
            return set()
        if isinstance(s, FactorS):
            if lattice is BASE:
                return free_vars(s.expr) if level == MODEL else set()
            at = _fv_lub(gamma, free_vars(s.expr), local, lattice)
            return free_vars(s.expr) if at == level else set()
        if isinstance(s, Sample):
            at = _fv_lub(gamma, free_vars(s), local, lattice)
            return free_vars(s) if at == level else set()
        if isinstance(s, ElimS):
            fv = free_vars(s)
            if lattice is BASE:
                return fv if level == MODEL else set()
            at = _fv_lub(gamma, fv, local, lattice)
            return fv if at == level else set()
        if isinstance(s, GenS):
            fv = free_vars(s)
            at = _fv_lub(gamma, fv, local, lattice)
            return fv if at == level else set()
        raise TypeError(f"reads_at: unknown statement {s!r}")

    return go(s, local)


def writes_at(gamma: Gamma, s: Stmt, level: Level) -> set[str]:
    return {x for x in writes(s)
            if (d := gamma.get(x)) is not None and d.level == level}


def samples_at(gamma: Gamma, s: Stmt, level: Level) -> set[str]:
    return {x for x in samples(s)
            if (d := gamma.get(x)) is not None and d.level == level}


@dataclass(frozen=True)
class AnalysisSets:
    W: frozenset[str]
    R: frozenset[str]
    Wtilde: frozenset[str]
    R_at: dict[Level, frozenset[str]]
    W_at: dict[Level, frozenset[str]]
    Wtilde_at: dict[Level, frozenset[str]]


def analysis_sets(gamma: Gamma, s: Stmt, lattice: Lattice = BASE) -> AnalysisSets:
    for name in free_vars(s):
        if name not in gamma:
            raise UnboundVariable(name)
    return AnalysisSets(
        W=frozenset(writes(s)),
        R=frozenset(reads(s)),
        Wtilde=frozenset(samples(s)),
        R_at={l: frozenset(reads_at(gamma, s, l, lattice)) for l in lattice.levels},
        W_at={l: frozenset(writes_at(gamma, s, l)) for l in lattice.levels},
        Wtilde_at={l: frozenset(samples_at(gamma, s, l)) for l in lattice.levels},
    )
