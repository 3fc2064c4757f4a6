"""Level type systems and level inference.

Two systems share this code. The phase system types statements against the
chain data <= model <= genquant, with the extra sequencing side conditions
(shreddable, generative) that make slicing sound. The conditional
independence system runs the same rules over the semi-lattice l1 <= l2,
l1 <= l3, where sample and factor statements may sit at any level their
reads allow, and sequencing only requires shreddable.

Checking is split in two passes: base types first (level-independent),
then levels. An expression's level behaviour is captured by the SET of
levels it types at; for ordinary expressions this is the up-set of the lub
of its reads, and it is empty exactly when that lub does not exist (the
l2/l3 mix failure).

Inference is branch-and-bound over placeholder assignments, cheap
inequality propagation first, full check at complete assignments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

from .syntax import (
    Arr, ArrayT, Assign, BASE, BaseType, Call, CI, Comp, ConstI, ConstR,
    DATA, Decl, ElimS, FactorS, For, GENQUANT, Gamma, GenS, If, Index, INT,
    IntT, L1, L2, L3, Lattice, Level, MODEL, PhiE, Program, REAL, RealT,
    Sample, Seq, Skip, Stmt, TargetE, UnboundVariable, Var, free_vars,
    reads_at, samples_at, types_compatible, writes, writes_at,
)

BASE_COSTS = {DATA: 0, GENQUANT: 1, MODEL: 2}
CI_COSTS = {L3: 0, L1: 1, L2: 2}


@dataclass(frozen=True)
class Violation:
    rule: str
    pos: Optional[tuple[int, int]]
    message: str

    def __str__(self) -> str:
        where = f"{self.pos[0]}:{self.pos[1]}: " if self.pos else ""
        return f"{where}[{self.rule}] {self.message}"


@dataclass
class TypingReport:
    ok: bool
    gamma: Gamma
    violations: list[Violation]


DIST_SIGNATURES: dict[str, tuple[list[BaseType], BaseType]] = {
    "normal": ([REAL, REAL], REAL),
    "beta": ([REAL, REAL], REAL),
    "bern": ([REAL], INT),
    "bernoulli": ([REAL], INT),
    "categorical": ([ArrayT(REAL)], INT),
}


def _is_numeric(t: Optional[BaseType]) -> bool:
    return isinstance(t, (RealT, IntT))


def _strip_indices(t: BaseType, n: int) -> Optional[BaseType]:
    for _ in range(n):
        if not isinstance(t, ArrayT):
            return None
        t = t.elem
    return t


def _join_numeric(a: BaseType, b: BaseType) -> BaseType:
    return INT if isinstance(a, IntT) and isinstance(b, IntT) else REAL


def _support_matches(support: BaseType, tgt: BaseType) -> bool:
    """Sampling applies elementwise over (nested) arrays of the support."""
    while isinstance(tgt, ArrayT):
        tgt = tgt.elem
    return types_compatible(support, tgt)


class _Checker:
    def __init__(self, gamma: Gamma, lattice: Lattice):
        self.gamma = gamma
        self.lattice = lattice
        self.violations: list[Violation] = []

    def err(self, rule: str, pos, message: str) -> None:
        self.violations.append(Violation(rule, pos, message))

    # ---------------- pass A: base types ----------------

    def expr_type(self, e, env: Gamma) -> Optional[BaseType]:
        if isinstance(e, Var):
            d = env.get(e.name)
            if d is None:
                self.err("var", e.pos, f"unbound variable {e.name}")
                return None
            return d.type
        if isinstance(e, ConstR):
            return REAL
        if isinstance(e, ConstI):
            return INT
        if isinstance(e, Arr):
            elem: Optional[BaseType] = None
            for x in e.elems:
                t = self.expr_type(x, env)
                if t is None:
                    return None
                if elem is None:
                    elem = t
                elif _is_numeric(elem) and _is_numeric(t):
                    elem = _join_numeric(elem, t)
                elif not types_compatible(elem, t):
                    self.err("array", e.pos, "array literal elements have mixed types")
                    return None
            return ArrayT(elem if elem is not None else REAL, len(e.elems))
        if isinstance(e, Index):
            t = self.expr_type(e.arr, env)
            ti = self.expr_type(e.idx, env)
            if ti is not None and not isinstance(ti, IntT):
                self.err("index", e.pos, f"array index must be int, got {ti!r}")
            if t is None:
                return None
            if not isinstance(t, ArrayT):
                self.err("index", e.pos, f"indexing a non-array of type {t!r}")
                return None
            return t.elem
        if isinstance(e, Call):
            ts = [self.expr_type(a, env) for a in e.args]
            if any(t is None for t in ts):
                return None
            return self.builtin_type(e, ts)
        if isinstance(e, Comp):
            for b in (e.lo, e.hi):
                t = self.expr_type(b, env)
                if t is not None and not isinstance(t, IntT):
                    self.err("comprehension", e.pos, "comprehension bounds must be int")
            if e.binder in env:
                self.err("comprehension", e.pos,
                         f"comprehension binder {e.binder} shadows a declared variable")
            inner = env.with_entry(e.binder, Decl(INT, None))
            bt = self.expr_type(e.body, inner)
            size = None
            if isinstance(e.lo, ConstI) and isinstance(e.hi, ConstI):
                size = max(e.hi.value - e.lo.value + 1, 0) or None
            return None if bt is None else ArrayT(bt, size)
        if isinstance(e, TargetE):
            self.stmt_types(e.stmt, env)
            return REAL
        if isinstance(e, PhiE):
            inner = env
            for name, k in e.binders:
                inner = inner.with_entry(name, Decl(IntT(k), None))
            self.stmt_types(e.body, inner)
            out: BaseType = REAL
            for name, k in reversed(e.binders):
                out = ArrayT(out, k)
            return out
        self.err("expr", getattr(e, "pos", None), f"unknown expression {e!r}")
        return None

    def builtin_type(self, e: Call, ts: list[BaseType]) -> Optional[BaseType]:
        fn, pos = e.fn, e.pos
        if fn in ("+", "-", "*") and len(ts) == 2:
            if all(_is_numeric(t) for t in ts):
                return _join_numeric(ts[0], ts[1])
        elif fn == "-" and len(ts) == 1 and _is_numeric(ts[0]):
            return ts[0]
        elif fn == "/" and len(ts) == 2 and all(_is_numeric(t) for t in ts):
            return REAL
        elif fn in (">", "<", "==") and len(ts) == 2 and all(_is_numeric(t) for t in ts):
            return INT
        elif fn == "sum" and len(ts) == 1:
            if isinstance(ts[0], ArrayT) and _is_numeric(ts[0].elem):
                return REAL if isinstance(ts[0].elem, RealT) else INT
        elif fn == "max":
            if len(ts) == 1 and isinstance(ts[0], ArrayT) and _is_numeric(ts[0].elem):
                return ts[0].elem
            if len(ts) == 2 and all(_is_numeric(t) for t in ts):
                return _join_numeric(ts[0], ts[1])
        elif fn in ("exp", "log") and len(ts) == 1 and _is_numeric(ts[0]):
            return REAL
        else:
            self.err("call", pos, f"unknown function {fn}/{len(ts)}")
            return None
        self.err("call", pos, f"bad argument types for {fn}: {ts!r}")
        return None

    def stmt_types(self, s: Stmt, env: Gamma) -> None:
        if isinstance(s, Skip):
            return
        if isinstance(s, Assign):
            d = env.get(s.lvalue.base)
            if d is None:
                self.err("assign", s.pos, f"assignment to undeclared {s.lvalue.base}")
                return
            for i in s.lvalue.indices:
                ti = self.expr_type(i, env)
                if ti is not None and not isinstance(ti, IntT):
                    self.err("assign", s.pos, "array index must be int")
            tgt = _strip_indices(d.type, len(s.lvalue.indices))
            te = self.expr_type(s.expr, env)
            if tgt is None:
                self.err("assign", s.pos,
                         f"too many indices on {s.lvalue.base}: {d.type!r}")
            elif te is not None and not types_compatible(tgt, te):
                self.err("assign", s.pos,
                         f"cannot assign {te!r} to {s.lvalue.base} slot of type {tgt!r}")
            return
        if isinstance(s, Seq):
            self.stmt_types(s.first, env)
            self.stmt_types(s.second, env)
            return
        if isinstance(s, For):
            for b in (s.lo, s.hi):
                t = self.expr_type(b, env)
                if t is not None and not isinstance(t, IntT):
                    self.err("for", s.pos, "loop bounds must be int")
            if s.binder in env:
                self.err("for", s.pos, f"loop binder {s.binder} shadows a declared variable")
            if s.binder in writes(s.body):
                self.err("for", s.pos, f"loop binder {s.binder} is assigned in the body")
            self.stmt_types(s.body, env.with_entry(s.binder, Decl(INT, None)))
            return
        if isinstance(s, If):
            t = self.expr_type(s.cond, env)
            if t is not None and not _is_numeric(t):
                self.err("if", s.pos, f"guard must be a number, got {t!r}")
            self.stmt_types(s.then, env)
            self.stmt_types(s.els, env)
            return
        if isinstance(s, FactorS):
            t = self.expr_type(s.expr, env)
            if t is not None and not _is_numeric(t):
                self.err("factor", s.pos, f"factor argument must be a number, got {t!r}")
            return
        if isinstance(s, Sample):
            sig = DIST_SIGNATURES.get(s.dist)
            if sig is None:
                self.err("sample", s.pos, f"unknown distribution {s.dist}")
                return
            params, support = sig
            if len(s.args) != len(params):
                self.err("sample", s.pos,
                         f"{s.dist} expects {len(params)} parameter(s), got {len(s.args)}")
            d = env.get(s.lvalue.base)
            if d is None:
                self.err("sample", s.pos, f"unbound variable {s.lvalue.base}")
                return
            for i in s.lvalue.indices:
                ti = self.expr_type(i, env)
                if ti is not None and not isinstance(ti, IntT):
                    self.err("sample", s.pos, "array index must be int")
            tgt = _strip_indices(d.type, len(s.lvalue.indices))
            if tgt is None:
                self.err("sample", s.pos, f"too many indices on {s.lvalue.base}")
            elif not _support_matches(support, tgt):
                self.err("sample", s.pos,
                         f"{s.dist} has support {support!r}, but {s.lvalue!r} is {tgt!r}")
            for a, pt in zip(s.args, params):
                ta = self.expr_type(a, env)
                if ta is not None and not types_compatible(pt, ta):
                    self.err("sample", s.pos,
                             f"{s.dist} parameter expects {pt!r}, got {ta!r}")
            return
        if isinstance(s, ElimS):
            self.stmt_types(s.body, env.with_entry(s.var, Decl(IntT(s.bound), None)))
            return
        if isinstance(s, GenS):
            d = env.get(s.var)
            if d is None:
                self.err("gen", s.pos, f"gen over undeclared variable {s.var}")
            elif not isinstance(d.type, IntT) or d.type.bound != s.bound:
                self.err("gen", s.pos,
                         f"gen binder {s.var} must be declared int<{s.bound}>, got {d.type!r}")
            self.stmt_types(s.body, env)
            return
        self.err("stmt", getattr(s, "pos", None), f"unknown statement {s!r}")

    # ---------------- pass B: levels ----------------

    def _level(self, env: Gamma, name: str) -> Optional[Level]:
        d = env.get(name)
        return d.level if d is not None else None

    def expr_levels(self, e, env: Gamma) -> set[Level]:
        """Levels the expression types at (an up-set for ordinary exprs)."""
        lat = self.lattice
        if isinstance(e, Var):
            l = self._level(env, e.name)
            return set(lat.at_or_above(l)) if l is not None else set()
        if isinstance(e, (ConstR, ConstI)):
            return set(lat.levels)
        if isinstance(e, Arr):
            out = set(lat.levels)
            for x in e.elems:
                out &= self.expr_levels(x, env)
            return out
        if isinstance(e, Index):
            return self.expr_levels(e.arr, env) & self.expr_levels(e.idx, env)
        if isinstance(e, Call):
            out = set(lat.levels)
            for a in e.args:
                out &= self.expr_levels(a, env)
            return out
        if isinstance(e, Comp):
            out = set()
            for l in lat.levels:
                if l not in self.expr_levels(e.lo, env):
                    continue
                if l not in self.expr_levels(e.hi, env):
                    continue
                inner = env.with_entry(e.binder, Decl(INT, l))
                if l in self.expr_levels(e.body, inner):
                    out.add(l)
            return out
        if isinstance(e, TargetE):
            if not self._check_quiet(e.stmt, lat.bottom, env, relaxed=True):
                return set()
            return self._weight_levels(e.stmt, env)
        if isinstance(e, PhiE):
            out = set()
            for l in lat.levels:
                inner = env
                for name, k in e.binders:
                    inner = inner.with_entry(name, Decl(IntT(k), l))
                if not self._check_quiet(e.body, lat.bottom, inner, relaxed=True):
                    continue
                if all(not self._reads_at(inner, e.body, la) for la in lat.above(l)):
                    out.add(l)
            return out
        return set()

    def _weight_levels(self, body: Stmt, env: Gamma) -> set[Level]:
        """Levels l such that nothing is read above l inside body."""
        return {l for l in self.lattice.levels
                if all(not self._reads_at(env, body, la) for la in self.lattice.above(l))}

    def _reads_at(self, env: Gamma, s: Stmt, level: Level) -> set[str]:
        try:
            return reads_at(env, s, level, self.lattice)
        except UnboundVariable:
            return set()

    def _check_quiet(self, s: Stmt, req: Level, env: Gamma, relaxed: bool) -> bool:
        mark = len(self.violations)
        ok = self.stmt_levels(s, req, env, relaxed)
        if ok:
            del self.violations[mark:]
        return ok

    def stmt_levels(self, s: Stmt, req: Level, env: Gamma, relaxed: bool = False) -> bool:
        lat = self.lattice
        strict = lat is BASE and not relaxed
        if isinstance(s, Skip):
            return True
        if isinstance(s, Assign):
            lvl = self._level(env, s.lvalue.base)
            if lvl is None:
                return False
            if not lat.leq(req, lvl):
                self.err("assign", s.pos,
                         f"assignment to {s.lvalue.base} ({lvl}) below required level {req}")
                return False
            ok = True
            for part in (s.expr, *s.lvalue.indices):
                if lvl not in self.expr_levels(part, env):
                    self.err("assign", s.pos,
                             f"{s.lvalue.base} ({lvl}) assigned from expression "
                             f"that does not type at {lvl}")
                    ok = False
            return ok
        if isinstance(s, Seq):
            ok = self.stmt_levels(s.first, req, env, relaxed)
            ok = self.stmt_levels(s.second, req, env, relaxed) and ok
            if not shreddable(env, s.first, s.second, lat):
                self.err("seq-shreddable", s.pos,
                         "later statement writes below a level the earlier one reads at")
                ok = False
            if lat is BASE and not generative(env, s.first, s.second):
                self.err("seq-generative", s.pos,
                         "conflicting genquant-level ~/assignment between the two parts")
                ok = False
            return ok
        if isinstance(s, For):
            def attempt(l: Level) -> bool:
                for b in (s.lo, s.hi):
                    if l not in self.expr_levels(b, env):
                        self.err("for", s.pos, f"loop bound does not type at {l}")
                        return False
                inner = env.with_entry(s.binder, Decl(INT, l))
                return self.stmt_levels(s.body, l, inner, relaxed)
            return self._first_candidate(s, req, attempt, "for")
        if isinstance(s, If):
            def attempt(l: Level) -> bool:
                if l not in self.expr_levels(s.cond, env):
                    self.err("if", s.pos, f"guard does not type at {l}")
                    return False
                return (self.stmt_levels(s.then, l, env, relaxed)
                        and self.stmt_levels(s.els, l, env, relaxed))
            return self._first_candidate(s, req, attempt, "if")
        if isinstance(s, FactorS):
            levels = self.expr_levels(s.expr, env)
            if strict:
                if not lat.leq(req, MODEL):
                    self.err("factor", s.pos, f"factor statements type at {MODEL}, "
                             f"not at required {req}")
                    return False
                if MODEL not in levels:
                    self.err("factor", s.pos, "factor argument not readable at model level")
                    return False
                return True
            if any(lat.leq(req, l) for l in levels):
                return True
            self.err("factor", s.pos,
                     "factor argument has no admissible level (required "
                     f"{req}; possible {sorted(l.name for l in levels)})")
            return False
        if isinstance(s, Sample):
            base_lvl = self._level(env, s.lvalue.base)
            if base_lvl is None:
                return False
            parts = list(s.args) + list(s.lvalue.indices)
            if strict:
                stmt_lvl = lat.lub2(base_lvl, MODEL)
                assert stmt_lvl is not None
                if not lat.leq(req, stmt_lvl):
                    self.err("sample", s.pos,
                             f"~ statement at {stmt_lvl} cannot type at required {req}")
                    return False
                for part in parts:
                    if stmt_lvl not in self.expr_levels(part, env):
                        self.err("sample", s.pos,
                                 f"~ argument not readable at {stmt_lvl}")
                        return False
                return True
            admissible = set(lat.at_or_above(base_lvl))
            for part in parts:
                admissible &= self.expr_levels(part, env)
            if any(lat.leq(req, l) for l in admissible):
                return True
            self.err("sample", s.pos,
                     f"no level can hold this ~ statement (lvalue at {base_lvl}; "
                     "the reads have no common upper bound)")
            return False
        if isinstance(s, ElimS):
            candidates = [MODEL] if strict else lat.at_or_above(req)

            def attempt_at(l: Level) -> bool:
                inner = env.with_entry(s.var, Decl(IntT(s.bound), l))
                if not self.stmt_levels(s.body, lat.bottom, inner, relaxed=True):
                    return False
                for la in lat.above(l):
                    extra = self._reads_at(inner, s.body, la)
                    if extra:
                        self.err("elim", s.pos,
                                 f"elim body reads {sorted(extra)} above level {l}")
                        return False
                return True

            if strict:
                if not lat.leq(req, MODEL):
                    self.err("elim", s.pos, f"elim types at {MODEL}, not at {req}")
                    return False
                return attempt_at(MODEL)
            return self._candidates(s, candidates, attempt_at, "elim")
        if isinstance(s, GenS):
            zl = self._level(env, s.var)
            if zl is None:
                return False
            if strict:
                if zl != GENQUANT:
                    self.err("gen", s.pos,
                             f"gen target {s.var} must be genquant, is {zl}")
                    return False
                return self.stmt_levels(s.body, lat.bottom, env, relaxed=True)

            def attempt_at(l: Level) -> bool:
                if not lat.leq(zl, l):
                    return False
                inner = env.with_entry(s.var, Decl(IntT(s.bound), l))
                if not self.stmt_levels(s.body, lat.bottom, inner, relaxed=True):
                    return False
                return all(not self._reads_at(inner, s.body, la) for la in lat.above(l))

            return self._candidates(s, lat.at_or_above(req), attempt_at, "gen")
        self.err("stmt", getattr(s, "pos", None), f"unknown statement {s!r}")
        return False

    def _first_candidate(self, s, req: Level, attempt, rule: str) -> bool:
        return self._candidates(s, self.lattice.at_or_above(req), attempt, rule)

    def _candidates(self, s, levels, attempt, rule: str) -> bool:
        saved: Optional[list[Violation]] = None
        for l in sorted(levels, key=lambda x: x.rank):
            mark = len(self.violations)
            if attempt(l):
                del self.violations[mark:]
                return True
            if saved is None:
                saved = self.violations[mark:]
            del self.violations[mark:]
        self.violations.extend(saved or [])
        if not saved:
            self.err(rule, getattr(s, "pos", None), f"no admissible level for {rule}")
        return False


# ---------------------------------------------------------------------------
# Sequencing side conditions


def shreddable(gamma: Gamma, s1: Stmt, s2: Stmt, lattice: Lattice = BASE) -> bool:
    """No later write below a level at which the earlier statement reads."""
    try:
        for l1 in lattice.levels:
            r1 = reads_at(gamma, s1, l1, lattice)
            if not r1:
                continue
            for l2 in lattice.levels:
                if lattice.lt(l2, l1) and r1 & writes_at(gamma, s2, l2):
                    return False
    except UnboundVariable:
        return False
    return True


def generative(gamma: Gamma, s1: Stmt, s2: Stmt) -> bool:
    """No clash between genquant-level ~ statements and other definitions of
    the same variable: those ~ must be implementable as direct draws.

    Levels below model are exempt: a repeated data-level ~ is an ordinary
    pair of observations.
    """
    try:
        for l in (GENQUANT,):
            st1, st2 = samples_at(gamma, s1, l), samples_at(gamma, s2, l)
            w1 = writes_at(gamma, s1, l) | st1
            w2 = writes_at(gamma, s2, l) | st2
            if (st1 & w2) or (w1 & st2):
                return False
    except UnboundVariable:
        return False
    return True


# ---------------------------------------------------------------------------
# Public checking entry points


def check_stmt(gamma: Gamma, s: Stmt, level: Level, lattice: Lattice = BASE) -> TypingReport:
    missing = [n for n in gamma.placeholders() if n in free_vars(s)]
    if missing:
        return TypingReport(False, gamma, [Violation(
            "check", None, f"levels not concrete for: {', '.join(missing)}")])
    c = _Checker(gamma, lattice)
    c.stmt_types(s, gamma)
    types_ok = not c.violations
    levels_ok = c.stmt_levels(s, level, gamma) if types_ok else False
    return TypingReport(types_ok and levels_ok, gamma, c.violations)


def check_program(p: Program, lattice: Lattice = BASE) -> TypingReport:
    return check_stmt(p.gamma, p.body, lattice.bottom, lattice)


def check_expr(gamma: Gamma, e) -> tuple[BaseType, Level]:
    """Base type and principal (least) level of an expression; raises
    TypeError via report on failure."""
    c = _Checker(gamma, BASE)
    t = c.expr_type(e, gamma)
    if t is None or c.violations:
        raise TypingFailure(c.violations)
    levels = c.expr_levels(e, gamma)
    if not levels:
        raise TypingFailure([Violation("expr", getattr(e, "pos", None),
                                       "expression types at no level")])
    return t, min(levels, key=lambda l: l.rank)


class TypingFailure(Exception):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = violations


# ---------------------------------------------------------------------------
# Inference: branch and bound with inequality propagation


@dataclass(frozen=True)
class _Leq:
    lo: Union[str, Level]
    hi: Union[str, Level]


@dataclass(frozen=True)
class _LeqLubModel:
    x: str  # level(x) <= lub(level(y), MODEL); base lattice only
    y: str


@dataclass(frozen=True)
class _Compatible:
    x: str  # lub(level(x), level(y)) must exist; CI lattice only
    y: str


_Constraint = Union[_Leq, _LeqLubModel, _Compatible]


def _harvest(gamma: Gamma, s: Stmt, lattice: Lattice,
             bound: frozenset[str], guards: frozenset[str],
             relaxed: bool, out: list[_Constraint]) -> None:
    """Necessary level constraints; sound, not complete (the leaf check is
    the authority). Names in `bound` are locally rebound and skipped."""

    def fv(node) -> set[str]:
        return free_vars(node) - bound

    def compat_all(names: set[str]) -> None:
        if lattice is CI:
            ns = sorted(names)
            for a, b in itertools.combinations(ns, 2):
                out.append(_Compatible(a, b))

    if isinstance(s, Skip):
        return
    if isinstance(s, Assign):
        if s.lvalue.base in bound:
            return
        srcs = fv(s.expr)
        for i in s.lvalue.indices:
            srcs |= fv(i)
        for x in srcs | guards:
            out.append(_Leq(x, s.lvalue.base))
        return
    if isinstance(s, Seq):
        _harvest(gamma, s.first, lattice, bound, guards, relaxed, out)
        _harvest(gamma, s.second, lattice, bound, guards, relaxed, out)
        return
    if isinstance(s, For):
        g = guards | fv(s.lo) | fv(s.hi)
        _harvest(gamma, s.body, lattice, bound | {s.binder}, g, relaxed, out)
        return
    if isinstance(s, If):
        g = guards | fv(s.cond)
        _harvest(gamma, s.then, lattice, bound, g, relaxed, out)
        _harvest(gamma, s.els, lattice, bound, g, relaxed, out)
        return
    if isinstance(s, FactorS):
        names = fv(s.expr)
        if lattice is BASE and not relaxed:
            for x in names | guards:
                out.append(_Leq(x, MODEL))
        compat_all(names | guards)
        _harvest_exprs(gamma, [s.expr], lattice, bound, out)
        return
    if isinstance(s, Sample):
        names = fv(s)
        if lattice is BASE and not relaxed and s.lvalue.base not in bound:
            srcs = set()
            for part in (*s.args, *s.lvalue.indices):
                srcs |= fv(part)
            for x in srcs | guards:
                out.append(_LeqLubModel(x, s.lvalue.base))
        compat_all(names | guards)
        _harvest_exprs(gamma, list(s.args) + list(s.lvalue.indices), lattice, bound, out)
        return
    if isinstance(s, ElimS):
        _harvest(gamma, s.body, lattice, bound | {s.var}, frozenset(), True, out)
        return
    if isinstance(s, GenS):
        _harvest(gamma, s.body, lattice, bound | {s.var}, frozenset(), True, out)
        return


def _harvest_exprs(gamma: Gamma, exprs: list, lattice: Lattice,
                   bound: frozenset[str], out: list[_Constraint]) -> None:
    """Recurse into target/phi bodies nested in expressions."""
    for e in exprs:
        if isinstance(e, TargetE):
            _harvest(gamma, e.stmt, lattice, bound, frozenset(), True, out)
        elif isinstance(e, PhiE):
            inner = bound | {n for n, _ in e.binders}
            _harvest(gamma, e.body, lattice, inner, frozenset(), True, out)
        elif isinstance(e, (Arr, Call)):
            _harvest_exprs(gamma, list(e.elems if isinstance(e, Arr) else e.args),
                           lattice, bound, out)
        elif isinstance(e, Index):
            _harvest_exprs(gamma, [e.arr, e.idx], lattice, bound, out)
        elif isinstance(e, Comp):
            _harvest_exprs(gamma, [e.body, e.lo, e.hi], lattice, bound | {e.binder}, out)


@dataclass
class InferenceOutcome:
    report: TypingReport
    assignment: Optional[dict[str, Level]] = None
    cost: Optional[int] = None


def gen_bound_vars(s: Stmt) -> set[str]:
    out: set[str] = set()

    def go(s: Stmt) -> None:
        if isinstance(s, GenS):
            out.add(s.var)
            go(s.body)
        elif isinstance(s, Seq):
            go(s.first)
            go(s.second)
        elif isinstance(s, (For, ElimS)):
            go(s.body)
        elif isinstance(s, If):
            go(s.then)
            go(s.els)

    go(s)
    return out


def solve_levels(gamma: Gamma, body: Stmt, lattice: Lattice,
                 costs: dict[Level, int],
                 domains: dict[str, list[Level]],
                 minimize: bool = True) -> InferenceOutcome:
    """Assign a level to every name so the program checks at the lattice
    bottom, minimising the summed cost of placeholder assignments.

    `domains` lists candidate levels per name (singletons for fixed names).
    Returns the first minimal assignment in declaration order, trying
    cheaper levels (then lower rank) first.
    """
    checker = _Checker(gamma, lattice)
    checker.stmt_types(body, gamma)
    if checker.violations:
        return InferenceOutcome(TypingReport(False, gamma, checker.violations))

    constraints: list[_Constraint] = []
    _harvest(gamma, body, lattice, frozenset(), frozenset(), False, constraints)
    placeholders = [n for n in gamma if len(domains[n]) > 1 or gamma[n].level is None]

    doms: dict[str, set[Level]] = {n: set(domains[n]) for n in domains}

    def propagate(d: dict[str, set[Level]]) -> bool:
        changed = True
        while changed:
            changed = False
            for c in constraints:
                if isinstance(c, _Leq):
                    lo_set = {c.lo} if isinstance(c.lo, Level) else d.get(c.lo)
                    hi_set = {c.hi} if isinstance(c.hi, Level) else d.get(c.hi)
                    if lo_set is None or hi_set is None:
                        continue
                    new_lo = {a for a in lo_set if any(lattice.leq(a, b) for b in hi_set)}
                    new_hi = {b for b in hi_set if any(lattice.leq(a, b) for a in lo_set)}
                    if not new_lo or not new_hi:
                        return False
                    if not isinstance(c.lo, Level) and new_lo != lo_set:
                        d[c.lo] = new_lo
                        changed = True
                    if not isinstance(c.hi, Level) and new_hi != hi_set:
                        d[c.hi] = new_hi
                        changed = True
                elif isinstance(c, _LeqLubModel):
                    xs, ys = d.get(c.x), d.get(c.y)
                    if xs is None or ys is None:
                        continue
                    def ub(b: Level) -> Level:
                        u = lattice.lub2(b, MODEL)
                        assert u is not None
                        return u
                    new_x = {a for a in xs if any(lattice.leq(a, ub(b)) for b in ys)}
                    new_y = {b for b in ys if any(lattice.leq(a, ub(b)) for a in xs)}
                    if not new_x or not new_y:
                        return False
                    if new_x != xs:
                        d[c.x] = new_x
                        changed = True
                    if new_y != ys:
                        d[c.y] = new_y
                        changed = True
                elif isinstance(c, _Compatible):
                    xs, ys = d.get(c.x), d.get(c.y)
                    if xs is None or ys is None:
                        continue
                    new_x = {a for a in xs if any(lattice.lub2(a, b) is not None for b in ys)}
                    new_y = {b for b in ys if any(lattice.lub2(a, b) is not None for a in xs)}
                    if not new_x or not new_y:
                        return False
                    if new_x != xs:
                        d[c.x] = new_x
                        changed = True
                    if new_y != ys:
                        d[c.y] = new_y
                        changed = True
        return True

    if not propagate(doms):
        return InferenceOutcome(TypingReport(False, gamma, [Violation(
            "infer", None, "level constraints are unsatisfiable (propagation)")]))

    order = [n for n in gamma if n in placeholders]
    best: dict[str, Level] | None = None
    best_cost = [float("inf")]
    first_failure: list[Violation] | None = None

    def value_order(levels: set[Level]) -> list[Level]:
        return sorted(levels, key=lambda l: (costs[l], l.rank))

    def leaf_check(assignment: dict[str, Level]) -> bool:
        full = {n: next(iter(doms[n])) for n in gamma if len(doms[n]) == 1}
        full.update(assignment)
        resolved = gamma.with_levels(full)
        c2 = _Checker(resolved, lattice)
        ok = c2.stmt_levels(body, lattice.bottom, resolved)
        nonlocal first_failure
        if not ok and first_failure is None:
            first_failure = c2.violations
        return ok

    def search(i: int, d: dict[str, set[Level]], cost_so_far: int,
               chosen: dict[str, Level]) -> bool:
        remaining = sum(min(costs[l] for l in d[n]) for n in order[i:])
        if minimize and cost_so_far + remaining >= best_cost[0]:
            return False
        if i == len(order):
            assignment = dict(chosen)
            for n in gamma:
                if n not in assignment:
                    assignment[n] = next(iter(d[n]))
            if leaf_check(assignment):
                nonlocal best
                best = assignment
                best_cost[0] = cost_so_far
                return not minimize  # stop early only when satisfying
            return False
        name = order[i]
        for level in value_order(d[name]):
            d2 = {k: set(v) for k, v in d.items()}
            d2[name] = {level}
            if not propagate(d2):
                continue
            chosen[name] = level
            if search(i + 1, d2, cost_so_far + costs[level], chosen):
                del chosen[name]
                return True
            del chosen[name]
        return False

    search(0, doms, 0, {})
    if best is None:
        vio = first_failure or [Violation("infer", None,
                                          "no level assignment satisfies the rules")]
        return InferenceOutcome(TypingReport(False, gamma, vio))
    resolved = gamma.with_levels(best)
    total = sum(costs[best[n]] for n in order)
    return InferenceOutcome(TypingReport(True, resolved, []), best, total)


def infer_levels(p: Program, costs: Optional[dict[Level, int]] = None) -> InferenceOutcome:
    """Resolve placeholder levels in the phase system, cheapest first.

    Parameters (variables never deterministically assigned) that are not
    declared data must be model or genquant: an undeclared input or sampled
    variable is latent, not observed. Variables drawn by gen are pinned to
    genquant, as the gen rule demands.
    """
    costs = costs or BASE_COSTS
    assigned = writes(p.body)
    genned = gen_bound_vars(p.body)
    domains: dict[str, list[Level]] = {}
    for name, d in p.gamma.items():
        if d.level is not None:
            domains[name] = [d.level]
        elif name in genned:
            domains[name] = [GENQUANT]
        elif name in assigned:
            domains[name] = [DATA, MODEL, GENQUANT]
        else:
            domains[name] = [MODEL, GENQUANT]
    return solve_levels(p.gamma, p.body, BASE, costs, domains)
