"""Slicing a statement into one sub-statement per level.

Each simple statement lands in the slice of its level: the assigned
variable's level for assignments, the lub of the levels of the free
variables for ~, factor and the derived forms. Sequencing slices
pointwise. If and for bodies slice recursively; when the guard sits at
level g, slices strictly below g are folded into the g slice (they could
not read the guard on their own), while higher slices keep their own
guarded copy.

Composing the slices in level order is semantics-preserving on well-typed
programs, and each slice is single-level at its key.
"""

from __future__ import annotations

from .syntax import (
    Assign, BASE, Decl, ElimS, FactorS, For, Gamma, GenS, If, INT,
    Lattice, Level, Sample, Seq, Skip, SKIP, Stmt, UnboundVariable,
    free_vars, normalize, seq_of,
)


class ShredError(Exception):
    pass


def _level_of_names(gamma: Gamma, names: set[str], lattice: Lattice) -> Level:
    levels = []
    for n in sorted(names):
        d = gamma.get(n)
        if d is None or d.level is None:
            raise UnboundVariable(n)
        levels.append(d.level)
    out = lattice.lub(levels)
    if out is None:
        raise ShredError(f"no common level for {sorted(names)}")
    return out


def _slice_level(gamma: Gamma, s: Stmt, lattice: Lattice) -> Level:
    """The slice a simple statement belongs to."""
    if isinstance(s, Assign):
        d = gamma.get(s.lvalue.base)
        if d is None or d.level is None:
            raise UnboundVariable(s.lvalue.base)
        return d.level
    if isinstance(s, (Sample, FactorS, ElimS, GenS)):
        return _level_of_names(gamma, free_vars(s), lattice)
    raise ShredError(f"not a simple statement: {s!r}")


def shred(gamma: Gamma, s: Stmt, lattice: Lattice = BASE) -> dict[Level, Stmt]:
    slices = _shred(gamma, s, lattice)
    return {l: normalize(slices[l]) for l in lattice.levels}


def _shred(gamma: Gamma, s: Stmt, lattice: Lattice) -> dict[Level, Stmt]:
    empty = {l: SKIP for l in lattice.levels}
    if isinstance(s, Skip):
        return empty
    if isinstance(s, Seq):
        a = _shred(gamma, s.first, lattice)
        b = _shred(gamma, s.second, lattice)
        return {l: seq_of([a[l], b[l]]) for l in lattice.levels}
    if isinstance(s, If):
        guard = _level_of_names(gamma, free_vars(s.cond), lattice)
        t = _shred(gamma, s.then, lattice)
        e = _shred(gamma, s.els, lattice)
        return _guarded(lattice, guard, t, e,
                        lambda th, el: If(s.cond, th, el))
    if isinstance(s, For):
        guard = _level_of_names(gamma, free_vars(s.lo) | free_vars(s.hi), lattice)
        inner = gamma.with_entry(s.binder, Decl(INT, guard))
        b = _shred(inner, s.body, lattice)
        return _guarded(lattice, guard, b, None,
                        lambda body, _unused: For(s.binder, s.lo, s.hi, body))
    level = _slice_level(gamma, s, lattice)
    out = dict(empty)
    out[level] = s
    return out


def _guarded(lattice: Lattice, guard: Level,
             a: dict[Level, Stmt], b: dict[Level, Stmt] | None,
             wrap) -> dict[Level, Stmt]:
    """Assemble guarded slices: levels below the guard merge into its slice."""
    def rewrap(th: Stmt, el: Stmt) -> Stmt:
        if isinstance(normalize(th), Skip) and (b is None or isinstance(normalize(el), Skip)):
            return SKIP
        return wrap(th, el)

    out: dict[Level, Stmt] = {}
    below = [l for l in lattice.levels if lattice.lt(l, guard)]
    merged = below + [guard]
    for l in lattice.levels:
        if l in below:
            out[l] = SKIP
        elif l == guard:
            th = seq_of([a[m] for m in merged])
            el = seq_of([b[m] for m in merged]) if b is not None else SKIP
            out[l] = rewrap(th, el)
        else:
            out[l] = rewrap(a[l], b[l] if b is not None else SKIP)
    return out


def recompose(slices: dict[Level, Stmt], lattice: Lattice = BASE) -> Stmt:
    return normalize(seq_of([slices[l] for l in lattice.levels]))


def is_single_level(gamma: Gamma, level: Level, s: Stmt,
                    lattice: Lattice = BASE) -> bool:
    """Writes only touch `level`; ~/factor contributions type exactly there."""
    if isinstance(s, Skip):
        return True
    if isinstance(s, Seq):
        return (is_single_level(gamma, level, s.first, lattice)
                and is_single_level(gamma, level, s.second, lattice))
    if isinstance(s, If):
        return (is_single_level(gamma, level, s.then, lattice)
                and is_single_level(gamma, level, s.els, lattice))
    if isinstance(s, For):
        inner = gamma.with_entry(s.binder, Decl(INT, level))
        return is_single_level(inner, level, s.body, lattice)
    try:
        return _slice_level(gamma, s, lattice) == level
    except (ShredError, UnboundVariable):
        return False
