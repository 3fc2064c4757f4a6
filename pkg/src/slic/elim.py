"""Compile-time marginalisation of bounded discrete parameters.

One step rewrites a program with a discrete model-level parameter z into
an equivalent one where z is genquant: slice off the model part, find z's
influence cone with the CI system, tabulate the cone's weight over z's
neighbours into a fresh factor, and re-draw z from its exact conditional.
Folding the step over every discrete model-level parameter leaves a
program whose model phase is purely continuous.
"""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    ArrayT, Assign, BASE, CI, Decl, ElimS, FactorS, For, Gamma, GENQUANT,
    GenS, If, Index, IntT, L1, L2, LValue, MODEL, PhiE, Program, REAL,
    Sample, Seq, Skip, SKIP, Stmt, Var, free_vars, is_bounded_int,
    is_continuous, normalize, seq_of, writes,
)
from .shred import shred
from .typecheck import check_program
from .ci import infer_ci, resolve_base


class TransformError(Exception):
    pass


def store_of(s: Stmt) -> Stmt:
    """Same store effects, unit weight: every ~/factor becomes skip."""
    if isinstance(s, Assign):
        return s
    if isinstance(s, Seq):
        return Seq(store_of(s.first), store_of(s.second))
    if isinstance(s, If):
        return If(s.cond, store_of(s.then), store_of(s.els))
    if isinstance(s, For):
        return For(s.binder, s.lo, s.hi, store_of(s.body))
    if isinstance(s, (FactorS, Sample, ElimS, GenS)):
        return SKIP
    if isinstance(s, Skip):
        return s
    raise TypeError(f"store_of: unknown statement {s!r}")


def discrete_model_params(p: Program) -> list[str]:
    assigned = writes(p.body)
    return [n for n, d in p.gamma.items()
            if d.level == MODEL and is_bounded_int(d.type) and n not in assigned]


def gamma_to_z(p: Program, z: str, scratch: set[str] | None = None) -> Gamma:
    """The partial CI environment for eliminating z: data and continuous
    model parameters are pinned l1, z is l2, everything else at or below
    model is a placeholder. Genquant entries are dropped, except those in
    `scratch`: variables whose only life is inside earlier elim/gen bodies
    still occur textually in the model slice and keep a free placeholder
    label (they can never be neighbours, their base level being genquant)."""
    gamma = p.gamma
    d = gamma.get(z)
    if d is None or d.level != MODEL or not is_bounded_int(d.type):
        raise TransformError(f"{z} is not a bounded discrete model-level parameter")
    assigned = writes(p.body)
    entries = []
    for name, decl in gamma.items():
        if decl.level == GENQUANT:
            if scratch and name in scratch and name != z:
                entries.append((name, Decl(decl.type, None)))
            continue
        if name == z:
            entries.append((name, Decl(decl.type, L2)))
        elif decl.level == BASE.bottom:  # data
            entries.append((name, Decl(decl.type, L1)))
        elif name not in assigned and is_continuous(decl.type):
            entries.append((name, Decl(decl.type, L1)))
        else:
            entries.append((name, Decl(decl.type, None)))
    return Gamma(entries)


def neighbours(gamma_base: Gamma, gamma_ci: Gamma, z: str,
               assigned: set[str]) -> list[str]:
    """Discrete model-level parameters sitting at l1 next to z, in
    declaration order."""
    out = []
    for name, d in gamma_ci.items():
        if name == z or d.level != L1 or name in assigned:
            continue
        base = gamma_base.get(name)
        if base is not None and base.level == MODEL and is_bounded_int(base.type):
            out.append(name)
    return out


def fresh_factor_name(gamma: Gamma, taken: set[str]) -> str:
    i = 1
    while f"f{i}" in gamma or f"f{i}" in taken:
        i += 1
    return f"f{i}"


@dataclass
class ElimStep:
    program: Program
    z: str
    factor_name: str
    neighbours: list[str]
    ci_gamma: Gamma


def eliminate(p: Program, z: str) -> ElimStep:
    """One marginalisation step; the result's gamma has z at genquant."""
    p = resolve_base(p)
    report = check_program(p)
    if not report.ok:
        raise TransformError("input program does not typecheck: "
                             + "; ".join(str(v) for v in report.violations))
    d = p.gamma.get(z)
    if d is None or d.level != MODEL or not is_bounded_int(d.type):
        raise TransformError(f"{z} is not a discrete model-level parameter")
    bound = d.type.bound
    assert bound is not None

    slices = shred(p.gamma, p.body, BASE)
    s_d, s_m, s_q = (slices[l] for l in BASE.levels)

    gm = gamma_to_z(p, z, scratch=free_vars(s_m))
    ci_out = infer_ci(gm, s_m)
    if not ci_out.report.ok:
        raise TransformError(
            f"conditional-independence inference failed while eliminating {z}: "
            + "; ".join(str(v) for v in ci_out.report.violations))
    gm = ci_out.report.gamma

    ci_slices = shred(gm, s_m, CI)
    s1, s2, s3 = (ci_slices[l] for l in CI.levels)

    assigned = writes(p.body)
    ne = neighbours(p.gamma, gm, z, assigned)
    fname = fresh_factor_name(p.gamma, set())

    phi = PhiE(tuple((n, _bound_of(p.gamma, n)) for n in ne), ElimS(z, bound, s2))
    factor_arg = Var(fname)
    for n in ne:
        factor_arg = Index(factor_arg, Var(n))
    new_model = seq_of([
        s1,
        Assign(LValue(fname), phi),
        FactorS(factor_arg),
        s3,
        GenS(z, bound, s2),
        store_of(s2),
    ])
    new_body = normalize(seq_of([s_d, new_model, s_q]))

    ftype = REAL
    for n in reversed(ne):
        ftype = ArrayT(ftype, _bound_of(p.gamma, n))
    entries = []
    for name, decl in p.gamma.items():
        ci = gm.get(name)
        if ci is not None and ci.level == L2:
            entries.append((name, Decl(decl.type, GENQUANT)))
        else:
            entries.append((name, decl))
    entries.append((fname, Decl(ftype, MODEL)))
    new_gamma = Gamma(entries)

    out = Program(new_gamma, new_body)
    post = check_program(out)
    if not post.ok:
        raise TransformError(
            f"transformed program fails to typecheck after eliminating {z}: "
            + "; ".join(str(v) for v in post.violations))
    if new_gamma.level_of(z) != GENQUANT:
        raise TransformError(f"{z} did not move to genquant")
    return ElimStep(out, z, fname, ne, gm)


def _bound_of(gamma: Gamma, name: str) -> int:
    t = gamma.type_of(name)
    if not is_bounded_int(t):
        raise TransformError(f"{name} has no static support bound")
    assert isinstance(t, IntT) and t.bound is not None
    return t.bound


def transform_all(p: Program, order: list[str] | None = None) -> Program:
    """Eliminate every discrete model-level parameter, one step each."""
    p = resolve_base(p)
    todo = discrete_model_params(p)
    if order is not None:
        if sorted(order) != sorted(todo):
            raise TransformError(
                f"elimination order {order} must cover exactly {todo}")
        todo = list(order)
    for z in todo:
        p = eliminate(p, z).program
    return p
