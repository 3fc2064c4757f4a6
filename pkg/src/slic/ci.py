"""Conditional independence by typing over the l1/l2/l3 semi-lattice.

A program that checks at l1 with parameters split across l2/l3/l1 has
its l2 parameters independent of its l3 parameters given the l1 ones.
Queries fix the partition on parameters and search the remaining labels
(deterministic variables, and data-level inputs, which may soundly move
into the conditioning side); blanket search instead pins one variable to
l2 and lets cost preferences l3 < l1 < l2 shrink the blanket.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .syntax import CI, Decl, Gamma, L1, L2, L3, Level, Program, Stmt
from .typecheck import (
    CI_COSTS, InferenceOutcome, TypingReport, Violation, check_stmt,
    infer_levels, solve_levels,
)


@dataclass(frozen=True)
class CIPartition:
    """Disjoint parameter sets claiming x2 independent of x3 given x1."""
    x1: frozenset[str]
    x2: frozenset[str]
    x3: frozenset[str]


@dataclass
class CIQueryResult:
    derivable: bool
    witness: Optional[Gamma] = None
    violations: list[Violation] = None  # type: ignore[assignment]


def check_ci(gamma: Gamma, s: Stmt) -> TypingReport:
    """Does gamma (with concrete l1/l2/l3 levels) type s at l1?"""
    return check_stmt(gamma, s, L1, CI)


def infer_ci(gamma: Gamma, s: Stmt, minimize: bool = True) -> InferenceOutcome:
    """Fill placeholder CI levels minimising cost l3=0 < l1=1 < l2=2."""
    domains = {name: ([d.level] if d.level is not None else [L1, L2, L3])
               for name, d in gamma.items()}
    return solve_levels(gamma, s, CI, CI_COSTS, domains, minimize=minimize)


def parameters(p: Program) -> list[str]:
    """Variables never deterministically assigned: the domain the density
    ranges over (data-level observations included)."""
    return p.param_names()


def resolve_base(p: Program) -> Program:
    if p.gamma.concrete():
        return p
    out = infer_levels(p)
    if not out.report.ok:
        raise ValueError("program does not type in the phase system: "
                         + "; ".join(str(v) for v in out.report.violations))
    return Program(out.report.gamma, p.body)


def ci_query(p: Program, partition: CIPartition) -> CIQueryResult:
    """Is the partition's independence derivable by some l1/l2/l3 typing?

    The partition fixes the labels of parameters; deterministic variables
    and data-level inputs are free search labels (conditioning on extra
    data-level variables is sound by weak union).
    """
    p = resolve_base(p)
    params = set(parameters(p))
    given = set(partition.x1) | set(partition.x2) | set(partition.x3)
    if given != params:
        missing = params - given
        extra = given - params
        raise ValueError(
            f"partition must cover the parameters exactly; missing={sorted(missing)}, "
            f"unknown={sorted(extra)}")
    entries = []
    for name, d in p.gamma.items():
        if name in partition.x2:
            lvl: Optional[Level] = L2
        elif name in partition.x3:
            lvl = L3
        elif name in partition.x1:
            lvl = L1
        else:
            lvl = None  # deterministic or data-level: free
        entries.append((name, Decl(d.type, lvl)))
    out = infer_ci(Gamma(entries), p.body, minimize=False)
    if out.report.ok:
        return CIQueryResult(True, out.report.gamma, [])
    return CIQueryResult(False, None, out.report.violations)


@dataclass
class BlanketResult:
    partition: CIPartition
    gamma: Gamma  # full CI labelling, deterministic variables included


def markov_blanket(p: Program, z: str) -> BlanketResult:
    """Smallest conditioning set for z: pin z to l2, let everything else
    float, and take the l1 parameters of the cheapest typing."""
    p = resolve_base(p)
    if z not in parameters(p):
        raise ValueError(f"{z} is not a parameter")
    entries = [(name, Decl(d.type, L2 if name == z else None))
               for name, d in p.gamma.items()]
    out = infer_ci(Gamma(entries), p.body, minimize=True)
    if not out.report.ok:
        raise ValueError("no conditional-independence typing exists for "
                         f"{z}: " + "; ".join(str(v) for v in out.report.violations))
    resolved = out.report.gamma
    params = set(parameters(p))
    sides = {L1: set(), L2: set(), L3: set()}
    for name in params:
        sides[resolved.level_of(name)].add(name)
    part = CIPartition(frozenset(sides[L1]), frozenset(sides[L2]),
                       frozenset(sides[L3]))
    return BlanketResult(part, resolved)
