"""Brute-force ground truth: enumerated joint tables and checks built on
them. Everything here works by running the interpreter cell by cell, so it
is independent of the type systems and the transformation it is used to
validate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .interp import EvalCounters, State, run
from .syntax import IntT, Program, is_bounded_int, writes
from .ci import CIPartition

DEFAULT_CAP = 2 ** 20


class OracleError(Exception):
    pass


@dataclass
class JointTable:
    axes: list[tuple[str, int]]  # enumerated parameters, declaration order
    entries: np.ndarray          # shape = tuple of supports
    context: State               # fixed values for everything else

    def axis_names(self) -> list[str]:
        return [n for n, _ in self.axes]

    def normalized(self) -> Optional[np.ndarray]:
        total = float(self.entries.sum())
        if total <= 0.0:
            return None
        return self.entries / total

    def marginal_without(self, name: str) -> "JointTable":
        i = self.axis_names().index(name)
        return JointTable([a for a in self.axes if a[0] != name],
                          self.entries.sum(axis=i), self.context)


def enumerable_params(p: Program, context: State) -> list[tuple[str, int]]:
    assigned = writes(p.body)
    out = []
    for name, d in p.gamma.items():
        if name in assigned or name in context:
            continue
        if is_bounded_int(d.type):
            assert isinstance(d.type, IntT) and d.type.bound is not None
            out.append((name, d.type.bound))
        else:
            raise OracleError(
                f"parameter {name} is neither fixed by the context nor a "
                f"bounded int (type {d.type!r})")
    return out


def enumerate_joint(p: Program, context: State, cap: int = DEFAULT_CAP) -> JointTable:
    """Density at every assignment of the bounded-int parameters not fixed
    by the context."""
    axes = enumerable_params(p, context)
    size = 1
    for _, k in axes:
        size *= k
    if size > cap:
        raise OracleError(f"joint table of {size} cells exceeds cap {cap}")
    shape = tuple(k for _, k in axes) or (1,)
    entries = np.empty(shape, dtype=float)
    if not axes:
        entries[0] = run(p, dict(context)).weight
        return JointTable([], entries, dict(context))
    for combo in itertools.product(*[range(1, k + 1) for _, k in axes]):
        store = dict(context)
        for (name, _), v in zip(axes, combo):
            store[name] = v
        entries[tuple(v - 1 for v in combo)] = run(p, store).weight
    return JointTable(axes, entries, dict(context))


# ---------------------------------------------------------------------------
# Context fixtures: example values, jittered per trial for continuous ones.


@dataclass(frozen=True)
class FixtureVar:
    value: object
    lo: Optional[float] = None
    hi: Optional[float] = None
    jitter: float = 0.15
    fixed: bool = False  # ints and structural constants stay put


Fixture = dict[str, FixtureVar]


def _jitter_value(v, fx: FixtureVar, rng: np.random.Generator):
    if isinstance(v, list):
        return [_jitter_value(x, fx, rng) for x in v]
    out = float(v) + fx.jitter * float(rng.standard_normal())
    if fx.lo is not None:
        out = max(out, fx.lo)
    if fx.hi is not None:
        out = min(out, fx.hi)
    return out


def draw_context(fixture: Fixture, rng: np.random.Generator) -> State:
    ctx: State = {}
    for name, fx in fixture.items():
        if fx.fixed:
            ctx[name] = fx.value
        else:
            ctx[name] = _jitter_value(fx.value, fx, rng)
    return ctx


# ---------------------------------------------------------------------------
# Preservation


@dataclass
class PreservationReport:
    max_rel_err: float
    num_points: int
    tol: float
    ok: bool
    worst_point: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "num_points": self.num_points,
            "tol": self.tol,
            "pass": self.ok,
            "worst_point": self.worst_point,
        }


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _align(t1: JointTable, t2: JointTable) -> tuple[np.ndarray, np.ndarray, list[tuple[str, int]]]:
    """Project both tables onto their shared axes (summing out the rest);
    a program compared against one that marginalised some variable away is
    checked on the common marginal."""
    shared = [a for a in t1.axes if a in t2.axes]
    a1, a2 = t1.entries, t2.entries

    def project(entries: np.ndarray, axes: list[tuple[str, int]]) -> np.ndarray:
        drop = tuple(i for i, a in enumerate(axes) if a not in shared)
        out = entries.sum(axis=drop) if drop else entries
        kept = [a for a in axes if a in shared]
        if kept != shared:
            out = np.transpose(out, [kept.index(a) for a in shared])
        return out

    if not shared and (t1.axes or t2.axes):
        return (np.asarray(t1.entries).reshape(-1).sum(keepdims=True),
                np.asarray(t2.entries).reshape(-1).sum(keepdims=True), [])
    return project(a1, t1.axes), project(a2, t2.axes), shared


def check_preservation(p1: Program, p2: Program, fixture: Fixture,
                       trials: int = 20, tol: float = 1e-8,
                       seed: int = 0) -> PreservationReport:
    """Pointwise comparison of the enumerated joints of two programs over
    `trials` random context draws. Freshly introduced factor-table
    variables are deterministic and never enumerated; axes present in only
    one program are summed out before comparing."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_point = None
    points = 0
    for _ in range(trials):
        ctx = draw_context(fixture, rng)
        t1 = enumerate_joint(p1, ctx)
        t2 = enumerate_joint(p2, ctx)
        a1, a2, shared = _align(t1, t2)
        if a1.shape != a2.shape:
            raise OracleError(f"parameter mismatch: {t1.axes} vs {t2.axes}")
        errs = np.abs(a1 - a2) / np.maximum(np.maximum(np.abs(a1), np.abs(a2)),
                                            1e-300)
        points += errs.size
        i = int(np.argmax(errs))
        if float(errs.flat[i]) > worst:
            worst = float(errs.flat[i])
            idx = np.unravel_index(i, errs.shape) if shared else ()
            worst_point = {n: int(v) + 1 for (n, _), v in zip(shared, idx)}
            worst_point["_context"] = {k: ctx[k] for k in sorted(ctx)}
    return PreservationReport(worst, points, tol, worst <= tol, worst_point)


# ---------------------------------------------------------------------------
# Conditional independence on tables


def check_ci_table(t: JointTable, partition: CIPartition, tol: float = 1e-9,
                   strict_axes: bool = True) -> bool:
    """Does p(x2, x3 | x1) factorise as p(x2|x1) * p(x3|x1) everywhere?

    Axes not named by the partition are treated as conditioning (x1) side
    unless strict_axes is set, in which case they are an error. A table
    that sums to zero passes vacuously.
    """
    names = t.axis_names()
    named = set(partition.x1) | set(partition.x2) | set(partition.x3)
    stray = [n for n in names if n not in named]
    if stray and strict_axes:
        raise OracleError(f"axes not covered by the partition: {stray}")
    x1 = [n for n in names if n in partition.x1 or n in stray]
    x2 = [n for n in names if n in partition.x2]
    x3 = [n for n in names if n in partition.x3]
    p = t.normalized()
    if p is None:
        return True
    perm = [names.index(n) for n in x1 + x2 + x3]
    arr = np.transpose(p, perm) if names else p
    dims = [k for _, k in t.axes]
    a = int(np.prod([dims[names.index(n)] for n in x1])) if x1 else 1
    b = int(np.prod([dims[names.index(n)] for n in x2])) if x2 else 1
    c = int(np.prod([dims[names.index(n)] for n in x3])) if x3 else 1
    joint = arr.reshape(a, b, c)
    for i in range(a):
        mass = float(joint[i].sum())
        if mass <= 0.0:
            continue
        cond = joint[i] / mass
        pb = cond.sum(axis=1)
        pc = cond.sum(axis=0)
        if not np.all(np.abs(cond - np.outer(pb, pc)) <= tol):
            return False
    return True


# ---------------------------------------------------------------------------
# Cost measurement


def measure_cost(p: Program, context: State) -> EvalCounters:
    """Counters from one density evaluation at a representative store
    (all enumerable parameters at their lowest support value)."""
    store = dict(context)
    for name, _k in enumerable_params(p, context):
        store[name] = 1
    return run(p, store).counters
