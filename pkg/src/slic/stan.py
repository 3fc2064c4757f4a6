"""Block-structured Stan-style output.

Slices the program and prints one block per phase: data-level inputs in
`data`, the data slice in `transformed data`, continuous model-level
parameters in `parameters`, the model slice in `model` (factors become
`target += log(E)`), and the genquant slice in `generated quantities`
with ~ rewritten to _rng assignments. Derived forms are desugared to
comprehension expressions first.

The text is a golden-file contract; it is not validated against a real
Stan toolchain. Programs with remaining discrete model-level parameters
are refused.
"""

from __future__ import annotations

from .syntax import (
    Arr, ArrayT, Assign, BASE, Call, Comp, ElimS, FactorS, For, GENQUANT,
    GenS, If, Index, IntT, MODEL, PhiE, Program, RealT, Sample, Seq, Skip,
    Stmt, TargetE, free_vars, normalize, stmts_of,
)
from .interp import desugar_elim, desugar_gen, desugar_phi
from .parser import expr_str, lvalue_str
from .shred import shred
from .typecheck import check_program
from .ci import resolve_base
from .elim import discrete_model_params


class EmitError(Exception):
    pass


def deep_desugar_stmt(s: Stmt) -> Stmt:
    if isinstance(s, ElimS):
        return deep_desugar_stmt(desugar_elim(ElimS(s.var, s.bound, s.body)))
    if isinstance(s, GenS):
        return deep_desugar_stmt(desugar_gen(GenS(s.var, s.bound, s.body)))
    if isinstance(s, Seq):
        return Seq(deep_desugar_stmt(s.first), deep_desugar_stmt(s.second))
    if isinstance(s, For):
        return For(s.binder, deep_desugar_expr(s.lo), deep_desugar_expr(s.hi),
                   deep_desugar_stmt(s.body))
    if isinstance(s, If):
        return If(deep_desugar_expr(s.cond), deep_desugar_stmt(s.then),
                  deep_desugar_stmt(s.els))
    if isinstance(s, Assign):
        return Assign(s.lvalue, deep_desugar_expr(s.expr))
    if isinstance(s, FactorS):
        return FactorS(deep_desugar_expr(s.expr))
    if isinstance(s, Sample):
        return Sample(s.lvalue, s.dist, tuple(deep_desugar_expr(a) for a in s.args))
    return s


def deep_desugar_expr(e):
    if isinstance(e, PhiE):
        return deep_desugar_expr(desugar_phi(e))
    if isinstance(e, TargetE):
        inner = deep_desugar_stmt(e.stmt)
        flat = stmts_of(normalize(inner))
        if len(flat) == 1 and isinstance(flat[0], FactorS):
            return flat[0].expr  # target of a lone factor is its argument
        return TargetE(inner)
    if isinstance(e, Comp):
        return Comp(deep_desugar_expr(e.body), e.binder,
                    deep_desugar_expr(e.lo), deep_desugar_expr(e.hi))
    if isinstance(e, Arr):
        return Arr(tuple(deep_desugar_expr(x) for x in e.elems))
    if isinstance(e, Call):
        return Call(e.fn, tuple(deep_desugar_expr(a) for a in e.args))
    if isinstance(e, Index):
        return Index(deep_desugar_expr(e.arr), deep_desugar_expr(e.idx))
    return e


def stan_decl(t, name: str) -> str:
    dims = []
    while isinstance(t, ArrayT):
        dims.append("" if t.size is None else str(t.size))
        t = t.elem
    if isinstance(t, RealT):
        base = "real"
    elif isinstance(t, IntT):
        base = f"int<lower=1,upper={t.bound}>" if t.bound is not None else "int"
    else:
        raise EmitError(f"cannot declare {name} of type {t!r}")
    return f"{base} {name}" + "".join(f"[{d}]" for d in dims)


def _ind(depth: int) -> str:
    return "    " * depth


def _lines(s: Stmt, depth: int, mode: str, merges: dict[int, str]) -> list[str]:
    ind = _ind(depth)
    if isinstance(s, Seq):
        out = []
        for sub in stmts_of(s):
            out.extend(_lines(sub, depth, mode, merges))
        return out
    prefix = merges.get(id(s), "")
    if isinstance(s, Skip):
        return []
    if isinstance(s, Assign):
        return [f"{ind}{prefix}{lvalue_str(s.lvalue)} = {expr_str(s.expr)};"]
    if isinstance(s, FactorS):
        if mode != "model":
            raise EmitError("factor statement outside the model block")
        return [f"{ind}target += log({expr_str(s.expr)});"]
    if isinstance(s, Sample):
        args = ", ".join(expr_str(a) for a in s.args)
        if mode == "model":
            return [f"{ind}{lvalue_str(s.lvalue)} ~ {s.dist}({args});"]
        if s.dist == "categorical":
            # draws need a simplex; the weights are normalised explicitly
            return [f"{ind}{prefix}{lvalue_str(s.lvalue)} = categorical_rng(normalize({args}));"]
        return [f"{ind}{prefix}{lvalue_str(s.lvalue)} = {s.dist}_rng({args});"]
    if isinstance(s, For):
        head = f"{ind}for ({s.binder} in {expr_str(s.lo)} : {expr_str(s.hi)}) {{"
        return [head] + _lines(s.body, depth + 1, mode, merges) + [ind + "}"]
    if isinstance(s, If):
        out = [f"{ind}if ({expr_str(s.cond)}) {{"]
        out += _lines(s.then, depth + 1, mode, merges)
        if not isinstance(s.els, Skip):
            out += [ind + "} else {"]
            out += _lines(s.els, depth + 1, mode, merges)
        out += [ind + "}"]
        return out
    raise EmitError(f"cannot emit statement {s!r}")


def emit_stan(p: Program) -> str:
    p = resolve_base(p)
    report = check_program(p)
    if not report.ok:
        raise EmitError("program does not typecheck: "
                        + "; ".join(str(v) for v in report.violations))
    leftover = discrete_model_params(p)
    if leftover:
        raise EmitError(
            "discrete model-level parameters remain (run the elimination "
            f"transform first): {leftover}")

    body = normalize(p.body)
    slices = shred(p.gamma, body, BASE)
    s_d, s_m, s_q = (deep_desugar_stmt(slices[l]) for l in BASE.levels)

    # declaration order: first body mention, then declaration order
    top = stmts_of(body)
    first_mention: dict[str, int] = {}
    for i, s in enumerate(top):
        for name in free_vars(s):
            first_mention.setdefault(name, i)
    gamma_pos = {n: i for i, n in enumerate(p.gamma)}

    def ordered(names: list[str]) -> list[str]:
        return sorted(names, key=lambda n: (first_mention.get(n, -1), gamma_pos[n]))

    from .syntax import writes as _writes
    assigned = _writes(body)

    by_slot: dict[str, list[str]] = {"data": [], "tdata": [], "params": [],
                                     "model": [], "gq": []}
    for name, d in p.gamma.items():
        if d.level == GENQUANT:
            by_slot["gq"].append(name)
        elif d.level == MODEL:
            by_slot["model" if name in assigned else "params"].append(name)
        else:
            by_slot["tdata" if name in assigned else "data"].append(name)

    def decls(names: list[str]) -> list[str]:
        return [_ind(1) + stan_decl(p.gamma.type_of(n), n) + ";" for n in ordered(names)]

    # generated quantities: merge declarations into defining statements
    merges: dict[int, str] = {}
    gq_standalone = []
    gq_top = stmts_of(s_q)
    for name in ordered(by_slot["gq"]):
        target = None
        if not isinstance(p.gamma.type_of(name), ArrayT):
            for s in gq_top:
                if isinstance(s, (Assign, Sample)) and s.lvalue.base == name \
                        and not s.lvalue.indices and id(s) not in merges:
                    target = s
                    break
                if name in free_vars(s):
                    break
        if target is not None:
            base = stan_decl(p.gamma.type_of(name), name)
            merges[id(target)] = base[:base.rfind(name)].rstrip() + " "
        else:
            gq_standalone.append(_ind(1) + stan_decl(p.gamma.type_of(name), name) + ";")

    def block(header: str, lines: list[str]) -> str:
        if not lines:
            return header + " {\n}"
        return header + " {\n" + "\n".join(lines) + "\n}"

    model_lines = decls(by_slot["model"]) + _lines(s_m, 1, "model", {})
    gq_lines = gq_standalone + _lines(s_q, 1, "gq", merges)

    text = "\n".join([
        block("data", decls(by_slot["data"])),
        block("transformed data", decls(by_slot["tdata"]) + _lines(s_d, 1, "model", {})),
        block("parameters", decls(by_slot["params"])),
        block("model", model_lines),
        block("generated quantities", gq_lines),
    ])
    return text + "\n"
