"""Big-step evaluation: state transformation plus a multiplicative weight.

A sample statement `L ~ d(args)` evaluates BOTH sides and multiplies the
weight by the density d(value | args); it never assigns. `target(S)`
evaluates S from weight 1 and returns the accumulated weight, discarding
the inner state. Any runtime fault (unbound name, bad index, invalid
distribution parameter, negative factor) raises EvalError: the density is
undefined at that point.

Weights are linear-domain floats. Values are plain Python floats, ints and
lists; states are dicts updated functionally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

from .syntax import (
    Arr, ArrayT, Assign, BaseType, Call, Comp, ConstI, ConstR, ElimS,
    FactorS, For, GenS, If, Index, IntT, LValue, PhiE, Program, RealT,
    Sample, Seq, Skip, Stmt, TargetE, Var,
)

Value = Union[float, int, list]
State = dict[str, Value]


class EvalError(Exception):
    """Evaluation fault; the density is undefined."""


@dataclass
class EvalCounters:
    pdf_evals: int = 0
    factor_evals: int = 0


# ---------------------------------------------------------------------------
# Distributions: name -> pdf(value, *params). Values outside the support
# yield weight 0; invalid parameters raise EvalError.

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _normal_pdf(x: Value, mu: Value, sigma: Value) -> float:
    _need_number(x, "normal value")
    _need_number(mu, "normal location")
    _need_number(sigma, "normal scale")
    if sigma <= 0:
        raise EvalError(f"normal: scale must be positive, got {sigma}")
    z = (x - mu) / sigma
    return math.exp(-0.5 * z * z) / (sigma * _SQRT_2PI)


def _beta_pdf(x: Value, a: Value, b: Value) -> float:
    _need_number(x, "beta value")
    if a <= 0 or b <= 0:
        raise EvalError(f"beta: shape parameters must be positive, got {a}, {b}")
    if x < 0.0 or x > 1.0:
        return 0.0
    try:
        norm = math.gamma(a + b) / (math.gamma(a) * math.gamma(b))
        return (x ** (a - 1.0)) * ((1.0 - x) ** (b - 1.0)) * norm
    except (ZeroDivisionError, OverflowError, ValueError) as exc:
        raise EvalError(f"beta: pdf undefined at {x} with ({a}, {b})") from exc


def _bern_pdf(x: Value, p: Value) -> float:
    # support {1, 2} with P(2) = p; matches 1-based indexing elsewhere
    _need_number(p, "bern probability")
    if p < 0.0 or p > 1.0:
        raise EvalError(f"bern: probability must be in [0, 1], got {p}")
    if not isinstance(x, int):
        raise EvalError(f"bern: value must be an integer, got {x!r}")
    if x == 1:
        return 1.0 - p
    if x == 2:
        return float(p)
    return 0.0


def _categorical_pdf(x: Value, w: Value) -> float:
    # weights are normalised internally; support is 1..len(w)
    if not isinstance(w, list) or not w:
        raise EvalError("categorical: weights must be a nonempty array")
    total = 0.0
    for v in w:
        _need_number(v, "categorical weight")
        if v < 0:
            raise EvalError(f"categorical: negative weight {v}")
        total += v
    if total <= 0.0:
        raise EvalError("categorical: weights sum to zero")
    if not isinstance(x, int) or not (1 <= x <= len(w)):
        return 0.0
    return w[x - 1] / total


DISTRIBUTIONS = {
    "normal": (_normal_pdf, 2),
    "beta": (_beta_pdf, 2),
    "bern": (_bern_pdf, 1),
    "bernoulli": (_bern_pdf, 1),
    "categorical": (_categorical_pdf, 1),
}


def _need_number(v: Value, what: str) -> None:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(f"{what}: expected a number, got {v!r}")


# ---------------------------------------------------------------------------
# Builtin functions


def _numeric2(name: str, f):
    def apply(a: Value, b: Value) -> Value:
        _need_number(a, name)
        _need_number(b, name)
        return f(a, b)
    return apply


def _apply_builtin(fn: str, args: list[Value]) -> Value:
    if fn == "+" and len(args) == 2:
        return _numeric2("+", lambda a, b: a + b)(*args)
    if fn == "-" and len(args) == 2:
        return _numeric2("-", lambda a, b: a - b)(*args)
    if fn == "-" and len(args) == 1:
        _need_number(args[0], "-")
        return -args[0]
    if fn == "*" and len(args) == 2:
        return _numeric2("*", lambda a, b: a * b)(*args)
    if fn == "/" and len(args) == 2:
        _need_number(args[0], "/")
        _need_number(args[1], "/")
        if args[1] == 0:
            raise EvalError("division by zero")
        return args[0] / args[1]
    if fn in (">", "<", "==") and len(args) == 2:
        _need_number(args[0], fn)
        _need_number(args[1], fn)
        a, b = args
        return int(a > b if fn == ">" else a < b if fn == "<" else a == b)
    if fn == "sum" and len(args) == 1:
        if not isinstance(args[0], list):
            raise EvalError("sum: expected an array")
        total: Value = 0
        for v in args[0]:
            _need_number(v, "sum element")
            total = total + v
        return total
    if fn == "max":
        if len(args) == 1 and isinstance(args[0], list):
            if not args[0]:
                raise EvalError("max: empty array")
            return max(args[0])
        if len(args) == 2:
            _need_number(args[0], "max")
            _need_number(args[1], "max")
            return max(args)
    if fn == "exp" and len(args) == 1:
        _need_number(args[0], "exp")
        return math.exp(args[0])
    if fn == "log" and len(args) == 1:
        _need_number(args[0], "log")
        if args[0] <= 0:
            raise EvalError(f"log of non-positive value {args[0]}")
        return math.log(args[0])
    raise EvalError(f"unknown builtin {fn}/{len(args)}")


# ---------------------------------------------------------------------------
# Value lookup / functional update (1-based indices)


def _index(u: Value, i: Value, what: str = "index") -> Value:
    if not isinstance(u, list):
        raise EvalError(f"{what}: not an array: {u!r}")
    if not isinstance(i, int) or isinstance(i, bool):
        raise EvalError(f"{what}: array index must be an integer, got {i!r}")
    if not (1 <= i <= len(u)):
        raise EvalError(f"{what}: index {i} out of range 1..{len(u)}")
    return u[i - 1]


def _updated(u: Value, indices: list[Value], v: Value) -> Value:
    if not indices:
        return v
    _index(u, indices[0], "assignment")
    out = list(u)
    out[indices[0] - 1] = _updated(u[indices[0] - 1], indices[1:], v)
    return out


def _pdf_broadcast(pdf, val: Value, args: list[Value], ctr: EvalCounters) -> float:
    """A ~ statement over an array lvalue applies elementwise (scalar
    parameters shared); each leaf counts as one density evaluation."""
    if isinstance(val, list):
        w = 1.0
        for v in val:
            w *= _pdf_broadcast(pdf, v, args, ctr)
        return w
    ctr.pdf_evals += 1
    return pdf(val, *args)


# ---------------------------------------------------------------------------
# Desugaring of the derived forms (evaluation and Stan emission only)


def desugar_elim(s: ElimS) -> FactorS:
    comp = Comp(TargetE(s.body), s.var, ConstI(1), ConstI(s.bound))
    return FactorS(Call("sum", (comp,)))


def desugar_gen(s: GenS) -> Sample:
    comp = Comp(TargetE(s.body), s.var, ConstI(1), ConstI(s.bound))
    return Sample(LValue(s.var), "categorical", (comp,))


def desugar_phi(e: PhiE):
    out = TargetE(e.body)
    for name, k in reversed(e.binders):
        out = Comp(out, name, ConstI(1), ConstI(k))
    return out


# ---------------------------------------------------------------------------
# Evaluation


def eval_expr(state: State, e, ctr: Optional[EvalCounters] = None) -> Value:
    ctr = ctr if ctr is not None else EvalCounters()
    if isinstance(e, Var):
        if e.name not in state:
            raise EvalError(f"unbound variable {e.name}")
        return state[e.name]
    if isinstance(e, (ConstR, ConstI)):
        return e.value
    if isinstance(e, Arr):
        return [eval_expr(state, x, ctr) for x in e.elems]
    if isinstance(e, Index):
        return _index(eval_expr(state, e.arr, ctr), eval_expr(state, e.idx, ctr))
    if isinstance(e, Call):
        return _apply_builtin(e.fn, [eval_expr(state, a, ctr) for a in e.args])
    if isinstance(e, Comp):
        lo = eval_expr(state, e.lo, ctr)
        hi = eval_expr(state, e.hi, ctr)
        if not isinstance(lo, int) or not isinstance(hi, int):
            raise EvalError("comprehension bounds must be integers")
        out = []
        for i in range(lo, hi + 1):
            inner = dict(state)
            inner[e.binder] = i  # may shadow a global; expressions cannot leak
            out.append(eval_expr(inner, e.body, ctr))
        return out
    if isinstance(e, TargetE):
        _, w = eval_stmt(state, e.stmt, ctr)
        return w
    if isinstance(e, PhiE):
        return eval_expr(state, desugar_phi(e), ctr)
    raise EvalError(f"eval_expr: unknown expression {e!r}")


def eval_stmt(state: State, s: Stmt, ctr: Optional[EvalCounters] = None) -> tuple[State, float]:
    ctr = ctr if ctr is not None else EvalCounters()
    if isinstance(s, Skip):
        return state, 1.0
    if isinstance(s, Assign):
        v = eval_expr(state, s.expr, ctr)
        idx = [eval_expr(state, i, ctr) for i in s.lvalue.indices]
        new = dict(state)
        if idx:
            if s.lvalue.base not in state:
                raise EvalError(f"indexed assignment to unbound {s.lvalue.base}")
            new[s.lvalue.base] = _updated(state[s.lvalue.base], idx, v)
        else:
            new[s.lvalue.base] = v
        return new, 1.0
    if isinstance(s, Seq):
        s1, w1 = eval_stmt(state, s.first, ctr)
        s2, w2 = eval_stmt(s1, s.second, ctr)
        return s2, w1 * w2
    if isinstance(s, For):
        lo = eval_expr(state, s.lo, ctr)
        hi = eval_expr(state, s.hi, ctr)
        if not isinstance(lo, int) or not isinstance(hi, int):
            raise EvalError("loop bounds must be integers")
        cur = state
        weight = 1.0
        had = s.binder in state
        old = state.get(s.binder)
        for i in range(lo, hi + 1):
            scoped = dict(cur)
            scoped[s.binder] = i
            scoped, w = eval_stmt(scoped, s.body, ctr)
            scoped.pop(s.binder, None)
            if had:
                scoped[s.binder] = old
            cur = scoped
            weight *= w
        return cur, weight
    if isinstance(s, If):
        c = eval_expr(state, s.cond, ctr)
        _need_number(c, "if guard")
        return eval_stmt(state, s.then if c != 0 else s.els, ctr)
    if isinstance(s, FactorS):
        v = eval_expr(state, s.expr, ctr)
        _need_number(v, "factor")
        if v < 0:
            raise EvalError(f"factor: negative weight {v}")
        ctr.factor_evals += 1
        return state, float(v)
    if isinstance(s, Sample):
        if s.lvalue.base not in state:
            raise EvalError(f"unbound variable {s.lvalue.base}")
        val = state[s.lvalue.base]
        for i in s.lvalue.indices:
            val = _index(val, eval_expr(state, i, ctr), "sample lvalue")
        args = [eval_expr(state, a, ctr) for a in s.args]
        if s.dist not in DISTRIBUTIONS:
            raise EvalError(f"unknown distribution {s.dist}")
        pdf, arity = DISTRIBUTIONS[s.dist]
        if len(args) != arity:
            raise EvalError(f"{s.dist} expects {arity} parameter(s), got {len(args)}")
        w = _pdf_broadcast(pdf, val, args, ctr)
        if w < 0:
            raise EvalError(f"{s.dist}: negative density {w}")
        return state, float(w)
    if isinstance(s, ElimS):
        return eval_stmt(state, desugar_elim(s), ctr)
    if isinstance(s, GenS):
        return eval_stmt(state, desugar_gen(s), ctr)
    raise EvalError(f"eval_stmt: unknown statement {s!r}")


# ---------------------------------------------------------------------------
# Program-level entry points


def value_conforms(v: Value, t: BaseType) -> bool:
    if isinstance(t, RealT):
        return isinstance(v, (int, float)) and not isinstance(v, bool)
    if isinstance(t, IntT):
        if not isinstance(v, int) or isinstance(v, bool):
            return False
        return t.bound is None or 1 <= v <= t.bound
    if isinstance(t, ArrayT):
        if not isinstance(v, list):
            return False
        if t.size is not None and len(v) != t.size:
            return False
        return all(value_conforms(x, t.elem) for x in v)
    return False


def zero_value(t: BaseType) -> Optional[Value]:
    """A type-conforming default, or None when the size is unknown."""
    if isinstance(t, RealT):
        return 0.0
    if isinstance(t, IntT):
        return 1 if t.bound is not None else 0
    if isinstance(t, ArrayT):
        if t.size is None:
            return None
        elem = zero_value(t.elem)
        return None if elem is None else [elem for _ in range(t.size)]
    return None


def initial_sigma(program: Program) -> State:
    """Defaults for deterministically-assigned variables of known shape."""
    out: State = {}
    for name in program.sigma_names():
        v = zero_value(program.gamma.type_of(name))
        if v is not None:
            out[name] = v
    return out


class NonConformingStore(EvalError):
    pass


def check_store(program: Program, store: State) -> None:
    """Every parameter must be present; all provided values must conform."""
    for name in program.param_names():
        if name not in store:
            raise NonConformingStore(f"missing value for parameter {name}")
    for name, v in store.items():
        d = program.gamma.get(name)
        if d is None:
            raise NonConformingStore(f"store has undeclared variable {name}")
        if not value_conforms(v, d.type):
            raise NonConformingStore(
                f"value for {name} does not conform to {d.type!r}: {v!r}")


@dataclass
class RunResult:
    state: State
    weight: float
    counters: EvalCounters = field(default_factory=EvalCounters)


def run(program: Program, store: State, check: bool = True) -> RunResult:
    """Evaluate the program body on initial_sigma overlaid with `store`."""
    if check:
        check_store(program, store)
    merged = initial_sigma(program)
    merged.update(store)
    ctr = EvalCounters()
    state, weight = eval_stmt(merged, program.body, ctr)
    return RunResult(state, weight, ctr)


def density(program: Program, sigma: State, x: State) -> float:
    """Weight of the program at the given deterministic/parameter stores."""
    merged = dict(sigma)
    merged.update(x)
    return run(program, merged).weight


def density_counted(program: Program, store: State) -> tuple[float, EvalCounters]:
    r = run(program, store)
    return r.weight, r.counters
