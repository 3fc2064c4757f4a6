"""Concrete syntax: tokenizer, recursive-descent parser, pretty-printer.

Programs are C-like; declarations `[data|model|genquant]? basetype name
(= expr | ~ dist(args))? ;` may appear anywhere and are hoisted into the
typing environment, leaving the defining statement (if any) in place.
`//` starts a line comment. Files use the `.slic` extension.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .syntax import (
    Arr, ArrayT, Assign, BaseType, Call, Comp, ConstI, ConstR, DATA, Decl,
    ElimS, For, FactorS, Gamma, GENQUANT, GenS, If, Index, IntT, LValue,
    Level, MODEL, PhiE, Program, RealT, Sample, Seq, Skip, SKIP, Stmt,
    TargetE, Var, free_vars, seq_of, stmts_of,
)


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


KEYWORDS = {
    "data", "model", "genquant", "real", "int", "for", "in", "if", "else",
    "skip", "factor", "target", "elim", "gen", "phi",
}

LEVEL_KW = {"data": DATA, "model": MODEL, "genquant": GENQUANT}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|[()\[\]{}<>,;:~=+\-*/|])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'ident' | 'op' | 'eof'
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ParseError([Diagnostic(line, col, f"unexpected character {src[i]!r}")])
        text = m.group(0)
        kind = m.lastgroup or "op"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        i = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.decls: list[tuple[str, Decl, Token]] = []
        self._unresolved_bounds: list[tuple[str, Token]] = []

    # -- token helpers

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.peek()
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind != "eof"

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if t.text != text or t.kind == "eof":
            got = repr(t.text) if t.kind != "eof" else "end of input"
            self.fail(t, f"expected {text!r}, found {got}")
        return self.next()

    def fail(self, tok: Token, message: str) -> None:
        raise ParseError([Diagnostic(tok.line, tok.col, message)])

    # -- program

    def program(self) -> Program:
        stmts = self.items_until("eof")
        gamma_entries: dict[str, Decl] = {}
        for name, decl, tok in self.decls:
            if name in gamma_entries:
                self.fail(tok, f"duplicate declaration of {name!r}")
            gamma_entries[name] = decl
        gamma = Gamma(gamma_entries.items())
        body = _resolve_gen_bounds(seq_of(stmts), gamma, self)
        return Program(gamma, body)

    def items_until(self, end: str) -> list[Stmt]:
        stmts: list[Stmt] = []
        while not (self.at(end) or (end == "eof" and self.peek().kind == "eof")):
            s = self.item()
            if s is not None and not isinstance(s, Skip):
                stmts.append(s)
        return stmts

    def item(self) -> Optional[Stmt]:
        """One declaration or statement; declarations are recorded and yield
        their defining statement (or None for a bare declaration)."""
        t = self.peek()
        if t.text in LEVEL_KW or self.is_type_start():
            return self.declaration()
        return self.statement()

    def is_type_start(self) -> bool:
        return self.peek().text in ("real", "int")

    def declaration(self) -> Optional[Stmt]:
        start = self.peek()
        level: Optional[Level] = None
        if self.peek().text in LEVEL_KW:
            level = LEVEL_KW[self.next().text]
        ty = self.base_type()
        name_tok = self.peek()
        if name_tok.kind != "ident" or name_tok.text in KEYWORDS:
            self.fail(name_tok, "expected variable name in declaration")
        name = self.next().text
        self.decls.append((name, Decl(ty, level), start))
        pos = (start.line, start.col)
        stmt: Optional[Stmt] = None
        if self.accept("="):
            e = self.expr()
            stmt = Assign(LValue(name), e, pos=pos)
        elif self.accept("~"):
            dist, args = self.dist_call()
            stmt = Sample(LValue(name), dist, args, pos=pos)
        self.expect(";")
        return stmt

    def base_type(self) -> BaseType:
        t = self.next()
        if t.text == "real":
            ty: BaseType = RealT()
        elif t.text == "int":
            bound = None
            if self.accept("<"):
                n = self.peek()
                if n.kind != "num" or "." in n.text:
                    self.fail(n, "expected integer bound in int<...>")
                bound = int(self.next().text)
                if bound < 1:
                    self.fail(n, "int bound must be >= 1")
                self.expect(">")
            ty = IntT(bound)
        else:
            self.fail(t, f"expected type, found {t.text!r}")
        # array suffixes, outermost dimension first: real[2][3]
        sizes: list[Optional[int]] = []
        while self.at("["):
            self.next()
            size: Optional[int] = None
            if not self.at("]"):
                n = self.next()
                if n.kind == "num" and "." not in n.text:
                    size = int(n.text)
                elif n.kind != "ident":
                    self.fail(n, "expected array size")
                # identifier sizes are accepted but not statically tracked
            self.expect("]")
            sizes.append(size)
        for size in reversed(sizes):
            ty = ArrayT(ty, size)
        return ty

    # -- statements

    def statement(self) -> Stmt:
        t = self.peek()
        pos = (t.line, t.col)
        if self.accept("skip"):
            self.expect(";")
            return Skip(pos=pos)
        if self.accept("factor"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            self.expect(";")
            return FactorS(e, pos=pos)
        if self.accept("for"):
            self.expect("(")
            # optional level/type annotations on the binder are accepted
            if self.peek().text in LEVEL_KW:
                self.next()
            if self.peek().text == "int":
                self.next()
            binder = self.ident("loop binder")
            self.expect("in")
            lo = self.expr()
            self.expect(":")
            hi = self.expr()
            self.expect(")")
            body = self.block()
            return For(binder, lo, hi, body, pos=pos)
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            els: Stmt = SKIP
            if self.accept("else"):
                els = self.block()
            return If(cond, then, els, pos=pos)
        if t.text in ("elim", "gen"):
            self.next()
            self.expect("(")
            var, bound = self.bounded_binder()
            self.expect(")")
            body = self.block()
            cls = ElimS if t.text == "elim" else GenS
            return cls(var, bound, body, pos=pos)
        if self.accept("{"):
            stmts = self.items_until("}")
            self.expect("}")
            return seq_of(stmts)
        # lvalue = expr;  or  lvalue ~ dist(args);
        lv = self.lvalue()
        if self.accept("="):
            e = self.expr()
            self.expect(";")
            return Assign(lv, e, pos=pos)
        if self.accept("~"):
            dist, args = self.dist_call()
            self.expect(";")
            return Sample(lv, dist, args, pos=pos)
        self.fail(self.peek(), "expected '=' or '~' after lvalue")
        raise AssertionError  # unreachable

    def block(self) -> Stmt:
        if self.accept("{"):
            stmts = self.items_until("}")
            self.expect("}")
            return seq_of(stmts)
        s = self.item()
        return s if s is not None else SKIP

    def bounded_binder(self) -> tuple[str, int]:
        """`int<K> name`; a missing `<K>` is resolved from the binder's
        declaration after the whole program has been read (0 until then)."""
        t = self.expect("int")
        bound = 0
        if self.accept("<"):
            n = self.next()
            if n.kind != "num":
                self.fail(n, "expected integer bound")
            bound = int(n.text)
            self.expect(">")
        name = self.ident("binder name")
        if bound == 0:
            self._unresolved_bounds.append((name, t))
        return name, bound

    def ident(self, what: str) -> str:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            self.fail(t, f"expected {what}")
        return self.next().text

    def lvalue(self) -> LValue:
        base = self.ident("variable")
        indices = []
        while self.at("["):
            self.next()
            indices.append(self.expr())
            self.expect("]")
        return LValue(base, tuple(indices))

    def dist_call(self) -> tuple[str, tuple]:
        name = self.ident("distribution name")
        self.expect("(")
        args = self.args()
        self.expect(")")
        return name, args

    def args(self) -> tuple:
        if self.at(")"):
            return ()
        out = [self.expr()]
        while self.accept(","):
            out.append(self.expr())
        return tuple(out)

    # -- expressions (precedence: cmp < add < mul < unary < postfix)

    def expr(self):
        return self.cmp_expr()

    def cmp_expr(self):
        left = self.add_expr()
        while self.peek().text in (">", "<", "=="):
            op = self.next().text
            right = self.add_expr()
            left = Call(op, (left, right))
        return left

    def add_expr(self):
        left = self.mul_expr()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            right = self.mul_expr()
            left = Call(op, (left, right))
        return left

    def mul_expr(self):
        left = self.unary_expr()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            right = self.unary_expr()
            left = Call(op, (left, right))
        return left

    def unary_expr(self):
        if self.at("-"):
            t = self.next()
            inner = self.unary_expr()
            if isinstance(inner, ConstI):
                return ConstI(-inner.value, pos=(t.line, t.col))
            if isinstance(inner, ConstR):
                return ConstR(-inner.value, pos=(t.line, t.col))
            return Call("-", (inner,), pos=(t.line, t.col))
        return self.postfix_expr()

    def postfix_expr(self):
        e = self.atom()
        while self.at("["):
            self.next()
            idx = self.expr()
            self.expect("]")
            e = Index(e, idx)
        return e

    def atom(self):
        t = self.peek()
        pos = (t.line, t.col)
        if t.kind == "num":
            self.next()
            if "." in t.text or "e" in t.text or "E" in t.text:
                return ConstR(float(t.text), pos=pos)
            return ConstI(int(t.text), pos=pos)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("["):
            # array literal or comprehension
            first = self.expr()
            if self.accept("|"):
                binder = self.ident("comprehension binder")
                self.expect("in")
                lo = self.expr()
                self.expect(":")
                hi = self.expr()
                self.expect("]")
                return Comp(first, binder, lo, hi, pos=pos)
            elems = [first]
            while self.accept(","):
                elems.append(self.expr())
            self.expect("]")
            return Arr(tuple(elems), pos=pos)
        if self.accept("target"):
            self.expect("(")
            stmts = self.items_until(")")
            self.expect(")")
            return TargetE(seq_of(stmts), pos=pos)
        if self.accept("phi"):
            self.expect("(")
            binders = []
            if not self.at(")"):
                binders.append(self.bounded_binder())
                while self.accept(","):
                    binders.append(self.bounded_binder())
            self.expect(")")
            body = self.block()
            return PhiE(tuple(binders), body, pos=pos)
        if t.kind == "ident" and t.text not in KEYWORDS:
            name = self.next().text
            if self.at("("):
                self.next()
                args = self.args()
                self.expect(")")
                return Call(name, args, pos=pos)
            return Var(name, pos=pos)
        self.fail(t, f"expected expression, found {t.text!r}")


def _resolve_gen_bounds(body, gamma: Gamma, parser: "_Parser"):
    """Fill in omitted `<K>` bounds on elim/gen/phi binders from the
    binder's declared type."""
    if not parser._unresolved_bounds:
        return body
    tok_of = dict((n, t) for n, t in parser._unresolved_bounds)

    def bound_for(name: str) -> int:
        d = gamma.get(name)
        t = d.type if d is not None else None
        if not isinstance(t, IntT) or t.bound is None:
            tok = tok_of.get(name, parser.toks[-1])
            parser.fail(tok, f"no support bound given or declared for {name}")
        return t.bound

    def fix_stmt(s):
        if isinstance(s, Seq):
            return Seq(fix_stmt(s.first), fix_stmt(s.second))
        if isinstance(s, For):
            return For(s.binder, s.lo, s.hi, fix_stmt(s.body), pos=s.pos)
        if isinstance(s, If):
            return If(s.cond, fix_stmt(s.then), fix_stmt(s.els), pos=s.pos)
        if isinstance(s, ElimS):
            b = s.bound or bound_for(s.var)
            return ElimS(s.var, b, fix_stmt(s.body), pos=s.pos)
        if isinstance(s, GenS):
            b = s.bound or bound_for(s.var)
            return GenS(s.var, b, fix_stmt(s.body), pos=s.pos)
        if isinstance(s, Assign):
            return Assign(s.lvalue, fix_expr(s.expr), pos=s.pos)
        if isinstance(s, FactorS):
            return FactorS(fix_expr(s.expr), pos=s.pos)
        if isinstance(s, Sample):
            return Sample(s.lvalue, s.dist, tuple(fix_expr(a) for a in s.args),
                          pos=s.pos)
        return s

    def fix_expr(e):
        if isinstance(e, PhiE):
            binders = tuple((n, k or bound_for(n)) for n, k in e.binders)
            return PhiE(binders, fix_stmt(e.body), pos=e.pos)
        if isinstance(e, TargetE):
            return TargetE(fix_stmt(e.stmt), pos=e.pos)
        if isinstance(e, Comp):
            return Comp(fix_expr(e.body), e.binder, fix_expr(e.lo),
                        fix_expr(e.hi), pos=e.pos)
        if isinstance(e, Arr):
            return Arr(tuple(fix_expr(x) for x in e.elems), pos=e.pos)
        if isinstance(e, Call):
            return Call(e.fn, tuple(fix_expr(a) for a in e.args), pos=e.pos)
        if isinstance(e, Index):
            return Index(fix_expr(e.arr), fix_expr(e.idx), pos=e.pos)
        return e

    return fix_stmt(body)


def parse(src: str) -> Program:
    """Parse source text to a Program; raises ParseError with diagnostics."""
    return _Parser(tokenize(src)).program()


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# ---------------------------------------------------------------------------
# Pretty printer


_PREC = {"==": 1, ">": 1, "<": 1, "+": 2, "-": 2, "*": 3, "/": 3}


def type_str(t: BaseType) -> str:
    sizes = []
    while isinstance(t, ArrayT):
        sizes.append("" if t.size is None else str(t.size))
        t = t.elem
    base = repr(t)
    return base + "".join(f"[{s}]" for s in sizes)


def expr_str(e, prec: int = 0) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, ConstI):
        return str(e.value)
    if isinstance(e, ConstR):
        return repr(e.value)
    if isinstance(e, Arr):
        return "[" + ", ".join(expr_str(x) for x in e.elems) + "]"
    if isinstance(e, Index):
        return f"{expr_str(e.arr, 5)}[{expr_str(e.idx)}]"
    if isinstance(e, Comp):
        return f"[{expr_str(e.body)} | {e.binder} in {expr_str(e.lo)} : {expr_str(e.hi)}]"
    if isinstance(e, TargetE):
        inner = " ".join(_stmt_lines(e.stmt, 0, compact=True))
        return f"target({inner})"
    if isinstance(e, PhiE):
        binders = ", ".join(f"int<{k}> {n}" for n, k in e.binders)
        body = "\n".join(_stmt_lines(e.body, 1))
        return f"phi({binders}){{\n{body}\n}}"
    if isinstance(e, Call):
        if e.fn in _PREC and len(e.args) == 2:
            p = _PREC[e.fn]
            s = f"{expr_str(e.args[0], p)} {e.fn} {expr_str(e.args[1], p + 1)}"
            return f"({s})" if p < prec else s
        if e.fn == "-" and len(e.args) == 1:
            return f"-{expr_str(e.args[0], 4)}"
        return f"{e.fn}(" + ", ".join(expr_str(a) for a in e.args) + ")"
    raise TypeError(f"expr_str: unknown expression {e!r}")


def lvalue_str(lv) -> str:
    return lv.base + "".join(f"[{expr_str(i)}]" for i in lv.indices)


def _indent(depth: int) -> str:
    return "    " * depth


def _stmt_lines(s: Stmt, depth: int, compact: bool = False,
                decl_prefix: dict[int, str] | None = None) -> list[str]:
    ind = "" if compact else _indent(depth)
    if isinstance(s, Seq):
        out = []
        for sub in stmts_of(s):
            out.extend(_stmt_lines(sub, depth, compact, decl_prefix))
        return out or [ind + "skip;"]
    prefix = (decl_prefix or {}).get(id(s), "")
    if isinstance(s, Skip):
        return [ind + "skip;"]
    if isinstance(s, Assign):
        return [f"{ind}{prefix}{lvalue_str(s.lvalue)} = {expr_str(s.expr)};"]
    if isinstance(s, Sample):
        args = ", ".join(expr_str(a) for a in s.args)
        return [f"{ind}{prefix}{lvalue_str(s.lvalue)} ~ {s.dist}({args});"]
    if isinstance(s, FactorS):
        body = expr_str(s.expr)
        if "\n" in body:
            lines = body.split("\n")
            lines = [lines[0]] + [_indent(depth) + l for l in lines[1:]]
            body = "\n".join(lines)
        return [f"{ind}factor({body});"]
    if isinstance(s, For):
        head = f"{ind}for ({s.binder} in {expr_str(s.lo)} : {expr_str(s.hi)}) {{"
        return [head] + _stmt_lines(s.body, depth + 1) + [ind + "}"]
    if isinstance(s, If):
        out = [f"{ind}if ({expr_str(s.cond)}) {{"]
        out += _stmt_lines(s.then, depth + 1)
        if not isinstance(s.els, Skip):
            out += [ind + "} else {"]
            out += _stmt_lines(s.els, depth + 1)
        out += [ind + "}"]
        return out
    if isinstance(s, ElimS):
        head = f"{ind}elim(int<{s.bound}> {s.var}) {{"
        return [head] + _stmt_lines(s.body, depth + 1) + [ind + "}"]
    if isinstance(s, GenS):
        head = f"{ind}gen(int<{s.bound}> {s.var}) {{"
        return [head] + _stmt_lines(s.body, depth + 1) + [ind + "}"]
    raise TypeError(f"pretty: unknown statement {s!r}")


def pretty(p: Program) -> str:
    """Render a Program as source text; parse(pretty(p)) is structurally
    equivalent to p (same declarations, same normalised body)."""
    top = stmts_of(p.body)
    first_mention: dict[str, int] = {}
    for i, s in enumerate(top):
        for name in free_vars(s) | _def_targets(s):
            first_mention.setdefault(name, i)

    decl_prefix: dict[int, str] = {}
    standalone: dict[int, list[str]] = {}
    header: list[str] = []
    for name, d in p.gamma.items():
        level = "" if d.level is None else f"{d.level.name} "
        text = f"{level}{type_str(d.type)} "
        i = first_mention.get(name)
        if i is None:
            header.append(f"{text}{name};")
            continue
        s = top[i]
        mergeable = (isinstance(s, (Assign, Sample))
                     and s.lvalue.base == name and not s.lvalue.indices
                     and id(s) not in decl_prefix)
        if mergeable:
            decl_prefix[id(s)] = text
        else:
            standalone.setdefault(i, []).append(f"{text}{name};")

    lines = list(header)
    for i, s in enumerate(top):
        lines.extend(standalone.get(i, []))
        lines.extend(_stmt_lines(s, 0, decl_prefix=decl_prefix))
    if not lines:
        lines = ["skip;"]
    return "\n".join(lines) + "\n"


def _def_targets(s: Stmt) -> set[str]:
    if isinstance(s, (Assign, Sample)):
        return {s.lvalue.base}
    return set()
