"""HTTP facade over the pipeline: one endpoint per stage.

Request/response models double as the CLI's wire format; the handlers are
plain functions so the CLI can call them in-process. Operations always
answer 200 with an `ok` flag and diagnostics; transport-level errors are
reserved for malformed requests.
"""

from __future__ import annotations

from typing import Any, Optional

import numpy as np
from fastapi import FastAPI
from pydantic import BaseModel, Field

from . import __version__
from .ci import BlanketResult, CIPartition, ci_query, markov_blanket, resolve_base
from .elim import TransformError, transform_all
from .interp import EvalError, run
from .oracle import FixtureVar, OracleError, check_preservation
from .parser import ParseError, parse, pretty, type_str
from .shred import ShredError, shred
from .stan import EmitError, emit_stan
from .syntax import BASE, Program
from .typecheck import infer_levels
from .ci import parameters


class GammaEntry(BaseModel):
    type: str
    level: Optional[str] = None


class CheckRequest(BaseModel):
    source: str


class CheckResponse(BaseModel):
    ok: bool
    gamma: dict[str, GammaEntry] = Field(default_factory=dict)
    diagnostics: list[str] = Field(default_factory=list)


class ShredRequest(BaseModel):
    source: str


class ShredResponse(BaseModel):
    ok: bool
    slices: dict[str, str] = Field(default_factory=dict)
    diagnostics: list[str] = Field(default_factory=list)


class CiRequest(BaseModel):
    source: str
    x2: list[str]
    x3: list[str]
    x1: list[str] = Field(default_factory=list)


class CiResponse(BaseModel):
    ok: bool
    derivable: bool = False
    witness: dict[str, str] = Field(default_factory=dict)
    diagnostics: list[str] = Field(default_factory=list)


class BlanketRequest(BaseModel):
    source: str
    var: str


class BlanketResponse(BaseModel):
    ok: bool
    x1: list[str] = Field(default_factory=list)
    x2: list[str] = Field(default_factory=list)
    x3: list[str] = Field(default_factory=list)
    levels: dict[str, str] = Field(default_factory=dict)
    diagnostics: list[str] = Field(default_factory=list)


class TransformRequest(BaseModel):
    source: str
    order: Optional[list[str]] = None


class TransformResponse(BaseModel):
    ok: bool
    source: str = ""
    diagnostics: list[str] = Field(default_factory=list)


class EvalRequest(BaseModel):
    source: str
    store: dict[str, Any] = Field(default_factory=dict)
    counted: bool = False


class EvalResponse(BaseModel):
    ok: bool
    weight: Optional[float] = None
    state: dict[str, Any] = Field(default_factory=dict)
    pdf_evals: Optional[int] = None
    factor_evals: Optional[int] = None
    diagnostics: list[str] = Field(default_factory=list)


class PreserveRequest(BaseModel):
    source: str
    against: str
    data: dict[str, Any] = Field(default_factory=dict)
    trials: int = 20
    tol: float = 1e-8
    seed: int = 0


class PreserveResponse(BaseModel):
    ok: bool
    passed: bool = False
    max_rel_err: Optional[float] = None
    num_points: int = 0
    worst_point: Optional[dict[str, Any]] = None
    diagnostics: list[str] = Field(default_factory=list)


class StanRequest(BaseModel):
    source: str


class StanResponse(BaseModel):
    ok: bool
    stan: str = ""
    diagnostics: list[str] = Field(default_factory=list)


def _load(source: str) -> Program:
    return resolve_base(parse(source))


def _diag(exc: Exception) -> list[str]:
    if isinstance(exc, ParseError):
        return [str(d) for d in exc.diagnostics]
    return [str(exc)]


_ERRORS = (ParseError, ValueError, TransformError, EvalError, ShredError,
           OracleError, EmitError)


def do_check(req: CheckRequest) -> CheckResponse:
    try:
        p = parse(req.source)
    except ParseError as exc:
        return CheckResponse(ok=False, diagnostics=_diag(exc))
    out = infer_levels(p)
    if not out.report.ok:
        return CheckResponse(ok=False,
                             diagnostics=[str(v) for v in out.report.violations])
    gamma = {n: GammaEntry(type=type_str(d.type), level=d.level.name)
             for n, d in out.report.gamma.items()}
    return CheckResponse(ok=True, gamma=gamma)


def do_shred(req: ShredRequest) -> ShredResponse:
    try:
        p = _load(req.source)
        slices = shred(p.gamma, p.body, BASE)
    except _ERRORS as exc:
        return ShredResponse(ok=False, diagnostics=_diag(exc))
    rendered = {l.name: pretty(Program(p.gamma, slices[l])) for l in BASE.levels}
    return ShredResponse(ok=True, slices=rendered)


def do_ci(req: CiRequest) -> CiResponse:
    try:
        p = _load(req.source)
        named = set(req.x1) | set(req.x2) | set(req.x3)
        x1 = set(req.x1) | {n for n in parameters(p) if n not in named}
        result = ci_query(p, CIPartition(frozenset(x1), frozenset(req.x2),
                                         frozenset(req.x3)))
    except _ERRORS as exc:
        return CiResponse(ok=False, diagnostics=_diag(exc))
    witness = {}
    if result.witness is not None:
        witness = {n: d.level.name for n, d in result.witness.items()
                   if d.level is not None}
    return CiResponse(ok=True, derivable=result.derivable, witness=witness,
                      diagnostics=[str(v) for v in (result.violations or [])])


def do_blanket(req: BlanketRequest) -> BlanketResponse:
    try:
        p = _load(req.source)
        result: BlanketResult = markov_blanket(p, req.var)
    except _ERRORS as exc:
        return BlanketResponse(ok=False, diagnostics=_diag(exc))
    return BlanketResponse(
        ok=True,
        x1=sorted(result.partition.x1),
        x2=sorted(result.partition.x2),
        x3=sorted(result.partition.x3),
        levels={n: d.level.name for n, d in result.gamma.items()
                if d.level is not None},
    )


def do_transform(req: TransformRequest) -> TransformResponse:
    try:
        p = _load(req.source)
        out = transform_all(p, req.order)
    except _ERRORS as exc:
        return TransformResponse(ok=False, diagnostics=_diag(exc))
    return TransformResponse(ok=True, source=pretty(out))


def do_eval(req: EvalRequest) -> EvalResponse:
    try:
        p = parse(req.source)  # evaluation never consults levels
        result = run(p, dict(req.store))
    except _ERRORS as exc:
        return EvalResponse(ok=False, diagnostics=_diag(exc))
    resp = EvalResponse(ok=True, weight=result.weight, state=result.state)
    if req.counted:
        resp.pdf_evals = result.counters.pdf_evals
        resp.factor_evals = result.counters.factor_evals
    return resp


def _int_like(v: Any) -> bool:
    if isinstance(v, list):
        return all(_int_like(x) for x in v)
    return isinstance(v, int)


def _auto_fixture(p: Program, data: dict[str, Any], seed: int) -> dict[str, FixtureVar]:
    """Fixture for context variables: values from `data` when given, the
    rest drawn as mid-range reals (safe for probability-valued
    parameters). Integer values are held fixed; reals get jittered."""
    from .syntax import ArrayT, IntT, RealT

    rng = np.random.default_rng(seed)

    def fresh(name: str, t) -> Any:
        if isinstance(t, RealT):
            return round(float(rng.uniform(0.15, 0.85)), 6)
        if isinstance(t, IntT):
            return int(rng.integers(1, (t.bound or 2) + 1))
        if isinstance(t, ArrayT) and t.size is not None:
            return [fresh(name, t.elem) for _ in range(t.size)]
        raise OracleError(f"cannot draw a value for {name}: array size unknown")

    from .syntax import is_bounded_int

    fixture: dict[str, FixtureVar] = {}
    for name in p.param_names():
        if name not in data and is_bounded_int(p.gamma.type_of(name)):
            continue  # enumerated by the oracle
        v = data[name] if name in data else fresh(name, p.gamma.type_of(name))
        fixture[name] = FixtureVar(v, lo=0.05, hi=0.95, fixed=_int_like(v))
    return fixture


def do_preserve(req: PreserveRequest) -> PreserveResponse:
    try:
        p1 = _load(req.source)
        p2 = _load(req.against)
        fixture = _auto_fixture(p1, req.data, req.seed)
        report = check_preservation(p1, p2, fixture, trials=req.trials,
                                    tol=req.tol, seed=req.seed)
    except _ERRORS as exc:
        return PreserveResponse(ok=False, diagnostics=_diag(exc))
    return PreserveResponse(ok=True, passed=report.ok,
                            max_rel_err=report.max_rel_err,
                            num_points=report.num_points,
                            worst_point=report.worst_point)


def do_emit_stan(req: StanRequest) -> StanResponse:
    try:
        p = _load(req.source)
        text = emit_stan(p)
    except _ERRORS as exc:
        return StanResponse(ok=False, diagnostics=_diag(exc))
    return StanResponse(ok=True, stan=text)


app = FastAPI(title="slic", version=__version__)


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


@app.post("/check", response_model=CheckResponse)
def check_endpoint(req: CheckRequest) -> CheckResponse:
    return do_check(req)


@app.post("/shred", response_model=ShredResponse)
def shred_endpoint(req: ShredRequest) -> ShredResponse:
    return do_shred(req)


@app.post("/ci", response_model=CiResponse)
def ci_endpoint(req: CiRequest) -> CiResponse:
    return do_ci(req)


@app.post("/blanket", response_model=BlanketResponse)
def blanket_endpoint(req: BlanketRequest) -> BlanketResponse:
    return do_blanket(req)


@app.post("/transform", response_model=TransformResponse)
def transform_endpoint(req: TransformRequest) -> TransformResponse:
    return do_transform(req)


@app.post("/eval", response_model=EvalResponse)
def eval_endpoint(req: EvalRequest) -> EvalResponse:
    return do_eval(req)


@app.post("/preserve", response_model=PreserveResponse)
def preserve_endpoint(req: PreserveRequest) -> PreserveResponse:
    return do_preserve(req)


@app.post("/emit-stan", response_model=StanResponse)
def emit_stan_endpoint(req: StanRequest) -> StanResponse:
    return do_emit_stan(req)
