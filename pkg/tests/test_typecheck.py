"""The phase type system: checking, sequencing side conditions, inference."""

import itertools

import pytest

from corpus_util import ALL_PROGRAMS, load, load_raw
from slic.parser import parse
from slic.syntax import (
    BASE, ConstR, DATA, Decl, GENQUANT, Gamma, MODEL, REAL, Seq, TargetE,
    Var, stmts_of,
)
from slic.typecheck import (
    check_expr, check_program, check_stmt, generative, infer_levels,
    shreddable, TypingFailure,
)


def gamma_of(**levels):
    return Gamma([(n, Decl(REAL, l)) for n, l in levels.items()])


def body_of(src: str):
    return parse(src).body


# -- expressions


def test_const_is_data_level():
    t, l = check_expr(Gamma(), ConstR(3.0))
    assert t == REAL and l == DATA


def test_primcall_takes_lub():
    g = gamma_of(mu=MODEL, x=DATA)
    t, l = check_expr(g, parse("real mu; real x; real r = mu + x;")
                      .body.expr)
    assert t == REAL and l == MODEL


def test_target_level_tracks_reads():
    g = gamma_of(x=MODEL)
    e = TargetE(body_of("real x; x ~ normal(0, 1);"))
    t, l = check_expr(g, e)
    assert l == MODEL
    # and the same expression cannot be used at data level
    report = check_stmt(g.with_entry("d", Decl(REAL, DATA)),
                        parse("real d; real x; d = target(x ~ normal(0, 1););").body,
                        DATA)
    assert not report.ok
    assert any(v.rule == "assign" for v in report.violations)


def test_expr_level_failure():
    with pytest.raises(TypingFailure):
        check_expr(Gamma(), Var("missing"))


# -- statements


def test_skip_checks_at_every_level():
    for l in BASE.levels:
        assert check_stmt(Gamma(), body_of("skip;"), l).ok


def test_sigma_mutation_counterexample():
    src = "data real sigma; real mu; sigma = 1; mu ~ normal(0, sigma); sigma = 2;"
    p = parse(src)
    g = p.gamma.with_levels({"mu": MODEL})
    report = check_stmt(g, p.body, DATA)
    assert not report.ok
    assert any(v.rule == "seq-shreddable" for v in report.violations)


def test_double_sample_genquant_counterexample():
    src = "genquant real y; y ~ normal(0, 1); y ~ normal(0, 1); y = 5.0;"
    p = parse(src)
    report = check_stmt(p.gamma, p.body, DATA)
    assert not report.ok
    assert any(v.rule == "seq-generative" for v in report.violations)


def test_factor_requires_model_readable():
    p = parse("genquant real q; factor(q);")
    assert not check_stmt(p.gamma, p.body, DATA).ok
    p2 = parse("data real d; factor(d);")
    assert check_stmt(p2.gamma, p2.body, DATA).ok  # data reads lift to model


def test_shreddable_examples():
    p = parse("data real sigma; model real mu; mu ~ normal(0, sigma); sigma = 2;")
    s1, s2 = stmts_of(p.body)
    assert not shreddable(p.gamma, s1, s2)
    assert shreddable(p.gamma, s2, body_of("skip;"))
    q = parse("data real y; data real x; y = x; x = 1;")
    t1, t2 = stmts_of(q.body)
    assert shreddable(q.gamma, t1, t2)  # both data: no lower write level


def test_generative_examples():
    p = parse("genquant real y; y ~ normal(0, 1); y = 5.0;")
    s1, s2 = stmts_of(p.body)
    assert not generative(p.gamma, s1, s2)
    m = parse("model real y; y ~ normal(0, 1); y ~ normal(0, 1);")
    m1, m2 = stmts_of(m.body)
    assert generative(m.gamma, m1, m2)  # only-model exemption
    assert generative(Gamma(), body_of("skip;"), body_of("skip;"))


def test_repeated_data_observation_allowed():
    # two observations of the same data variable are two density factors
    p = parse("data real y; model real m; y ~ normal(m, 1); y ~ normal(0, 2);")
    out = infer_levels(p)
    assert out.report.ok


# -- inference


def test_infer_predictive():
    out = infer_levels(load_raw("predictive"))
    assert out.report.ok
    assert out.report.gamma.level_of("mu") == MODEL
    assert out.report.gamma.level_of("x_pred") == GENQUANT


def test_infer_pure_data_pipeline():
    p = parse("data real a; real b = a + 1; real c = b * 2;")
    out = infer_levels(p)
    assert out.report.ok
    assert out.report.gamma.level_of("b") == DATA
    assert out.report.gamma.level_of("c") == DATA


def test_infer_extended_chain_levels():
    out = infer_levels(load_raw("hmm3_extended"))
    assert out.report.ok
    g = out.report.gamma
    for n in ("z1", "z2", "z3", "theta0", "theta1", "theta2",
              "phi1", "phi2", "phi3", "phi_", "theta"):
        assert g.level_of(n) == MODEL, n
    for n in ("theta3", "genz"):
        assert g.level_of(n) == GENQUANT, n
    for n in ("y1", "y2", "y3"):
        assert g.level_of(n) == DATA, n


def test_infer_unsatisfiable_reports():
    # a genquant-pinned variable read by a model-level observation
    p = parse("genquant real g ~ normal(0, 1); data real y ~ normal(g, 1);")
    out = infer_levels(p)
    assert not out.report.ok
    assert out.report.violations


@pytest.mark.parametrize("name", ALL_PROGRAMS)
def test_inference_result_checks(name):
    """Soundness: the resolved environment really types the program."""
    p = load(name)
    assert check_program(p).ok


@pytest.mark.parametrize("name", ALL_PROGRAMS)
def test_subsumption_on_corpus(name):
    """If a statement checks at l', it checks at every l <= l'."""
    p = load(name)
    for s in stmts_of(p.body):
        oks = {l: check_stmt(p.gamma, s, l).ok for l in BASE.levels}
        for l, lp in itertools.product(BASE.levels, repeat=2):
            if BASE.leq(l, lp) and oks[lp]:
                assert oks[l], (s, l, lp)


@pytest.mark.parametrize("name", ALL_PROGRAMS)
def test_monotone_reads_on_corpus(name):
    """Every free variable of a checked expression sits at or below the
    expression's principal level."""
    p = load(name)
    for s in stmts_of(p.body):
        for e in _exprs_of(s):
            try:
                _, l = check_expr(p.gamma, e)
            except TypingFailure:
                continue
            from slic.syntax import free_vars
            for x in free_vars(e):
                assert BASE.leq(p.gamma.level_of(x), l)


def _exprs_of(s):
    from slic.syntax import Assign, FactorS, For, If, Sample
    if isinstance(s, Assign):
        return [s.expr, *s.lvalue.indices]
    if isinstance(s, Sample):
        return list(s.args)
    if isinstance(s, FactorS):
        return [s.expr]
    if isinstance(s, If):
        return [s.cond, *_exprs_of(s.then), *_exprs_of(s.els)]
    if isinstance(s, For):
        return [s.lo, s.hi]
    if isinstance(s, Seq):
        return [*_exprs_of(s.first), *_exprs_of(s.second)]
    return []


def test_for_binder_cannot_shadow():
    p = parse("real i; for (i in 1 : 2) { skip; }")
    assert not check_stmt(p.gamma, p.body, DATA).ok


def test_for_binder_cannot_be_assigned():
    p = parse("real a; for (i in 1 : 2) { i = 3; }")
    report = check_stmt(p.gamma, p.body, DATA)
    assert not report.ok


def test_base_type_mismatch():
    p = parse("int n; n = 1.5;")
    assert not check_stmt(p.gamma, p.body, DATA).ok
    p2 = parse("data real r; r = 1;")  # int widens to real
    assert check_stmt(p2.gamma, p2.body, DATA).ok


def test_target_over_loops_and_guards_tracks_their_levels():
    """Loop binders and if/for guards inside a target body are read at
    their own level, not at the level being queried."""
    src = """
    data real[2] off;
    model real m;
    model real t = target(for (i in 1 : 2) { y ~ normal(m + off[i], 1); });
    data real y;
    """
    out = infer_levels(parse(src))
    assert out.report.ok
    assert out.report.gamma.level_of("t") == MODEL

    src2 = """
    data real d;
    model real m;
    model real t = target(if (d > 0) { y ~ normal(m, 1); });
    data real y;
    """
    out2 = infer_levels(parse(src2))
    assert out2.report.ok and out2.report.gamma.level_of("t") == MODEL
