"""The semi-lattice system: checking, inference optimality, queries."""

import itertools

import pytest

from corpus_util import load
from slic.ci import (
    CIPartition, check_ci, ci_query, infer_ci, markov_blanket, parameters,
)
from slic.parser import parse
from slic.syntax import CI, Decl, Gamma, IntT, L1, L2, L3, REAL, free_vars
from slic.typecheck import CI_COSTS, check_stmt


def ci_gamma(p, **levels):
    return p.gamma.with_levels({n: l for n, l in levels.items()})


def test_skip_checks_everywhere():
    p = parse("skip;")
    assert check_ci(p.gamma, p.body).ok


def test_cross_failing_labelling():
    p = load("cross")
    g = Gamma([(n, Decl(REAL, l)) for n, l in
               [("x1", L2), ("x2", L3), ("x3", L1), ("x4", L1), ("x5", L1)]])
    report = check_ci(g, p.body)
    assert not report.ok
    assert any(v.rule == "sample" for v in report.violations)


def test_cross_valid_labelling():
    p = load("cross")
    g = Gamma([(n, Decl(REAL, l)) for n, l in
               [("x1", L2), ("x2", L2), ("x3", L1), ("x4", L3), ("x5", L3)]])
    assert check_ci(g, p.body).ok


def test_hmm2_labelling():
    p = load("hmm2_discrete")
    g = Gamma([
        ("theta0", Decl(REAL, L1)),
        ("z1", Decl(IntT(2), L2)),
        ("theta1", Decl(REAL, L2)),
        ("z2", Decl(IntT(2), L1)),
        ("phi1", Decl(REAL, L2)),
        ("phi2", Decl(REAL, L3)),
        ("y1", Decl(IntT(2), L2)),
        ("y2", Decl(IntT(2), L3)),
    ])
    assert check_ci(g, p.body).ok


def test_infer_ci_extended_chain_model_slice():
    """Pinning z1 to l2 puts its deterministic cone at l2, its neighbour at
    l1, and the rest of the chain at l3."""
    from slic.elim import gamma_to_z
    from slic.shred import shred
    from slic.syntax import BASE, MODEL as M

    p = load("hmm3_extended")
    s_m = shred(p.gamma, p.body, BASE)[M]
    gm = gamma_to_z(p, "z1", scratch=free_vars(s_m))
    out = infer_ci(gm, s_m)
    assert out.report.ok
    g = out.report.gamma
    assert g.level_of("theta1") == L2 and g.level_of("phi1") == L2
    assert g.level_of("z2") == L1
    for n in ("theta2", "phi2", "phi3", "z3"):
        assert g.level_of(n) == L3, n


def test_infer_ci_trivial_single_statement():
    p = parse("real pr; int<2> z ~ bern(pr);")
    g = Gamma([("pr", Decl(REAL, L1)), ("z", Decl(IntT(2), L2))])
    out = infer_ci(g, p.body)
    assert out.report.ok
    assert out.cost == 0  # nothing left to infer


def exhaustive_min_cost(gamma, body):
    names = gamma.placeholders()
    best = None
    for combo in itertools.product((L1, L2, L3), repeat=len(names)):
        g = gamma.with_levels(dict(zip(names, combo)))
        if check_stmt(g, body, L1, CI).ok:
            cost = sum(CI_COSTS[l] for l in combo)
            if best is None or cost < best:
                best = cost
    return best


@pytest.mark.parametrize("name,z,pin_data", [
    ("hmm3", "z1", False), ("hmm3", "z2", False),
    ("hmm2_discrete", "z1", False), ("sprinkler", "cloudy", False),
    ("cross", "x3", False), ("outliers", "o2", True),
])
def test_infer_ci_optimal_vs_exhaustive(name, z, pin_data):
    from slic.syntax import DATA

    p = load(name)

    def pinned(n, d):
        if n == z:
            return L2
        if pin_data and d.level == DATA:
            return L1
        return None

    g = Gamma([(n, Decl(d.type, pinned(n, d))) for n, d in p.gamma.items()])
    assert len(g.placeholders()) <= 12
    out = infer_ci(g, p.body)
    want = exhaustive_min_cost(g, p.body)
    assert (out.report.ok, out.cost) == (want is not None, want)


def test_ci_query_cross_cases():
    p = load("cross")
    ok = ci_query(p, CIPartition(frozenset({"x2", "x3"}), frozenset({"x1"}),
                                 frozenset({"x4", "x5"})))
    assert ok.derivable
    assert check_ci(ok.witness, p.body).ok  # witness really checks
    bad = ci_query(p, CIPartition(frozenset({"x3", "x4", "x5"}),
                                  frozenset({"x1"}), frozenset({"x2"})))
    assert not bad.derivable


def test_ci_query_empty_x3_always_derivable():
    for name in ("cross", "hmm3", "hmm3_extended", "outliers"):
        p = load(name)
        params = frozenset(parameters(p))
        r = ci_query(p, CIPartition(params, frozenset(), frozenset()))
        assert r.derivable, name


def test_ci_query_validates_partition():
    p = load("cross")
    with pytest.raises(ValueError):
        ci_query(p, CIPartition(frozenset({"x1"}), frozenset({"x2"}),
                                frozenset({"nope"})))


def test_blanket_hmm3():
    b = markov_blanket(load("hmm3"), "z1")
    assert b.partition.x2 == {"z1"}
    assert b.partition.x1 == {"y1", "z2"}
    assert b.partition.x3 == {"y2", "y3", "z3"}


def test_blanket_middle_of_chain():
    b = markov_blanket(load("hmm3"), "z2")
    assert b.partition.x1 == {"z1", "z3", "y2"}
    assert b.partition.x3 == {"y1", "y3"}


def test_blanket_sprinkler():
    p = load("sprinkler")
    b = markov_blanket(p, "cloudy")
    discrete = {n for n in parameters(p)
                if isinstance(p.gamma.type_of(n), IntT)}
    assert b.partition.x1 & discrete == {"sprinkler", "rain"}
    assert b.partition.x3 & discrete == {"wet"}


def test_blanket_single_parameter():
    p = parse("real pr; model int<2> z ~ bern(pr); data real pr2 = 0.5;")
    from slic.ci import resolve_base
    b = markov_blanket(resolve_base(p), "z")
    assert b.partition.x2 == {"z"}
    assert "z" not in b.partition.x1


def test_blanket_rejects_non_parameter():
    with pytest.raises(ValueError):
        markov_blanket(load("hmm3"), "theta")  # deterministic
