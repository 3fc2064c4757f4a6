"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
"""

import itertools
import time

import numpy as np

from corpus_util import (
    ALL_PROGRAMS, DISCRETE_ONLY, ELIMINATION_ORDERS, FIXTURES, GOLDEN,
    first_order_hmm, hmm_fixture, load, naive_hmm,
)
from slic.ci import CIPartition, ci_query, markov_blanket, parameters, resolve_base
from slic.elim import transform_all
from slic.interp import eval_stmt, initial_sigma
from slic.oracle import (
    check_ci_table, check_preservation, draw_context, enumerate_joint,
    measure_cost,
)
from slic.parser import parse, parse_file
from slic.shred import is_single_level, recompose, shred
from slic.stan import emit_stan
from slic.syntax import (
    ArrayT, BASE, CI, GENQUANT, IntT, Program, RealT, is_bounded_int,
    programs_equivalent, samples,
)
from slic.typecheck import CI_COSTS, check_stmt
from slic.ci import infer_ci


def verdict(num: int, ok: bool, text: str) -> None:
    print(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'}: {text}")
    assert ok, f"criterion {num}: {text}"


# ---------------------------------------------------------------------------
# helpers


def _random_value(t, rng):
    if isinstance(t, RealT):
        return float(rng.uniform(0.05, 0.95))
    if isinstance(t, IntT):
        return int(rng.integers(1, t.bound + 1)) if t.bound else None
    if isinstance(t, ArrayT) and t.size is not None:
        vals = [_random_value(t.elem, rng) for _ in range(t.size)]
        return None if any(v is None for v in vals) else vals
    return None


def random_conforming_state(p: Program, rng, fixture) -> dict:
    store = {}
    for name, d in p.gamma.items():
        fx = fixture.get(name)
        if fx is not None and fx.fixed:
            store[name] = fx.value
            continue
        v = _random_value(d.type, rng)
        if v is None:
            if fx is None:
                raise AssertionError(f"no way to draw {name}")
            v = fx.value
        store[name] = v
    return store


def full_random_store(p: Program, rng, fixture) -> dict:
    store = initial_sigma(p)
    store.update(random_conforming_state(p, rng, fixture))
    return store


# ---------------------------------------------------------------------------
# 1. golden transformations


def test_criterion_1_golden_transforms():
    t0 = time.time()
    g = load("hmm3_extended")
    from slic.elim import eliminate
    g1 = eliminate(g, "z1").program
    t_g1 = time.time() - t0
    ok = programs_equivalent(g1, parse_file(GOLDEN / "hmm3_extended_step1.slic"))
    t0 = time.time()
    g2 = eliminate(g1, "z2").program
    t_g2 = time.time() - t0
    ok &= programs_equivalent(g2, parse_file(GOLDEN / "hmm3_extended_step2.slic"))
    t0 = time.time()
    g3 = eliminate(g2, "z3").program
    t_g3 = time.time() - t0
    ok &= programs_equivalent(g3, parse_file(GOLDEN / "hmm3_extended_step3.slic"))
    t0 = time.time()
    spr = transform_all(load("sprinkler"), ["cloudy", "sprinkler", "rain", "wet"])
    t_spr = time.time() - t0
    ok &= programs_equivalent(spr, parse_file(GOLDEN / "sprinkler_transformed.slic"))
    ok &= max(t_g1, t_g2, t_g3, t_spr) < 1.0
    verdict(1, ok, "golden eliminations of the extended chain and the "
            f"sprinkler chain (slowest step {max(t_g1, t_g2, t_g3, t_spr):.2f}s)")


# ---------------------------------------------------------------------------
# 2. semantic preservation of the full transform


def test_criterion_2_preservation():
    t0 = time.time()
    worst = 0.0
    for name in ("hmm3", "hmm3_extended", "sprinkler", "kmeans",
                 "outliers", "causal"):
        p = load(name)
        q = transform_all(p, ELIMINATION_ORDERS[name])
        rep = check_preservation(p, q, FIXTURES[name], trials=20,
                                 tol=1e-8, seed=10)
        assert rep.ok, (name, rep.to_dict())
        worst = max(worst, rep.max_rel_err)
    dt = time.time() - t0
    verdict(2, dt < 30.0,
            f"transform preserves all six joints (worst rel err {worst:.2e}, "
            f"{dt:.1f}s)")


# ---------------------------------------------------------------------------
# 3. shredding preservation and single-level slices


def test_criterion_3_shred_preservation():
    bad = []
    for name in ALL_PROGRAMS:
        p = load(name)
        slices = shred(p.gamma, p.body, BASE)
        for l in BASE.levels:
            if not is_single_level(p.gamma, l, slices[l]):
                bad.append((name, "single-level", l.name))
        recomposed = recompose(slices, BASE)
        rng = np.random.default_rng(21)
        for _ in range(50):
            store = full_random_store(p, rng, FIXTURES[name])
            s1, w1 = eval_stmt(dict(store), p.body)
            s2, w2 = eval_stmt(dict(store), recomposed)
            if s1 != s2:
                bad.append((name, "state"))
                break
            denom = max(abs(w1), abs(w2), 1e-300)
            if abs(w1 - w2) / denom > 1e-12:
                bad.append((name, "weight"))
                break
    verdict(3, not bad, f"slice composition matches on every corpus program "
            f"(violations: {bad or 'none'})")


# ---------------------------------------------------------------------------
# 4. soundness of derivable CI partitions


def all_partitions(names):
    for combo in itertools.product((1, 2, 3), repeat=len(names)):
        x1 = frozenset(n for n, c in zip(names, combo) if c == 1)
        x2 = frozenset(n for n, c in zip(names, combo) if c == 2)
        x3 = frozenset(n for n, c in zip(names, combo) if c == 3)
        yield CIPartition(x1, x2, x3)


def test_criterion_4_ci_soundness():
    checked = derivable = violations = 0
    for name in DISCRETE_ONLY:
        p = load(name)
        params = parameters(p)
        assert len(params) <= 5
        assert all(is_bounded_int(p.gamma.type_of(n)) for n in params)
        table = enumerate_joint(p, {})
        for part in all_partitions(params):
            checked += 1
            if ci_query(p, part).derivable:
                derivable += 1
                if not check_ci_table(table, part, tol=1e-9):
                    violations += 1
    # the negative case: marginal-style split on the continuous cross
    cross = load("cross")
    neg = ci_query(cross, CIPartition(frozenset({"x3", "x4", "x5"}),
                                      frozenset({"x1"}), frozenset({"x2"})))
    ok = violations == 0 and not neg.derivable
    verdict(4, ok, f"{derivable}/{checked} partitions derivable, "
            f"{violations} oracle violations; cross negative case holds")


# ---------------------------------------------------------------------------
# 5. Markov blanket of the chain head


def test_criterion_5_markov_blanket():
    b = markov_blanket(load("hmm3"), "z1")
    ok = (b.partition.x1 == {"y1", "z2"}
          and b.partition.x2 == {"z1"}
          and b.partition.x3 == {"y2", "y3", "z3"})
    verdict(5, ok, f"blanket of z1 is {sorted(b.partition.x1)}, independent "
            f"set {sorted(b.partition.x3)}")


# ---------------------------------------------------------------------------
# 6. complexity trend of the transformed chain


def test_criterion_6_complexity_trend():
    t0 = time.time()
    ns = [4, 6, 8, 10]
    transformed = []
    naive = []
    rng = np.random.default_rng(0)
    for n in ns:
        ctx = draw_context(hmm_fixture(n), rng)
        q = transform_all(resolve_base(parse(first_order_hmm(n))))
        transformed.append(measure_cost(q, ctx).pdf_evals)
        pn = resolve_base(parse(naive_hmm(n)))
        naive.append(measure_cost(pn, ctx).pdf_evals)
    xs = np.array(ns, dtype=float)
    ys = np.array(transformed, dtype=float)
    a, b = np.polyfit(xs, ys, 1)
    resid = ys - (a * xs + b)
    r2 = 1.0 - resid.var() / ys.var()
    ratio = transformed[-1] / naive[-1]
    dt = time.time() - t0
    ok = (r2 >= 0.99 and all(nv >= 2 ** n for n, nv in zip(ns, naive))
          and ratio < 0.05 and dt < 10.0)
    verdict(6, ok, f"transformed counts {transformed} fit {a:.1f}*N{b:+.1f} "
            f"(R2={r2:.4f}); naive {naive} >= 2^N; ratio at N=10 is "
            f"{100 * ratio:.2f}% ({dt:.1f}s)")


# ---------------------------------------------------------------------------
# 7. noninterference under both systems


def _noninterference_violations(p: Program, gamma, lattice, fixture,
                                pairs: int, rng) -> int:
    bad = 0
    for level in lattice.levels:
        low_names = [n for n in gamma if lattice.leq(gamma.level_of(n), level)]
        high_names = [n for n in gamma if n not in set(low_names)]
        for _ in range(pairs):
            s1 = full_random_store(p, rng, fixture)
            s2 = dict(s1)
            for n in high_names:
                v = _random_value(p.gamma.type_of(n), rng)
                if v is not None:
                    s2[n] = v
            out1, _ = eval_stmt(s1, p.body)
            out2, _ = eval_stmt(s2, p.body)
            for n in low_names:
                if out1.get(n) != out2.get(n):
                    bad += 1
                    break
    return bad


def test_criterion_7_noninterference():
    rng = np.random.default_rng(33)
    bad = {}
    for name in ALL_PROGRAMS:
        p = load(name)
        v = _noninterference_violations(p, p.gamma, BASE, FIXTURES[name],
                                        100, rng)
        if v:
            bad[(name, "phase")] = v
        target = next(iter(parameters(p)))
        ci_gamma = markov_blanket(p, target).gamma
        v = _noninterference_violations(p, ci_gamma, CI, FIXTURES[name],
                                        100, rng)
        if v:
            bad[(name, "ci")] = v
    verdict(7, not bad, "output states stay level-equal over 100 pairs per "
            f"level, both lattices, all programs (violations: {bad or 'none'})")


# ---------------------------------------------------------------------------
# 8. the genquant slice is a normalised conditional


def _gq_discrete_enumerable(p: Program) -> bool:
    gq_params = [n for n in p.param_names()
                 if p.gamma.level_of(n) == GENQUANT]
    s_q = shred(p.gamma, p.body, BASE)[GENQUANT]
    return (gq_params
            and set(gq_params) == samples(s_q)
            and all(is_bounded_int(p.gamma.type_of(n)) for n in gq_params))


def test_criterion_8_generative_slice_normalises():
    cases = []
    for name in ("hmm3_extended", "hmm3", "sprinkler", "causal", "outliers"):
        cases.append((name, load(name)))
        cases.append((name + "+transform",
                      transform_all(load(name), ELIMINATION_ORDERS[name])))
    ran = 0
    worst = 0.0
    rng = np.random.default_rng(17)
    for label, p in cases:
        if not _gq_discrete_enumerable(p):
            continue
        from slic.syntax import SKIP

        base_name = label.split("+")[0]
        slices = shred(p.gamma, p.body, BASE)
        dm = recompose({l: (slices[l] if l != GENQUANT else SKIP)
                        for l in BASE.levels}, BASE)
        s_q = slices[GENQUANT]
        gq_params = [n for n in p.param_names()
                     if p.gamma.level_of(n) == GENQUANT]
        supports = [p.gamma.type_of(n).bound for n in gq_params]
        other_disc = [n for n in p.param_names()
                      if p.gamma.level_of(n) != GENQUANT
                      and is_bounded_int(p.gamma.type_of(n))]
        for _ in range(5):
            store = full_random_store(p, rng, FIXTURES[base_name])
            # a prefix context: fix the data/model side, run up to the slice
            sigma_m, _ = eval_stmt(dict(store), dm)
            total = 0.0
            for combo in itertools.product(*[range(1, k + 1) for k in supports]):
                st = dict(sigma_m)
                st.update(dict(zip(gq_params, combo)))
                _, w = eval_stmt(st, s_q)
                total += w
            ran += 1
            worst = max(worst, abs(total - 1.0))
    ok = ran >= 8 and worst <= 1e-9
    verdict(8, ok, f"genquant slice sums to one over its draws in {ran} "
            f"prefix contexts (worst deviation {worst:.2e})")


# ---------------------------------------------------------------------------
# 9. Stan emission golden


def test_criterion_9_stan_golden():
    def norm(t):
        return "\n".join(" ".join(l.split()) for l in t.splitlines() if l.strip())

    got = emit_stan(load("predictive"))
    want = (GOLDEN / "predictive.stan").read_text()
    verdict(9, norm(got) == norm(want),
            "predictive-draw program emits the golden block structure")


# ---------------------------------------------------------------------------
# 10. inference optimality against exhaustive enumeration


def test_criterion_10_solver_optimality():
    from slic.syntax import DATA, Decl, Gamma, L1, L2, L3

    instances = [
        ("hmm3", "z1", False), ("hmm3", "z2", False),
        ("hmm2_discrete", "z1", False), ("sprinkler", "cloudy", False),
        ("cross", "x3", False), ("cross_disc", "x1", False),
        ("kmeans", "z1", False), ("outliers", "o2", True),
    ]
    mismatches = []
    for name, z, pin_data in instances:
        p = load(name)
        entries = []
        for n, d in p.gamma.items():
            if n == z:
                entries.append((n, Decl(d.type, L2)))
            elif pin_data and d.level == DATA:
                entries.append((n, Decl(d.type, L1)))
            else:
                entries.append((n, Decl(d.type, None)))
        g = Gamma(entries)
        k = len(g.placeholders())
        assert k <= 12, (name, k)
        out = infer_ci(g, p.body)
        best = None
        for combo in itertools.product((L1, L2, L3), repeat=k):
            gg = g.with_levels(dict(zip(g.placeholders(), combo)))
            if check_stmt(gg, p.body, L1, CI).ok:
                c = sum(CI_COSTS[l] for l in combo)
                best = c if best is None or c < best else best
        if (out.report.ok, out.cost) != (best is not None, best):
            mismatches.append((name, z, out.cost, best))
    verdict(10, not mismatches,
            f"inferred costs equal exhaustive minima on {len(instances)} "
            f"instances (mismatches: {mismatches or 'none'})")
