"""Shared access to the corpus programs and their context fixtures.

Each fixture lists example values for the variables the oracle must fix
(data inputs and continuous parameters); reals get jittered per draw
within the given bounds, ints stay put.
"""

from __future__ import annotations

from pathlib import Path

from slic.ci import resolve_base
from slic.oracle import Fixture, FixtureVar
from slic.parser import parse_file
from slic.syntax import Program

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
GOLDEN = CORPUS / "golden"


def load(name: str) -> Program:
    """Parse corpus/<name>.slic and resolve its levels."""
    return resolve_base(parse_file(CORPUS / f"{name}.slic"))


def load_raw(name: str) -> Program:
    return parse_file(CORPUS / f"{name}.slic")


def prob(v, lo=0.05, hi=0.95) -> FixtureVar:
    return FixtureVar(v, lo=lo, hi=hi)


def real(v) -> FixtureVar:
    return FixtureVar(v)


def fixed(v) -> FixtureVar:
    return FixtureVar(v, fixed=True)


FIXTURES: dict[str, Fixture] = {
    "predictive": {"mu": real(0.5), "x": real(0.8), "x_pred": real(-0.2)},
    "hmm2_discrete": {"theta0": prob(0.3)},
    "hmm2_discrete_fixed": {},
    "hmm3": {"y1": real(0.9), "y2": real(-0.3), "y3": real(1.2)},
    "hmm3_naive": {"y1": real(0.9), "y2": real(-0.3), "y3": real(1.2)},
    "hmm3_factored": {"y1": real(0.9), "y2": real(-0.3), "y3": real(1.2)},
    "hmm3_extended": {
        "phi_": prob([0.3, 0.8]),
        "theta": prob([0.6, 0.4]),
        "y1": real(0.9), "y2": real(-0.3), "y3": real(1.2),
    },
    "cross": {"x1": real(0.4), "x2": real(-0.6), "x3": real(0.2),
              "x4": real(1.1), "x5": real(-0.8)},
    "cross_disc": {},
    "sprinkler": {"p": prob(0.5)},
    "sprinkler_disc": {},
    "kmeans": {
        "pi": fixed([0.3, 0.4, 0.3]),
        "y": real([[0.5, -1.0, 2.0], [1.5, 0.3, -0.7]]),
        "mu": real([[0.0, 1.0, -1.0], [0.5, -0.5, 1.5]]),
    },
    "causal": {
        "q": prob(0.8),
        "prob_intervention": prob(0.7),
        "pAcausesB": prob(0.6),
        "A": fixed([1, 2, 2, 1]),
        "B": fixed([2, 2, 1, 1]),
        "doB": fixed([0, 1, 0, 1]),
    },
    "outliers": {
        "x": real([0.0, 1.0, 2.0, 3.0]),
        "y": real([0.1, 1.2, 1.9, 9.0]),
        "alpha": real(1.0),
        "beta": real(0.1),
        "pi1": real(0.4),
        "pi2": real(-0.2),
    },
}

# programs with at least one discrete model-level parameter, and the
# elimination order used in the golden transforms
ELIMINATION_ORDERS: dict[str, list[str]] = {
    "hmm2_discrete": ["z1", "z2", "y1", "y2"],
    "hmm3": ["z1", "z2", "z3"],
    "hmm3_extended": ["z1", "z2", "z3"],
    "sprinkler": ["cloudy", "sprinkler", "rain", "wet"],
    "kmeans": ["z1", "z2", "z3"],
    "causal": ["AcausesB"],
    "outliers": ["o1", "o2", "o3", "o4"],
}

ALL_PROGRAMS = sorted(FIXTURES)

# programs where every parameter is a bounded int (enumerable without
# any context at all, or with data fixtures only)
DISCRETE_ONLY = ["hmm2_discrete_fixed", "cross_disc", "sprinkler_disc"]


def first_order_hmm(n: int) -> str:
    """Source of an n-step binary chain with direct indexing."""
    lines = [
        "real[2] phi_ ~ beta(1, 1);",
        "real[2] theta ~ beta(1, 1);",
        "int<2> z1 ~ bernoulli(theta[1]);",
    ]
    for i in range(2, n + 1):
        lines.append(f"int<2> z{i} ~ bernoulli(theta[z{i - 1}]);")
    for i in range(1, n + 1):
        lines.append(f"data real y{i} ~ normal(phi_[z{i}], 1);")
    return "\n".join(lines) + "\n"


def naive_hmm(n: int) -> str:
    """The same chain with one summation loop per state around the whole
    model core."""
    body = [f"z1 ~ bernoulli(theta[1]);"]
    for i in range(2, n + 1):
        body.append(f"z{i} ~ bernoulli(theta[z{i - 1}]);")
    for i in range(1, n + 1):
        body.append(f"y{i} ~ normal(phi_[z{i}], 1);")
    text = "\n".join("    " * n + l for l in body)
    for i in range(n, 0, -1):
        depth = i - 1
        text = "    " * depth + f"elim(int<2> z{i}) {{\n" + text
        text += "\n" + "    " * depth + "}"
    header = ["real[2] phi_ ~ beta(1, 1);", "real[2] theta ~ beta(1, 1);"]
    header += [f"data real y{i};" for i in range(1, n + 1)]
    return "\n".join(header) + "\n" + text + "\n"


def hmm_fixture(n: int) -> Fixture:
    fx: Fixture = {"phi_": prob([0.3, 0.8]), "theta": prob([0.6, 0.4])}
    for i in range(1, n + 1):
        fx[f"y{i}"] = real(0.5 * ((i % 3) - 1))
    return fx
