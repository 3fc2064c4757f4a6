"""slic-ci: command-line client for the pipeline.

Thin wrapper over the service handlers (same request/response models as
the HTTP API). Exit codes: 0 on success / derivable / pass, 1 on failure
or not-derivable, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import service


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _read_json(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _split_names(s: str | None) -> list[str]:
    if not s:
        return []
    return [x.strip() for x in s.split(",") if x.strip()]


def _fail(diagnostics: list[str]) -> int:
    for d in diagnostics:
        print(d, file=sys.stderr)
    return 1


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("SLIC_SEED", "0"))


def cmd_check(args) -> int:
    resp = service.do_check(service.CheckRequest(source=_read(args.input)))
    if not resp.ok:
        return _fail(resp.diagnostics)
    for name, entry in resp.gamma.items():
        print(f"{name}: {entry.level}")
    return 0


def cmd_shred(args) -> int:
    resp = service.do_shred(service.ShredRequest(source=_read(args.input)))
    if not resp.ok:
        return _fail(resp.diagnostics)
    for level, text in resp.slices.items():
        print(f"// --- {level} ---")
        print(text, end="")
    return 0


def cmd_ci(args) -> int:
    resp = service.do_ci(service.CiRequest(
        source=_read(args.input), x2=_split_names(args.x2),
        x3=_split_names(args.x3), x1=_split_names(args.x1)))
    if not resp.ok:
        return _fail(resp.diagnostics)
    if resp.derivable:
        print("derivable")
        for name, level in resp.witness.items():
            print(f"  {name}: {level}")
        return 0
    print("not derivable")
    return 1


def cmd_blanket(args) -> int:
    resp = service.do_blanket(service.BlanketRequest(
        source=_read(args.input), var=args.var))
    if not resp.ok:
        return _fail(resp.diagnostics)
    print(f"blanket (x1): {', '.join(resp.x1) or '-'}")
    print(f"target  (x2): {', '.join(resp.x2)}")
    print(f"independent (x3): {', '.join(resp.x3) or '-'}")
    return 0


def cmd_transform(args) -> int:
    order = _split_names(args.order) or None
    resp = service.do_transform(service.TransformRequest(
        source=_read(args.input), order=order))
    if not resp.ok:
        return _fail(resp.diagnostics)
    out = resp.source
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        print(out, end="")
    return 0


def cmd_eval(args) -> int:
    store = _read_json(args.data)
    store.update(_read_json(args.store))
    resp = service.do_eval(service.EvalRequest(
        source=_read(args.input), store=store, counted=args.count))
    if not resp.ok:
        return _fail(resp.diagnostics)
    out = {"weight": resp.weight, "state": resp.state}
    if args.count:
        out["pdf_evals"] = resp.pdf_evals
        out["factor_evals"] = resp.factor_evals
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_preserve(args) -> int:
    resp = service.do_preserve(service.PreserveRequest(
        source=_read(args.input), against=_read(args.against),
        data=_read_json(args.data), trials=args.trials, tol=args.tol,
        seed=_seed(args)))
    if not resp.ok:
        return _fail(resp.diagnostics)
    print(json.dumps({
        "pass": resp.passed,
        "max_rel_err": resp.max_rel_err,
        "num_points": resp.num_points,
        "worst_point": resp.worst_point,
    }, indent=2, sort_keys=True))
    return 0 if resp.passed else 1


def cmd_emit_stan(args) -> int:
    resp = service.do_emit_stan(service.StanRequest(source=_read(args.input)))
    if not resp.ok:
        return _fail(resp.diagnostics)
    if args.output:
        Path(args.output).write_text(resp.stan, encoding="utf-8")
    else:
        print(resp.stan, end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("slic.service:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slic-ci",
                                 description="probabilistic program slicer, "
                                 "CI checker and discrete-parameter eliminator")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("check", cmd_check, help="infer phase levels and print them")
    p.add_argument("input")

    p = add("shred", cmd_shred, help="print the three phase slices")
    p.add_argument("input")

    p = add("ci", cmd_ci, help="query a conditional independence (x2 CI x3 | x1)")
    p.add_argument("input")
    p.add_argument("--x2", required=True, help="comma-separated names")
    p.add_argument("--x3", required=True, help="comma-separated names")
    p.add_argument("--x1", default="", help="conditioning names (rest default here)")

    p = add("blanket", cmd_blanket, help="minimal Markov blanket of a parameter")
    p.add_argument("input")
    p.add_argument("--var", required=True)

    p = add("transform", cmd_transform, help="eliminate discrete model parameters")
    p.add_argument("input")
    p.add_argument("--order", default="", help="comma-separated elimination order")
    p.add_argument("-o", "--output")

    p = add("eval", cmd_eval, help="evaluate the density at a store")
    p.add_argument("input")
    p.add_argument("--data", help="JSON file with data values")
    p.add_argument("--store", help="JSON file with parameter values")
    p.add_argument("--count", action="store_true", help="report evaluation counters")

    p = add("preserve", cmd_preserve, help="compare enumerated joints of two programs")
    p.add_argument("input")
    p.add_argument("--against", required=True)
    p.add_argument("--data", help="JSON file fixing context values")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=None)

    p = add("emit-stan", cmd_emit_stan, help="emit block-structured Stan-style text")
    p.add_argument("input")
    p.add_argument("-o", "--output")

    p = add("serve", cmd_serve, help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
