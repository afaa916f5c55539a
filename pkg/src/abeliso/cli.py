"""Command line front end.

Exit codes: 0 success, 2 input error, 3 resource-cap error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .automorphisms import exact_automorphism_distance
from .errors import AbelisoError, GroupTooLarge, SearchCapExceeded
from .estimators import QueryOracle
from .fourier import dft, sparsity, spectral_norm
from .group import index_to_element, parse_group
from .sieve import SieveConfig, draw_points, implicit_sieve, paper_query_bound, sparse_implicit_sieve
from .tester import TesterConfig, test_isomorphism, test_isomorphism_sparse

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 2, 3


class InputError(AbelisoError):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _elapsed(t0: float, args) -> float:
    return 0.0 if args.deterministic else round(time.perf_counter() - t0, 6)


def _sieve_kwargs(args) -> dict:
    kw = {}
    if args.t is not None:
        kw["t"] = args.t
    for name in ("proj_error", "wt4_error"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if getattr(args, "delta", None) is not None:
        d = args.delta
        kw.update(delta_wt2=d, delta_wt4=d, delta_proj=d, delta_coef=d)
    return kw


# -- subcommands ---------------------------------------------------------------


def cmd_dft(args) -> int:
    f = io.read_function(args.input)
    t = dft(f)
    support = t.support()
    report = {
        "group": io.group_payload(f.group),
        "spectral_norm": spectral_norm(t),
        "sparsity": sparsity(t),
        "support": [list(index_to_element(f.group, int(i))) for i in support],
        "coefficients": [io.complex_pair(c) for c in t.coeffs],
    }
    if args.sparse_out:
        Path(args.sparse_out).write_text(io.dumps(io.sparse_document(t)))
    _emit(io.dumps(report), args.out)
    return EXIT_OK


def cmd_sieve(args) -> int:
    f = io.read_function(args.input)
    if args.theta is None or args.m_tilde is None:
        raise InputError("sieve needs --theta and --m-tilde")
    t0 = time.perf_counter()
    cfg = SieveConfig.paper(args.theta, args.m_tilde) if args.paper_defaults else SieveConfig(
        args.theta, args.m_tilde, **_sieve_kwargs(args)
    )
    oracle = QueryOracle(f)
    rng = _rng(args.seed)
    r_m, r_s = rng.spawn(2)
    xs = draw_points(f.group, args.m_tilde, r_m)
    if args.sparse:
        s = args.s if args.s is not None else sparsity(dft(f))
        out = sparse_implicit_sieve(oracle, xs, int(s), cfg, r_s)
    else:
        out = implicit_sieve(oracle, xs, cfg, r_s)
    g = f.group
    report = {
        "seed": args.seed,
        "config": {"theta": args.theta, "m_tilde": args.m_tilde, "t": out.t, "sparse": args.sparse,
                   "paper_defaults": args.paper_defaults},
        "survivors": [list(lab) for lab in out.survived_buckets],
        "points": [list(index_to_element(g, int(x))) for x in out.xs],
        "f_column": [int(v) for v in out.f_column],
        "q_exponents": out.q_exponents.tolist(),
        "suspect_rows": int(out.suspect_rows.sum()),
        "ledger": out.queries,
        "samples": {k: v for k, v in out.samples.items()},
        "total_queries": out.total_queries,
        "wall_time": _elapsed(t0, args),
    }
    if args.verify:
        truth = out.truth_columns()
        report["verify"] = {
            "dominating": [list(index_to_element(g, a)) for a in out.debug_truth],
            "q_matches_truth": bool(np.array_equal(truth, out.q_exponents)),
        }
    _emit(io.dumps(report), args.out)
    return EXIT_OK


def cmd_test_iso(args) -> int:
    f = io.read_function(args.f)
    g = io.read_function(args.g)
    if f.group != g.group:
        raise InputError(f"f is on {f.group} but g is on {g.group}")
    t0 = time.perf_counter()
    cfg = TesterConfig(
        args.epsilon, args.tau, s=args.s, theta=args.theta, m_tilde=args.m_tilde,
        sieve=_sieve_kwargs(args), paper_defaults=args.paper_defaults,
    )
    oracle = QueryOracle(f, replay=args.replay)
    rng = _rng(args.seed)
    if args.sparse:
        v = test_isomorphism_sparse(oracle, g, args.s, cfg, rng)
    else:
        v = test_isomorphism(oracle, g, cfg, rng)
    report = {
        "decision": v.decision.value,
        "best_correlation": v.best_correlation,
        "thresholds": {"accept": v.thresholds[0], "reject": v.thresholds[1]},
        "witness": [list(e) for e in v.witness.generator_images] if v.witness is not None else None,
        "total_queries": v.total_queries,
        "ledger": v.ledger,
        "seed": args.seed,
        "config": {"epsilon": args.epsilon, "tau": args.tau, "sparse": args.sparse,
                   **{k: v.metadata[k] for k in ("theta", "m_tilde", "s", "t", "survivors")}},
        "wall_time": _elapsed(t0, args),
    }
    if args.verify:
        dist, _ = exact_automorphism_distance(f, g)
        if dist <= args.epsilon:
            side = "close"
        elif dist >= args.epsilon + args.tau:
            side = "far"
        else:
            side = "outside-promise"
        report["verify"] = {"distance": dist, "promise_side": side}
    _emit(io.dumps(report), args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    rng = _rng(args.seed)
    kind = args.kind
    sidecar = None
    if kind in ("automorphic-image", "far-perturbation"):
        if not args.input:
            raise InputError(f"{kind} needs --input")
        base = io.read_function(args.input)
    else:
        if not args.group:
            raise InputError(f"{kind} needs --group")
        g = parse_group(args.group)
    if kind == "constant":
        f = io.constant(g, args.value)
    elif kind == "random":
        f = io.random_boolean(g, rng)
    elif kind == "subgroup-indicator":
        cons = None
        if args.constraints:
            cons = [[int(v) for v in c.split(",")] for c in args.constraints.split(";")]
        f = io.subgroup_indicator(g, cons, rng)
    elif kind == "automorphic-image":
        f, a = io.automorphic_image(base, rng)
        sidecar = io.automorphism_document(a)
    elif kind == "far-perturbation":
        if args.fraction is None:
            raise InputError("far-perturbation needs --fraction")
        f = io.far_perturbation(base, args.fraction, rng)
    else:  # pragma: no cover - argparse restricts choices
        raise InputError(f"unknown kind {kind!r}")
    _emit(io.dumps(io.function_document(f)), args.out)
    if sidecar is not None:
        if args.out:
            Path(args.out + ".aut.json").write_text(io.dumps(sidecar))
        else:
            sys.stderr.write(io.dumps(sidecar))
    return EXIT_OK


def cmd_verify(args) -> int:
    f = io.read_function(args.f)
    t = dft(f)
    report = {"spectral_norm": spectral_norm(t), "sparsity": sparsity(t)}
    if args.g:
        g = io.read_function(args.g)
        if f.group != g.group:
            raise InputError("f and g live on different groups")
        dist, a = exact_automorphism_distance(f, g)
        report["distance"] = dist
        report["witness"] = [list(e) for e in a.generator_images]
        if args.epsilon is not None and args.tau is not None:
            report["promise_side"] = (
                "close" if dist <= args.epsilon else "far" if dist >= args.epsilon + args.tau else "outside-promise"
            )
    _emit(io.dumps(report), args.out)
    return EXIT_OK


BENCH_COLUMNS = [
    "run", "group", "order", "L", "mode", "function", "theta", "m_tilde", "t", "delta", "epsilon", "tau",
    "n_wt2", "n_wt4", "n_projection", "n_coefficient",
    "q_wt2", "q_wt4", "q_projection", "q_coefficient", "q_labels", "q_coefficients",
    "queries", "survivors", "decision", "wall_time",
]


def _bench_function(kind: str, g, rng):
    if kind == "constant":
        return io.constant(g)
    if kind == "random":
        return io.random_boolean(g, rng)
    if kind == "subgroup-indicator":
        return io.subgroup_indicator(g, rng=rng)
    raise InputError(f"unknown bench function {kind!r}")


def bench_rows(scenario: dict, seed: int, deterministic: bool = False) -> list[dict]:
    runs = scenario.get("runs", [])
    if not isinstance(runs, list):
        raise InputError("scenario 'runs' must be a list")
    defaults = scenario.get("defaults", {})
    seeds = np.random.SeedSequence(seed).spawn(len(runs))
    rows = []
    for k, (run, ss) in enumerate(zip(runs, seeds)):
        p = {**defaults, **run}
        t0 = time.perf_counter()
        g = parse_group(str(p["group"]))
        rng = np.random.default_rng(ss)
        r_f, r_m, r_s = rng.spawn(3)
        fn = p.get("function", "subgroup-indicator")
        f = _bench_function(fn, g, r_f)
        mode = p.get("mode", "sieve")
        delta = p.get("delta", 0.01)
        row = dict.fromkeys(BENCH_COLUMNS, "")
        row.update(run=k, group=g.label(), order=g.order, L=g.lcm_L, mode=mode, function=fn, delta=delta)
        oracle = QueryOracle(f)
        if mode in ("sieve", "sparse-sieve"):
            theta, m = float(p["theta"]), int(p["m_tilde"])
            cfg = SieveConfig(theta, m, t=p.get("t"), delta_wt2=delta, delta_wt4=delta, delta_proj=delta,
                              delta_coef=delta)
            xs = draw_points(g, m, r_m)
            if mode == "sieve":
                out = implicit_sieve(oracle, xs, cfg, r_s)
            else:
                out = sparse_implicit_sieve(oracle, xs, int(p.get("s", sparsity(dft(f)))), cfg, r_s)
            s = out.samples
            row.update(theta=theta, m_tilde=m, t=out.t, n_wt2=s["wt2"], n_wt4=s["wt4_n"],
                       n_projection=s["projection_n"], n_coefficient=s.get("coefficient", 0),
                       survivors=out.n_survivors, decision="")
        elif mode in ("test-iso", "test-iso-sparse"):
            g_fn = _bench_function(p.get("target", fn), g, r_f)
            cfg = TesterConfig(float(p["epsilon"]), float(p["tau"]), theta=p.get("theta"),
                               m_tilde=p.get("m_tilde"), sieve={"t": p.get("t"), "delta_wt2": delta,
                                                                "delta_wt4": delta, "delta_proj": delta,
                                                                "delta_coef": delta})
            if mode == "test-iso":
                v = test_isomorphism(oracle, g_fn, cfg, r_s)
            else:
                v = test_isomorphism_sparse(oracle, g_fn, None, cfg, r_s)
            s = v.sieve.samples
            row.update(theta=v.metadata["theta"], m_tilde=v.metadata["m_tilde"], t=v.metadata["t"],
                       epsilon=cfg.epsilon, tau=cfg.tau, n_wt2=s["wt2"], n_wt4=s["wt4_n"],
                       n_projection=s["projection_n"], n_coefficient=s.get("coefficient", 0),
                       survivors=v.metadata["survivors"], decision=v.decision.value)
        else:
            raise InputError(f"unknown bench mode {mode!r}")
        for stage in ("wt2", "wt4", "projection", "coefficient", "labels", "coefficients"):
            row[f"q_{stage}"] = oracle.ledger.get(stage, 0)
        row["queries"] = oracle.count
        row["wall_time"] = 0.0 if deterministic else round(time.perf_counter() - t0, 6)
        rows.append(row)
    return rows


def cmd_bench(args) -> int:
    try:
        scenario = json.loads(Path(args.scenario).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.scenario}: not valid JSON ({exc})") from exc
    rows = bench_rows(scenario, args.seed, args.deterministic)
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_bound(args) -> int:
    g = parse_group(args.group)
    res = paper_query_bound(args.theta, args.m_tilde, g.lcm_L)
    res = {k: (str(v) if isinstance(v, int) and v >= 2**53 else v) for k, v in res.items()}
    _emit(io.dumps(res), args.out)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abeliso", description="Fourier-sampling isomorphism testing over finite Abelian groups")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--deterministic", action="store_true", help="zero out timing fields")

    def sieve_knobs(sp):
        sp.add_argument("--theta", type=float)
        sp.add_argument("--t", type=int)
        sp.add_argument("--m-tilde", dest="m_tilde", type=int)
        sp.add_argument("--delta", type=float, help="per-step failure probability (desk mode)")
        sp.add_argument("--proj-error", dest="proj_error", type=float)
        sp.add_argument("--wt4-error", dest="wt4_error", type=float)
        sp.add_argument("--sparse", action="store_true")
        sp.add_argument("--s", type=float)
        sp.add_argument("--paper-defaults", dest="paper_defaults", action="store_true")
        sp.add_argument("--verify", action="store_true")

    sp = sub.add_parser("dft", help="exact Fourier table of a function file")
    sp.add_argument("input")
    sp.add_argument("--sparse-out", dest="sparse_out", help="also write the spectrum as a sparse function file")
    common(sp)
    sp.set_defaults(func=cmd_dft)

    sp = sub.add_parser("sieve", help="run the implicit sieve on a function file")
    sp.add_argument("input")
    sieve_knobs(sp)
    common(sp)
    sp.set_defaults(func=cmd_sieve)

    sp = sub.add_parser("test-iso", help="tolerant isomorphism test of f against g")
    sp.add_argument("f")
    sp.add_argument("g")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--replay", action="store_true", help="charge repeated queries once")
    sieve_knobs(sp)
    common(sp)
    sp.set_defaults(func=cmd_test_iso)

    sp = sub.add_parser("gen", help="generate a function file")
    sp.add_argument("kind", choices=io.GENERATOR_KINDS)
    sp.add_argument("--group")
    sp.add_argument("--input")
    sp.add_argument("--value", type=int, default=1, choices=(-1, 1))
    sp.add_argument("--constraints", help="semicolon-separated elements, e.g. '1,0;0,2'")
    sp.add_argument("--fraction", type=float)
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("verify", help="exact spectral summary and automorphism distance")
    sp.add_argument("f")
    sp.add_argument("g", nargs="?")
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--tau", type=float)
    common(sp)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bench", help="run a scenario grid and write CSV")
    sp.add_argument("scenario")
    common(sp)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("bound", help="query counts under the original constants")
    sp.add_argument("--group", required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--m-tilde", dest="m_tilde", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_bound)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (GroupTooLarge, SearchCapExceeded) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CAP
    except (AbelisoError, ValueError, KeyError, TypeError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
