"""Command line front end: ``stochktsp {gen,run,opt,orienteer,gaplp,check}``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import random
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .adaptive import AdaptiveConfig, AdaptivePolicy
from .bidding import solve_bidding_lp, verify_minimax
from .evaluation import (check_capped_sum, check_harmonic_bound, check_lemma_main, derive_seed,
                         monte_carlo, phase_table)
from .exact_opt import StateSpaceError, completion_profile, optimal_adaptive, optimal_nonadaptive
from .gap_bench import (gen_example1, gen_example2, gen_example3, gen_example4, gen_gap_instance,
                        gen_random)
from .model import fraction_str, instance_to_dict, parse_instance, truncated_expectation
from .nonadaptive import (NonAdaptiveConfig, build_nonadaptive, execute_nonadaptive,
                          expected_length_exact)
from .orienteering import (OracleSizeError, OrienteeringProblem, brute_force, get_oracle,
                           solve_exact, solve_heuristic, solve_knapsack)


class UsageError(Exception):
    pass


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _manifest(args, command: str, instance_text: str | None = None) -> dict:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("func", "out", "trace_out", "command") and v is not None}
    out = {"command": command, "version": __version__, "config": config}
    if instance_text is not None:
        out["instance_sha256"] = hashlib.sha256(instance_text.encode()).hexdigest()
    return out


def _emit(args, text: str) -> None:
    """Write ``text`` to --out if given; otherwise print it."""
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv_with_manifest(manifest: dict, body: str) -> str:
    return f"# manifest: {json.dumps(manifest, sort_keys=True)}\n{body}"


def _load(args):
    text = Path(args.instance).read_text(encoding="utf-8")
    inst = parse_instance(text)
    if args.tour_mode:
        inst = inst.with_tour_mode(args.tour_mode)
    return inst, text


# --------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    kind = args.gen_kind
    if kind == "example1":
        inst = gen_example1(args.l)
    elif kind == "example3":
        inst = gen_example3(args.l)
    elif kind == "example2":
        inst = gen_example2(args.h, args.t, tour_mode=args.tour_mode or "closed")
    elif kind == "example4":
        inst = gen_example4(args.l, args.h, args.m)
    elif kind == "gap":
        p = [Fraction(x) for x in args.p.split(",")] if args.p else None
        inst = gen_gap_instance(args.n, p)
    elif kind == "random":
        inst = gen_random(args.n, args.k, args.seed, args.geometry,
                          tour_mode=args.tour_mode or "open", max_support=args.max_support,
                          backstop=args.backstop)
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown generator {kind}")
    if args.tour_mode and kind not in ("example2", "random"):
        inst = inst.with_tour_mode(args.tour_mode)
    obj = instance_to_dict(inst)
    obj["manifest"] = _manifest(args, f"gen {kind}")
    text = json.dumps(obj, indent=1) + "\n"
    summary = f"kind={inst.kind} n={inst.n} items={inst.n - 1} k={inst.k} name={inst.name}\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        sys.stdout.write(summary)
    else:
        sys.stdout.write(text)
        sys.stderr.write(summary)
    return 0


# --------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    inst, text = _load(args)
    try:
        oracle = get_oracle(args.oracle, inst)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    lines = []
    exact_len = None
    if args.policy == "adaptive":
        cfg = AdaptiveConfig(alpha_override=args.alpha_override, early_stop=args.early_stop)
        policy = AdaptivePolicy(inst, oracle, cfg)
        alpha_used = policy.alpha
    else:
        tour = build_nonadaptive(inst, oracle, NonAdaptiveConfig(alpha_override=args.alpha_override))
        policy = tour
        alpha_used = tour.build_alpha
        exact_len = expected_length_exact(inst, tour)
    mc = monte_carlo(inst, policy, args.trials, seed=args.seed, workers=args.workers)
    if args.trace_out:
        _write_trace(args, inst, policy, text)
    profile = None
    if args.with_opt:
        try:
            profile = completion_profile(optimal_adaptive(inst))
        except StateSpaceError as exc:
            lines.append(f"# opt unavailable: {exc}")
    verdicts = check_lemma_main(mc.stats, profile) if args.policy == "adaptive" else None
    table = phase_table(mc.stats, profile, verdicts)
    manifest = _manifest(args, "run", text)
    if args.format == "json":
        report = {
            "manifest": manifest,
            "policy": args.policy,
            "alpha": alpha_used,
            "trials": mc.trials,
            "mean_length": float(mc.mean),
            "mean_length_exact": fraction_str(mc.mean),
            "variance": mc.variance,
            "ci95": list(mc.ci95),
            "target_met_rate": mc.completion_rate,
            "expected_length_exact": None if exact_len is None else fraction_str(exact_len),
            "phases": list(csv.DictReader(io.StringIO(table))),
        }
        _emit(args, json.dumps(report, indent=1, sort_keys=True) + "\n")
        return 0
    head = [
        f"policy: {args.policy}",
        f"alpha: {alpha_used}",
        f"trials: {mc.trials}",
        f"mean length: {float(mc.mean):.6f}",
        f"95% CI: [{mc.ci95[0]:.6f}, {mc.ci95[1]:.6f}]",
    ]
    if exact_len is not None:
        head.append(f"expected length (exact): {fraction_str(exact_len)} = {float(exact_len):.6f}")
    body = "\n".join(f"# {h}" for h in head + lines) + "\n" + table
    _emit(args, _csv_with_manifest(manifest, body))
    return 0


def _write_trace(args, inst, policy, text: str) -> None:
    """Full record of trial 0, replayed with its derived seed."""
    rng = random.Random(derive_seed(args.seed, 0))
    if isinstance(policy, AdaptivePolicy):
        tr = policy.run(rng, record=True)
        body = {"records": [r.to_dict() for r in tr.records]}
    else:
        tr = execute_nonadaptive(inst, policy, rng)
        body = {"tour": policy.to_dict()}
    body.update({
        "manifest": _manifest(args, "run", text),
        "trial": 0,
        "total_length": fraction_str(tr.total_length),
        "total_reward": str(tr.total_reward),
        "target_met": tr.target_met,
        "visit_order": tr.visit_order,
    })
    Path(args.trace_out).write_text(json.dumps(body, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# opt


def cmd_opt(args) -> int:
    inst, text = _load(args)
    try:
        pol = optimal_adaptive(inst)
    except StateSpaceError as exc:
        raise UsageError(f"adaptive optimum: {exc}") from None
    prof = completion_profile(pol)
    try:
        walk, na = optimal_nonadaptive(inst)
    except StateSpaceError as exc:
        walk, na = None, None
        sys.stderr.write(f"non-adaptive optimum skipped: {exc}\n")
    report = {
        "manifest": _manifest(args, "opt", text),
        "adaptive": float(pol.opt),
        "adaptive_exact": fraction_str(pol.opt),
        "nonadaptive": None if na is None else float(na),
        "nonadaptive_exact": None if na is None else fraction_str(na),
        "nonadaptive_walk": None if walk is None else list(walk),
        "adaptivity_gap": None if na is None or pol.opt == 0 else float(na / pol.opt),
        "profile_beyond": [fraction_str(b) for b in prof.beyond],
    }
    if args.format == "json":
        _emit(args, json.dumps(report, indent=1, sort_keys=True) + "\n")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value", "exact"])
        w.writerow(["adaptive", f"{float(pol.opt):.6f}", fraction_str(pol.opt)])
        if na is not None:
            w.writerow(["nonadaptive", f"{float(na):.6f}", fraction_str(na)])
            if pol.opt:
                w.writerow(["adaptivity_gap", f"{float(na / pol.opt):.6f}", fraction_str(na / pol.opt)])
        for i, b in enumerate(prof.beyond):
            w.writerow([f"u_star_{i}", f"{float(b):.6f}", fraction_str(b)])
        _emit(args, _csv_with_manifest(report["manifest"], buf.getvalue()))
    return 0


# --------------------------------------------------------------------------
# orienteer


def cmd_orienteer(args) -> int:
    inst, text = _load(args)
    if args.profits:
        profits = [Fraction(x) for x in args.profits.split(",")]
    else:
        profits = [truncated_expectation(d, inst.k) for d in inst.rewards]
    profits[inst.depot] = Fraction(0)
    budget = None if args.budget in ("inf", "none") else Fraction(args.budget)
    prob = OrienteeringProblem(inst, budget, profits)
    solvers = {"exact": solve_exact, "knapsack": solve_knapsack, "brute": brute_force,
               "heuristic": solve_heuristic}
    if args.solver == "auto":
        solver = solve_knapsack if inst.kind == "knapsack" else solve_exact
    else:
        solver = solvers[args.solver]
    try:
        res = solver(prob)
    except (OracleSizeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    report = {
        "manifest": _manifest(args, "orienteer", text),
        "walk": list(res.walk),
        "length": fraction_str(res.length),
        "profit": fraction_str(res.profit),
        "rho": str(res.rho),
        "exact_ratio": None if res.exact_ratio is None else fraction_str(res.exact_ratio),
    }
    _emit(args, json.dumps(report, indent=1, sort_keys=True) + "\n")
    return 0


# --------------------------------------------------------------------------
# gaplp


def cmd_gaplp(args) -> int:
    if args.sweep:
        lo, _, hi = args.sweep.partition("-")
        ns = list(range(int(lo), int(hi or lo) + 1))
    else:
        ns = [args.n]
    records = [solve_bidding_lp(n).to_record() for n in ns]
    manifest = _manifest(args, "gaplp")
    if args.format == "json":
        _emit(args, json.dumps({"manifest": manifest, "results": records}, indent=1, sort_keys=True) + "\n")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "value", "value_exact", "gap", "p"])
        for r in records:
            w.writerow([r["n"], f"{r['value']:.12f}", r["value_exact"] or "", f"{r['gap']:.3e}",
                        " ".join(str(x) for x in r["p"])])
        _emit(args, _csv_with_manifest(manifest, buf.getvalue()))
    return 0


# --------------------------------------------------------------------------
# check


def _suite_capped_sum(rng: random.Random, cases: int) -> dict:
    bad = 0
    for _ in range(cases):
        ds = []
        for _ in range(rng.randint(1, 6)):
            size = rng.randint(1, 4)
            values = {Fraction(rng.randint(0, 12), 12) for _ in range(size)}
            weights = [rng.randint(1, 9) for _ in values]
            tot = sum(weights)
            ds.append({v: Fraction(wt, tot) for v, wt in zip(sorted(values), weights)})
        if not check_capped_sum(ds)[2]:
            bad += 1
    return {"cases": cases, "violations": bad, "ok": bad == 0}


def _suite_harmonic(rng: random.Random, cases: int) -> dict:
    bad = phases = 0
    for c in range(cases):
        inst = gen_random(rng.randint(3, 6), rng.randint(1, 12), rng.randrange(2**31))
        pol = AdaptivePolicy(inst)
        for s in range(20):
            tr = pol.run(rng.randrange(2**63), record=False)
            verdicts = check_harmonic_bound(tr)
            phases += len(verdicts)
            bad += sum(1 for ok in verdicts.values() if not ok)
    return {"cases": cases, "phases": phases, "violations": bad, "ok": bad == 0}


def _suite_minimax(rng: random.Random, cases: int) -> dict:
    bad = 0
    for _ in range(cases):
        C = [[rng.randint(0, 9) for _ in range(4)] for _ in range(8)]
        if not verify_minimax(C).verdict:
            bad += 1
    return {"cases": cases, "violations": bad, "ok": bad == 0}


def _suite_lemma(rng: random.Random, cases: int, trials: int) -> dict:
    bad = 0
    rows = []
    for _ in range(cases):
        inst = gen_random(rng.randint(3, 6), rng.randint(2, 12), rng.randrange(2**31), backstop=True)
        mc = monte_carlo(inst, AdaptivePolicy(inst), trials, seed=rng.randrange(2**31))
        verdicts = check_lemma_main(mc.stats, completion_profile(optimal_adaptive(inst)))
        failed = [v.phase for v in verdicts if v.ok is False]
        bad += len(failed)
        rows.append({"instance": inst.name, "failed_phases": failed})
    # sampled check: reported, does not affect the exit code
    return {"cases": cases, "trials": trials, "violations": bad, "ok": bad == 0,
            "stochastic": True, "instances": rows}


def cmd_check(args) -> int:
    rng = random.Random(args.seed)
    suites = ["harmonic", "capped-sum", "minimax", "lemma"] if args.suite == "all" else [args.suite]
    report: dict = {"manifest": _manifest(args, "check"), "suites": {}}
    for name in suites:
        if name == "capped-sum":
            report["suites"][name] = _suite_capped_sum(rng, args.cases)
        elif name == "harmonic":
            report["suites"][name] = _suite_harmonic(rng, args.cases)
        elif name == "minimax":
            report["suites"][name] = _suite_minimax(rng, args.cases)
        elif name == "lemma":
            report["suites"][name] = _suite_lemma(rng, args.cases, args.trials)
    _emit(args, json.dumps(report, indent=1, sort_keys=True) + "\n")
    failed = [n for n, r in report["suites"].items() if not r["ok"] and not r.get("stochastic")]
    if failed:
        sys.stderr.write(f"deterministic check failures: {', '.join(failed)}\n")
        return 1
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--tour-mode", choices=["open", "closed"], default=None)

    p = argparse.ArgumentParser(prog="stochktsp", description=__doc__, parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance", parents=[common])
    g.add_argument("gen_kind", choices=["example1", "example2", "example3", "example4", "gap", "random"])
    g.add_argument("--l", type=positive_int, default=6)
    g.add_argument("--h", type=positive_int, default=1)
    g.add_argument("--t", type=positive_int, default=2)
    g.add_argument("--m", type=positive_int, default=None)
    g.add_argument("--n", type=positive_int, default=4)
    g.add_argument("--k", type=int, default=8)
    g.add_argument("--p", default=None, help="comma-separated threshold probabilities")
    g.add_argument("--geometry", choices=["points", "star"], default="points")
    g.add_argument("--max-support", type=positive_int, default=3)
    g.add_argument("--backstop", action="store_true")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate a policy", parents=[common])
    r.add_argument("instance")
    r.add_argument("--policy", choices=["adaptive", "nonadaptive"], default="adaptive")
    r.add_argument("--trials", type=positive_int, default=1000)
    r.add_argument("--alpha-override", type=positive_int, default=None)
    r.add_argument("--early-stop", action=argparse.BooleanOptionalAction, default=True)
    r.add_argument("--oracle", choices=["auto", "exact", "knapsack", "heuristic"], default="auto")
    r.add_argument("--workers", type=positive_int, default=1)
    r.add_argument("--trace-out", default=None, help="write the trace of trial 0 as JSON")
    r.add_argument("--with-opt", action="store_true", help="add exact u*_i and per-phase bound verdicts")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("opt", help="exact optimal policies", parents=[common])
    o.add_argument("instance")
    o.set_defaults(func=cmd_opt)

    q = sub.add_parser("orienteer", help="solve one orienteering problem", parents=[common])
    q.add_argument("instance")
    q.add_argument("--budget", default="1")
    q.add_argument("--profits", default=None, help="comma-separated profits (default: E[min(R, k)])")
    q.add_argument("--solver", choices=["auto", "exact", "knapsack", "heuristic", "brute"], default="auto")
    q.set_defaults(func=cmd_orienteer)

    b = sub.add_parser("gaplp", help="online bidding LP values", parents=[common])
    b.add_argument("--n", type=positive_int, default=2)
    b.add_argument("--sweep", default=None, help="range like 1-12")
    b.set_defaults(func=cmd_gaplp)

    c = sub.add_parser("check", help="run invariant suites", parents=[common])
    c.add_argument("--suite", choices=["all", "harmonic", "capped-sum", "minimax", "lemma"], default="all")
    c.add_argument("--cases", type=positive_int, default=50)
    c.add_argument("--trials", type=positive_int, default=2000)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
