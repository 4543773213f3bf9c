"""Command-line entry point: ``cipround {solve,gen,verify,bench}``.

Exit codes: 0 ok, 1 input or usage error, 2 attempts exhausted, 3 brute-force
budget exceeded, 4 multiplicity violation only, 5 covering violation or any
broken hard guarantee, 6 a statistical check failed.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from cipround import analysis, gaps
from cipround.errors import AttemptsExhausted, BudgetExceeded, CipError, InfeasibleError
from cipround.kc import solve_kc
from cipround.model import (CipInstance, check_cover, compute_metrics, load_instance,
                            validate_instance)
from cipround.policies import MODES, eps_mean_ratio, plain_mean_ratio, solve_eps, solve_plain
from cipround.preprocess import normalize
from cipround.relaxation import RoundingParams, expected_resample_bound, marginal_bounds
from cipround.rounding import RoundingPlan, rounding_events_bound

EXIT_OK, EXIT_INPUT, EXIT_ATTEMPTS, EXIT_BUDGET, EXIT_MULT, EXIT_COVER, EXIT_STAT = range(7)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    mode: str = "plain"
    eps: float | None = None
    seed: int = 0
    trials: int = 100_000
    max_attempts: int | None = None
    family: str | None = None
    gen_params: dict = field(default_factory=dict)
    tail_queries: list = field(default_factory=list)
    solution: str | None = None
    builtin: str | None = None
    oracle: bool = False
    threads: int | None = None
    pairs: int = 0

    def validate(self):
        if self.command in ("solve", "bench") and self.builtin is None:
            if self.mode == "eps" and self.eps is None:
                raise UsageError("--mode eps requires --eps")
            if self.mode != "eps" and self.eps is not None:
                raise UsageError("--eps only applies to --mode eps")
            if self.eps is not None and not 0 < self.eps <= 1:
                raise UsageError("--eps must lie in (0,1]")
        if self.command in ("solve", "verify") and not self.input:
            raise UsageError("--input is required")
        if self.command == "verify" and not self.solution:
            raise UsageError("--solution is required")
        if self.command == "bench":
            if self.trials < 1:
                raise UsageError("--trials must be >= 1")
            if (self.input is None) == (self.builtin is None):
                raise UsageError("bench needs exactly one of --input or --builtin")
        if self.command == "gen":
            if self.family == "eps-aug" and not self.gen_params.get("base"):
                raise UsageError("--family eps-aug requires --base")
            if self.oracle and not self.output:
                raise UsageError("--oracle prints a report row; send the instance to --output")
        if self.seed < 0:
            raise UsageError("--seed must be >= 0")


def _parser():
    p = argparse.ArgumentParser(prog="cipround", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="round an instance under one of the three modes")
    s.add_argument("--input", "-i")
    s.add_argument("--output", "-o")
    s.add_argument("--mode", choices=MODES, default="plain")
    s.add_argument("--eps", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-attempts", type=int)

    g = sub.add_parser("gen", help="write a gap-family instance")
    g.add_argument("--family", choices=gaps.FAMILIES, required=True)
    g.add_argument("--output", "-o")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--m", type=int, default=20)
    g.add_argument("--a", type=float, default=1.0)
    g.add_argument("--p", type=float)
    g.add_argument("--t", type=int)
    g.add_argument("--base")
    g.add_argument("--eps", type=float, default=0.5)
    g.add_argument("--K", type=int, default=4)
    g.add_argument("--q", type=int, default=3)
    g.add_argument("--g", type=float, default=0.5)
    g.add_argument("--oracle", action="store_true")
    g.add_argument("--cap", type=int, help="per-variable cap for the oracle")
    g.add_argument("--budget", type=int, default=10**8)

    v = sub.add_parser("verify", help="check a solution against an instance")
    v.add_argument("--input", "-i")
    v.add_argument("--solution", "-s")

    b = sub.add_parser("bench", help="Monte Carlo checks of the proved bounds")
    b.add_argument("--input", "-i")
    b.add_argument("--builtin", choices=("relax20",))
    b.add_argument("--output", "-o")
    b.add_argument("--mode", choices=MODES, default="plain")
    b.add_argument("--eps", type=float)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--trials", type=int, default=100_000)
    b.add_argument("--tail", action="append", default=[], metavar="L:T",
                   help="tail query on objective L at threshold T (repeatable)")
    b.add_argument("--pairs", type=int, default=0,
                   help="random pairs/triples for the joint-probability check (relax20)")
    b.add_argument("--threads", type=int)
    return p


def _config(ns) -> RunConfig:
    cfg = RunConfig(command=ns.command)
    for name in ("input", "output", "mode", "eps", "seed", "trials", "max_attempts",
                 "solution", "builtin", "oracle", "threads", "pairs", "family"):
        if hasattr(ns, name):
            setattr(cfg, name, getattr(ns, name))
    if ns.command == "gen":
        cfg.eps = None
        cfg.gen_params = {k: getattr(ns, k) for k in
                          ("m", "a", "p", "t", "base", "eps", "K", "q", "g", "cap", "budget")}
    if ns.command == "bench":
        for q in ns.tail:
            try:
                l, t = q.split(":")
                cfg.tail_queries.append((int(l), float(t)))
            except ValueError:
                raise UsageError(f"bad --tail {q!r}; expected L:T") from None
    cfg.validate()
    return cfg


def _write(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_valid(path) -> CipInstance:
    inst = load_instance(path)
    problems = validate_instance(inst)
    if problems:
        raise UsageError("invalid instance: " + "; ".join(problems[:5]))
    return inst


# --- commands ----------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> int:
    inst = _load_valid(cfg.input)
    if cfg.mode == "kc" and not inst.finite_d:
        raise UsageError("kc requires finite multiplicities")
    norm, cert = normalize(inst)
    if cfg.mode == "plain":
        rep = solve_plain(norm, cfg.seed, cfg.max_attempts)
    elif cfg.mode == "eps":
        rep = solve_eps(norm, cfg.eps, cfg.seed, cfg.max_attempts)
    else:
        rep = solve_kc(norm, cfg.seed, cfg.max_attempts)
    x = cert.map_solution(rep.x.x)
    if not check_cover(inst, x):
        raise AssertionError("solution does not cover the original instance")
    out = rep.to_json_dict()
    out["normalized"] = not cert.is_identity
    out["objective_values"] = [float(v) for v in inst.objectives @ x]
    _write(json.dumps(out, indent=1) + "\n", cfg.output)
    return EXIT_OK


def cmd_gen(cfg: RunConfig) -> int:
    gp = cfg.gen_params
    fam = cfg.family
    frac = None
    if fam == "random":
        p, t = gp["p"], gp["t"]
        if p is None or t is None:
            auto = gaps.random_gap_params(gp["m"])
            p = auto["p"] if p is None else p
            t = auto["t"] if t is None else t
        inst = gaps.gen_random_gap(gp["m"], gp["a"], p, t, cfg.seed)
        params = {"m": gp["m"], "a": gp["a"], "p": p, "t": t}
    elif fam == "eps-aug":
        base = _load_valid(gp["base"])
        inst = gaps.gen_eps_gap(base, gp["a"], gp["eps"], gp["K"])
        params = {"m": base.m, "a": gp["a"], "eps": gp["eps"], "K": gp["K"]}
    else:
        inst = gaps.gen_gf2_gap(gp["q"], gp["g"])
        params = {"m": inst.m, "a": float(inst.a[0]), "q": gp["q"], "g": gp["g"]}
        frac = gaps.gf2_point_value(gp["q"], gp["g"])
    _write(json.dumps(inst.to_json_dict(), indent=1) + "\n", cfg.output)
    if cfg.oracle:
        target = inst
        if fam == "eps-aug":
            lim = math.ceil((1 + gp["eps"]) * gp["K"])
            target = inst.with_d([None] * (inst.n - inst.m) + [lim] * inst.m)
        cap = gp["cap"] if gp["cap"] is not None else math.ceil(float(inst.a.max()))
        rep = gaps.gap_report(target, fam, params, cap, gp["budget"], frac)
        sys.stdout.write(gaps.reports_to_csv([rep]))
    return EXIT_OK


def _load_solution(path, n) -> np.ndarray:
    with open(path) as fh:
        obj = json.load(fh)
    x = obj["x"] if isinstance(obj, dict) else obj
    x = np.asarray(x)
    if x.shape != (n,) or np.any(x < 0) or np.any(x != np.round(x)):
        raise UsageError(f"solution must be {n} nonnegative integers")
    return x.astype(np.int64)


def cmd_verify(cfg: RunConfig) -> int:
    inst = _load_valid(cfg.input)
    x = _load_solution(cfg.solution, inst.n)
    slack = inst.activity(x) - inst.a
    bad = []
    for k, s in enumerate(slack):
        ok = s >= 0
        print(f"row {k} slack {float(s)!r}{'' if ok else ' VIOLATED'}")
        if not ok:
            bad.append(k)
    over = np.flatnonzero(x > inst.d).tolist()
    for i in over:
        print(f"var {i} x={int(x[i])} exceeds d={inst.d[i]:g}")
    if bad:
        print("violated rows: " + " ".join(map(str, bad)), file=sys.stderr)
        return EXIT_COVER
    if over:
        print("multiplicity violated: " + " ".join(map(str, over)), file=sys.stderr)
        return EXIT_MULT
    return EXIT_OK


def relax20():
    """Single row ``sum x_i >= 1`` over 20 variables at ``xhat_i = 1/20``, ``sigma=3/4``, ``alpha=4``."""
    n = 20
    inst = CipInstance.from_dense(np.ones((1, n)), [1.0], objectives=[np.ones(n)])
    return inst, np.full(n, 1.0 / n), RoundingParams(0.75, 4.0)


def _bench_builtin(cfg, rows):
    inst, xhat, params = relax20()
    rng = np.random.default_rng(cfg.seed)
    sets = [tuple(sorted(rng.choice(inst.n, size=2 + (j % 2), replace=False).tolist()))
            for j in range(cfg.pairs)]
    plan = RoundingPlan(inst, xhat, params)
    st = analysis.run_plan(plan, inst, cfg.trials, cfg.seed, cfg.tail_queries, sets,
                           plan.caps, cfg.threads)
    rho = marginal_bounds(inst, xhat, params)
    tag = f"sigma={params.sigma};alpha={params.alpha}"
    _common_rows(st, rho, expected_resample_bound(inst, xhat, params), "relax20", tag, rows)
    for R, emp in zip(sets, st.joint_freq):
        bound = float(np.prod(rho[list(R)]))
        rows.append(("correlation " + "-".join(map(str, R)), "relax20", tag, emp, bound,
                     analysis._pass(emp, bound, st.trials)))
    for (l, t), emp in zip(st.tail_queries, st.tail_freq):
        mu = float(inst.objectives[l] @ rho)
        bound = analysis.chernoff_upper(mu, t) if t >= mu else 1.0
        rows.append((f"tail {l}:{t:g}", "relax20", tag, emp, bound,
                     analysis._pass(emp, bound, st.trials)))
    return st


def _common_rows(st, mean_bound, events_bound, label, tag, rows):
    for i, (mu, se) in enumerate(zip(st.per_variable_mean, st.per_variable_stderr)):
        b = float(mean_bound[i])
        rows.append((f"marginal {i}", label, tag, float(mu), b, bool(mu <= b + 3 * se)))
    rows.append(("events", label, tag, st.mean_events, events_bound,
                 bool(st.mean_events <= events_bound + 3 * st.stderr_events)))


def _bench_instance(cfg, rows):
    inst = _load_valid(cfg.input)
    if cfg.mode == "kc" and not inst.finite_d:
        raise UsageError("kc requires finite multiplicities")
    norm, _ = normalize(inst)
    met = compute_metrics(norm)
    st = analysis.monte_carlo(norm, cfg.mode, cfg.eps, cfg.trials, cfg.seed,
                              cfg.tail_queries, threads=cfg.threads)
    tag = f"mode={cfg.mode};sigma={st.params.sigma:.6g};alpha={st.params.alpha:.6g}"
    label = cfg.input
    if cfg.mode in ("plain", "eps"):
        beta = (plain_mean_ratio(met.gamma) if cfg.mode == "plain"
                else eps_mean_ratio(met.gamma, cfg.eps))
        _common_rows(st, beta * st.xhat, rounding_events_bound(norm, st.params), label, tag, rows)
        for (l, t), emp in zip(st.tail_queries, st.tail_freq):
            mu = beta * float(norm.objectives[l] @ st.xhat)
            bound = analysis.chernoff_upper(mu, t) if t >= mu else 1.0
            rows.append((f"tail {l}:{t:g}", label, tag, emp, bound,
                         analysis._pass(emp, bound, st.trials)))
    rows.append(("events<=m", label, tag, st.mean_events, float(norm.m),
                 bool(st.mean_events <= norm.m + 3 * st.stderr_events)))
    return st


def cmd_bench(cfg: RunConfig) -> int:
    rows = []
    st = _bench_builtin(cfg, rows) if cfg.builtin else _bench_instance(cfg, rows)
    rows.append(("feasible", cfg.builtin or cfg.input, "", float(st.all_runs_feasible), 1.0,
                 st.all_runs_feasible))
    rows.append(("multiplicity", cfg.builtin or cfg.input, "", float(st.cap_violations), 0.0,
                 st.cap_violations == 0))
    _write(analysis.checks_to_csv(
        [(c, i, p, repr(float(e)), repr(float(b)), int(bool(ok))) for c, i, p, e, b, ok in rows]),
        cfg.output)
    if not st.all_runs_feasible or st.cap_violations:
        return EXIT_COVER
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_STAT


COMMANDS = {"solve": cmd_solve, "gen": cmd_gen, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = _config(ns)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AttemptsExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ATTEMPTS
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COVER


if __name__ == "__main__":
    sys.exit(main())
