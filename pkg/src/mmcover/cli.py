"""Command line interface.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .errors import InputError, MMCError, SchemaError, UnknownPointError
from .experiment import run_experiment
from .graphs import (
    filter_clients,
    nonuniform_graphs,
    uniform_graphs,
)
from .instance_io import ExperimentConfig, dumps, generate_instance, load_instance
from .metric import DemandProfile, RadiusAssignment, build_neighborhood_index, is_feasible
from .oracle import exact_mmc, exact_tmmc
from .solvers import solve_mmc, solve_nonuniform, solve_tmmc

EXIT_OK = 0


def _emit(doc: dict, output: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _k_and_t(loaded, args):
    k = args.k if args.k is not None else (loaded.uniform_k() if args.mode != "nonuniform" else None)
    t = args.t if args.t is not None else loaded.t
    if args.mode == "tmmc" and t is None:
        raise SchemaError("budgeted mode needs a budget: pass --t or add 't' to the instance")
    return k, t


def _guard_kwargs(args) -> dict:
    if getattr(args, "max_cover_size", None) is None:
        return {}
    return {"max_clients": args.max_cover_size, "max_servers": args.max_cover_size}


def cmd_solve(args) -> int:
    loaded = load_instance(args.input)
    inst = loaded.inst
    k, t = _k_and_t(loaded, args)
    idx = build_neighborhood_index(inst)
    guard = _guard_kwargs(args)
    if args.mode == "uniform":
        rep = solve_mmc(inst, k, args.subroutine, idx, **guard)
    elif args.mode == "nonuniform":
        rep = solve_nonuniform(inst, loaded.dem, args.subroutine, idx, **guard)
    else:
        rep = solve_tmmc(inst, k, t, args.subroutine, idx, **guard)
    doc = rep.to_json(inst)
    doc.update({"k": k, "t": t if args.mode == "tmmc" else None})
    _emit(doc, args.output)
    if args.audit:
        audit = {
            "family": rep.family.to_json(),
            "log": rep.family.log.to_json(),
            "audit": rep.audit.to_json() if rep.audit else None,
            "family_violations": list(rep.family_violations),
        }
        Path(args.audit).write_text(json.dumps(audit, sort_keys=True, indent=1) + "\n")
    if args.dump_graphs:
        if args.mode == "nonuniform":
            graphs = nonuniform_graphs(idx, loaded.dem, filter_clients(idx, loaded.dem))
        else:
            graphs = uniform_graphs(idx, k)
        Path(args.dump_graphs).write_text(json.dumps([g.to_json() for g in graphs], indent=1) + "\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    loaded = load_instance(args.input)
    inst = loaded.inst
    k, t = _k_and_t(loaded, args)
    if args.mode == "uniform":
        res = exact_mmc(inst, k, args.max_nodes)
    elif args.mode == "nonuniform":
        res = exact_mmc(inst, loaded.dem, args.max_nodes)
    else:
        res = exact_tmmc(inst, k, t, args.max_nodes)
    doc = res.to_json(inst)
    doc["mode"] = args.mode
    _emit(doc, args.output)
    return EXIT_OK


def cmd_verify(args) -> int:
    """Re-check a solution file against its instance."""
    loaded = load_instance(args.input)
    inst = loaded.inst
    try:
        sol = json.loads(Path(args.solution).read_text())
    except FileNotFoundError:
        raise InputError(f"no such file: {args.solution}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{args.solution}: invalid JSON ({exc})") from None
    mode = args.mode or sol.get("mode", "uniform")
    ids = {str(y): j for j, y in enumerate(inst.servers)}
    radii = {}
    for y, r in sol.get("radii", {}).items():
        if y not in ids:
            raise UnknownPointError(f"solution names unknown server {y!r}")
        radii[ids[y]] = r
    ra = RadiusAssignment(radii)
    problems = []
    if mode == "nonuniform":
        dem = loaded.dem
    else:
        dem = DemandProfile.for_instance(inst, sol.get("k") or loaded.uniform_k())
    support_only = mode == "tmmc"
    if not is_feasible(inst, dem, ra, support_only):
        problems.append("demands not met")
    if mode == "tmmc":
        t = sol.get("t") or loaded.t
        if t is None or len(ra) > t:
            problems.append(f"opens {len(ra)} servers, budget {t}")
    cost = ra.cost(inst.alpha)
    if "cost" in sol and not math.isclose(cost, sol["cost"], rel_tol=1e-9, abs_tol=1e-12):
        problems.append(f"reported cost {sol['cost']} != recomputed {cost}")
    _emit({"ok": not problems, "cost": cost, "problems": problems, "mode": mode}, args.output)
    return EXIT_OK if not problems else 4


def _config(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        doc = ExperimentConfig.load(args.config).to_dict()
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    if getattr(args, "subroutine", None):
        doc["subroutines"] = [args.subroutine]
    if getattr(args, "mode", None):
        doc["modes"] = [args.mode]
    return ExperimentConfig.from_dict(doc)


def cmd_gen(args) -> int:
    cfg = _config(args)
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    for trial in range(cfg.trials):
        (out / f"instance_{cfg.seed}_{trial}.json").write_text(dumps(generate_instance(cfg, trial)))
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _config(args)
    prefix = Path(args.report or "report")
    rep = run_experiment(cfg, dump_dir=prefix.parent / "failures")
    jp, cp = rep.write(prefix, timing=args.timing)
    agg = rep.aggregates()
    for key, v in agg.items():
        print(f"{key}: {v['count']} rows, max ratio {v['max_ratio']:.4g}, mean {v['mean_ratio']:.4g}")
    print(f"report written to {jp} and {cp}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmcover", description="Metric multi-cover solvers and checks")
    sub = p.add_subparsers(dest="verb", required=True)

    def instance_flags(sp):
        sp.add_argument("--input", required=True, help="instance JSON file")
        sp.add_argument("--output", help="write JSON here instead of stdout")
        sp.add_argument("--mode", choices=("uniform", "nonuniform", "tmmc"), default="uniform")
        sp.add_argument("--k", type=int, help="uniform demand (default: from the instance)")
        sp.add_argument("--t", type=int, help="server budget (default: from the instance)")

    sp = sub.add_parser("solve", help="run a solver")
    instance_flags(sp)
    sp.add_argument("--subroutine", choices=("greedy", "exact"), default="greedy")
    sp.add_argument("--audit", help="write the partition log and audit verdict here")
    sp.add_argument("--dump-graphs", help="write the intersection graphs here")
    sp.add_argument("--max-cover-size", type=int, help="raise the exact 1-cover size guard")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("oracle", help="exact optimum for a micro-instance")
    instance_flags(sp)
    sp.add_argument("--max-nodes", type=int, default=10**7)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("verify", help="re-check a solution file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--solution", required=True)
    sp.add_argument("--mode", choices=("uniform", "nonuniform", "tmmc"))
    sp.add_argument("--output")
    sp.set_defaults(func=cmd_verify)

    for name, func, helptext in (
        ("gen", cmd_gen, "write generated instances"),
        ("experiment", cmd_experiment, "run a seeded experiment"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--trials", type=int)
        if name == "gen":
            sp.add_argument("--output", help="directory for instance files")
        else:
            sp.add_argument("--report", help="report path prefix (.json and .csv are added)")
            sp.add_argument("--mode", choices=("uniform", "nonuniform", "tmmc"))
            sp.add_argument("--subroutine", choices=("greedy", "exact"))
            sp.add_argument("--timing", action="store_true", help="include per-row runtimes")
        sp.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MMCError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error [input]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
