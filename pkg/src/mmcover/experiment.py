"""Seeded experiment harness: solve, compare with the oracle, check every invariant."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import GuardError, InvariantViolation
from .graphs import build_gi, build_gtilde
from .instance_io import ExperimentConfig, LoadedInstance, digest, dumps, generate_instance, instance_from_dict
from .metric import build_neighborhood_index
from .oracle import exact_mmc, exact_tmmc
from .outer import check_bundle, extract_outer_covers, host_outer_cover, tmmc_outer_covers
from .partition import obligated_clients
from .solvers import solve_mmc, solve_nonuniform, solve_tmmc

COLUMNS = (
    "trial",
    "digest",
    "family",
    "n_clients",
    "n_servers",
    "alpha",
    "mode",
    "subroutine",
    "k",
    "t",
    "solver_cost",
    "oracle_cost",
    "ratio",
    "bound",
    "family_ok",
    "audit_ok",
    "bundle_ok",
    "hosting_ok",
    "ratio_ok",
)
REL_TOL = 1e-9


def ratio_bound(mode: str, alpha: float) -> float:
    if mode == "uniform":
        return 2 * (12 * 9) ** alpha
    if mode == "nonuniform":
        return 2 * (16 * 9) ** alpha
    return 4 * 540**alpha


def approximation_ratio(cost: float, opt: float) -> float:
    """cost / opt, with 0/0 read as 1."""
    if opt == 0:
        return 1.0 if cost == 0 else math.inf
    return cost / opt


def oracle_nodes(loaded: LoadedInstance, mode: str) -> int:
    """DP cells the oracle would touch for this instance and mode."""
    inst = loaded.inst
    m = inst.n_servers
    if mode == "nonuniform":
        return math.prod(k + 1 for k in loaded.dem.demands) * (m + 1)
    k = loaded.uniform_k()
    cells = (k + 1) ** inst.n_clients * (m + 1)
    if mode == "tmmc":
        cells *= min(loaded.t, m) + 1
    return cells


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple[dict, ...]
    timings: tuple[float, ...]

    def aggregates(self) -> dict:
        out = {}
        for row in self.rows:
            key = f"{row['mode']}/{row['subroutine']}"
            out.setdefault(key, []).append(row["ratio"])
        return {
            key: {"count": len(v), "max_ratio": max(v), "mean_ratio": math.fsum(v) / len(v)}
            for key, v in sorted(out.items())
        }

    @property
    def max_ratio(self) -> float | None:
        return max((r["ratio"] for r in self.rows), default=None)

    def to_json(self, timing: bool = False) -> dict:
        rows = [dict(r) for r in self.rows]
        if timing:
            for r, s in zip(rows, self.timings):
                r["runtime"] = s
        return {"config": self.config.to_dict(), "rows": rows, "aggregates": self.aggregates()}

    def to_csv(self, timing: bool = False) -> str:
        buf = io.StringIO()
        cols = COLUMNS + (("runtime",) if timing else ())
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row, s in zip(self.rows, self.timings):
            w.writerow({**row, "runtime": s} if timing else row)
        return buf.getvalue()

    def write(self, prefix: str | Path, timing: bool = False) -> tuple[Path, Path]:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        jp, cp = prefix.with_suffix(".json"), prefix.with_suffix(".csv")
        jp.write_text(json.dumps(self.to_json(timing), sort_keys=True, indent=1) + "\n")
        cp.write_text(self.to_csv(timing))
        return jp, cp


def _fail(doc: dict, trial: int, message: str, dump_dir: Path | None):
    where = ""
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)
        path = dump_dir / f"failed_trial_{trial}.json"
        path.write_text(dumps(doc))
        where = f" (instance dumped to {path})"
    raise InvariantViolation(f"trial {trial}: {message}{where}", {"trial": trial, "instance": doc})


def _hosting_uniform(inst, idx, family, covers, hop=2, expansion=6.0, budget=None) -> list[str]:
    problems = []
    for e in family.entries:
        if e.level not in covers:
            continue
        oc = covers[e.level]
        out = host_outer_cover(inst, idx, oc, e.servers, hop, expansion, build_gi(idx, e.level))
        if budget is not None and len(out) > oc.servers_used:
            problems.append(f"hosting ({e.level}, {e.kind}) opened {len(out)} > {oc.servers_used} servers")
    return problems


def _hosting_nonuniform(inst, idx, dem, family, covers) -> list[str]:
    for e in family.entries:
        clients = obligated_clients(dem, e.level, e.kind)
        g = build_gtilde(idx, dem, e.level)
        host_outer_cover(inst, idx, covers[e.level], e.servers, 3, 8.0, g, clients)
    return []


def run_trial(cfg: ExperimentConfig, trial: int, doc: dict, dump_dir: Path | None = None) -> tuple[list[dict], list[float]]:
    loaded = instance_from_dict(doc)
    inst, dem = loaded.inst, loaded.dem
    idx = build_neighborhood_index(inst)
    rows, times = [], []
    key = digest(doc)
    for mode in cfg.modes:
        try:
            if mode == "uniform":
                k = loaded.uniform_k()
                opt = exact_mmc(inst, k, cfg.oracle_guard)
                bundle = extract_outer_covers(inst, idx, opt.assignment, k)
                bundle_problems = check_bundle(inst, idx, bundle)
            elif mode == "nonuniform":
                k = dem.kmax
                opt = exact_mmc(inst, dem, cfg.oracle_guard)
                bundle = extract_outer_covers(inst, idx, opt.assignment, dem)
                bundle_problems = check_bundle(inst, idx, bundle)
            else:
                k = loaded.uniform_k()
                opt = exact_tmmc(inst, k, loaded.t, cfg.oracle_guard)
                budgeted = tmmc_outer_covers(inst, idx, opt.assignment, k, loaded.t)
                bundle = budgeted.bundle
                bundle_problems = check_bundle(inst, idx, bundle) + list(budgeted.violations)
        except InvariantViolation as exc:
            _fail(doc, trial, f"{mode}: {exc}", dump_dir)
        if bundle_problems:
            _fail(doc, trial, f"{mode}: " + "; ".join(bundle_problems), dump_dir)
        for sub in cfg.subroutines:
            start = time.perf_counter()
            try:
                if mode == "uniform":
                    rep = solve_mmc(inst, k, sub, idx)
                    hosting = _hosting_uniform(inst, idx, rep.family, bundle.covers)
                elif mode == "nonuniform":
                    rep = solve_nonuniform(inst, dem, sub, idx)
                    hosting = _hosting_nonuniform(inst, idx, dem, rep.family, bundle.covers)
                else:
                    rep = solve_tmmc(inst, k, loaded.t, sub, idx)
                    hosting = _hosting_uniform(inst, idx, rep.family, budgeted.covers, budget=loaded.t)
            except InvariantViolation as exc:
                _fail(doc, trial, f"{mode}/{sub}: {exc}", dump_dir)
            ratio = approximation_ratio(rep.cost, opt.cost)
            bound = ratio_bound(mode, inst.alpha)
            if hosting:
                _fail(doc, trial, f"{mode}/{sub}: " + "; ".join(hosting), dump_dir)
            if rep.cost < opt.cost * (1 - REL_TOL) - 1e-12:
                _fail(doc, trial, f"{mode}/{sub}: solver cost {rep.cost} beats oracle {opt.cost}", dump_dir)
            if not ratio <= bound:
                _fail(doc, trial, f"{mode}/{sub}: ratio {ratio} exceeds {bound}", dump_dir)
            times.append(time.perf_counter() - start)
            rows.append({
                "trial": trial,
                "digest": key,
                "family": cfg.family,
                "n_clients": inst.n_clients,
                "n_servers": inst.n_servers,
                "alpha": inst.alpha,
                "mode": mode,
                "subroutine": sub,
                "k": k,
                "t": loaded.t if mode == "tmmc" else None,
                "solver_cost": rep.cost,
                "oracle_cost": opt.cost,
                "ratio": ratio,
                "bound": bound,
                "family_ok": not rep.family_violations,
                "audit_ok": rep.audit.ok,
                "bundle_ok": True,
                "hosting_ok": True,
                "ratio_ok": True,
            })
    return rows, times


def run_experiment(cfg: ExperimentConfig, dump_dir: str | Path | None = None) -> ExperimentReport:
    """Run every trial; any invariant failure aborts with the instance dumped."""
    dump = Path(dump_dir) if dump_dir is not None else None
    docs = [generate_instance(cfg, trial) for trial in range(cfg.trials)]
    # refuse oversized oracle runs before solving anything
    for trial, doc in enumerate(docs):
        loaded = instance_from_dict(doc)
        for mode in cfg.modes:
            nodes = oracle_nodes(loaded, mode)
            if nodes > cfg.oracle_guard:
                raise GuardError(
                    f"trial {trial} ({mode}) needs {nodes} oracle cells, guard is {cfg.oracle_guard}",
                    count=nodes,
                )
    rows, times = [], []
    for trial, doc in enumerate(docs):
        r, s = run_trial(cfg, trial, doc, dump)
        rows += r
        times += s
    order = sorted(range(len(rows)), key=lambda i: rows[i]["trial"])
    return ExperimentReport(cfg, tuple(rows[i] for i in order), tuple(times[i] for i in order))
