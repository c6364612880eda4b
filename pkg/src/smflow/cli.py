"""Command-line entry point: ``smflow {validate,analyze,simulate,mc,verify}``.

Exit codes: 0 success / all verdicts pass, 1 verification failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import analytics, flow, montecarlo
from .config import (
    CONFIG_SCHEMA,
    ConfigError,
    ExperimentConfig,
    builtin_config,
    counterexample_config,
    parse_config,
)
from .prm import ScriptedStream, SeededStream
from .rates import validate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SCHEMA_HELP = """\
Config file (JSON):
  rate_matrix      {"states": [1, 2], "rates": {"1->2": {"family": "saturating",
                   "params": {"c": 1}}, ...}}  families: constant {c},
                   saturating {c} (c*y/(1+y)), piecewise {breakpoints, values, tail}
                   optional "order": ["1->2", "2->1", ...] to change the mark layout
  meet_scenarios   [{"i", "j", "y1", "y2"}]
  merge_scenarios  [{"k", "y"}]
  quadrature       {rel_tol, abs_tol, tail_eps, max_subdivisions}
  a4_grid          {n_y1, n_y2, n_y, y_max}
  age_grid         {n, y_max}       grid for sup/inf of the not-meet probability
  mc               {n, seed, max_transitions, merge_cap, r_max, tail_n, sigma, level, jobs}
  simulate         {init1: {x, y}, init2: {x, y}, horizon, script: [{t, v}, ...]}
  outputs          {dir}
Use `smflow schema` to print the full JSON schema.
"""


def _dump(obj, fh=None):
    text = json.dumps(obj, indent=2, default=_default, allow_nan=True)
    (fh or sys.stdout).write(text + "\n")


def _default(o):
    if isinstance(o, tuple):
        return list(o)
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not serialisable: {type(o)}")


def _load(args) -> ExperimentConfig:
    if getattr(args, "example_3_3", False):
        doc = counterexample_config()
    elif getattr(args, "builtin", None):
        doc = builtin_config(args.builtin)
    elif args.config == "-":
        doc = json.load(sys.stdin)
    elif args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    else:
        raise ConfigError("no configuration: pass --config FILE, --config -, --builtin NAME or --example-3-3")
    mc = dict(doc.get("mc", {}))
    for key in ("n", "seed", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            mc[key] = val
    doc = {**doc, "mc": mc}
    if getattr(args, "out", None):
        doc["outputs"] = {**doc.get("outputs", {}), "dir": args.out}
    return parse_config(doc)


def _outdir(cfg: ExperimentConfig) -> Path | None:
    d = cfg.outputs.get("dir")
    if not d:
        return None
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_report(cfg, name, report):
    d = _outdir(cfg)
    if d is not None:
        with open(d / name, "w") as fh:
            _dump(report, fh)


def cmd_validate(cfg: ExperimentConfig) -> tuple[dict, int]:
    rep = validate(cfg.matrix, cfg.a4_grid)
    out = {"config": cfg.to_dict(), "validation": rep.to_dict()}
    _write_report(cfg, "validation.json", out)
    return out, EXIT_OK


def cmd_analyze(cfg: ExperimentConfig) -> tuple[dict, int]:
    reps = analytics.analyze(
        cfg.matrix, cfg.meet_scenarios, cfg.merge_scenarios, cfg.quadrature, cfg.age_grid,
        r_max=cfg.mc.r_max, n_max=cfg.mc.tail_n,
    )
    out = {"config": cfg.to_dict(), "reports": [r.to_dict() for r in reps]}
    _write_report(cfg, "analysis.json", out)
    return out, EXIT_OK


def cmd_simulate(cfg: ExperimentConfig) -> tuple[dict, int]:
    sim = cfg.simulate
    if sim is None:
        raise ConfigError("simulate: section missing")
    m = cfg.matrix
    stream = ScriptedStream(sim.script) if sim.script is not None else SeededStream(cfg.mc.seed, m.C)
    init1, init2 = cfg.chain("init1"), cfg.chain("init2")
    if init2 is None:
        log = flow.simulate_single(m, init1, sim.horizon, stream)
        summ = {"horizon": sim.horizon, "n_records": len(log.records), "stream_exhausted": log.exhausted,
                "final": asdict(log.final)}
    else:
        log, outcome = flow.simulate_pair(m, init1, init2, sim.horizon, stream)
        summ = flow.summary(log, outcome)
    summ["mode"] = "scripted" if sim.script is not None else "seeded"
    d = _outdir(cfg)
    if d is not None:
        (d / "path.jsonl").write_text(log.to_jsonl())
        (d / "path.csv").write_text(log.to_csv())
    out = {"config": cfg.to_dict(), "summary": summ, "records": [r.to_dict() for r in log.records]}
    _write_report(cfg, "simulation.json", out)
    return out, EXIT_OK


def _mc_estimates(cfg: ExperimentConfig):
    m, mc = cfg.matrix, cfg.mc
    meet = []
    for n, sc in enumerate(cfg.meet_scenarios):
        seed = mc.seed + 1000 * n
        meet.append((sc, montecarlo.estimate_meet_next(m, sc, mc.n, seed, jobs=mc.jobs, level=mc.level)))
    merge = []
    for n, sc in enumerate(cfg.merge_scenarios):
        seed = mc.seed + 1000 * n + 500
        merge.append((sc, montecarlo.estimate_merge_at_meeting(m, sc, mc.n, seed, jobs=mc.jobs, level=mc.level)))
    moments = []
    for n, sc in enumerate(cfg.meet_scenarios):
        seed = mc.seed + 1000 * n + 250
        moments.append((sc, montecarlo.estimate_N_moments(
            m, sc, mc.n, seed, mc.r_max, max_transitions=mc.max_transitions, tail_n=mc.tail_n,
            jobs=mc.jobs, level=mc.level)))
    return meet, merge, moments


def cmd_mc(cfg: ExperimentConfig) -> tuple[dict, int]:
    meet, merge, moments = _mc_estimates(cfg)
    out = {
        "config": cfg.to_dict(),
        "meet_next": [{"scenario": asdict(sc), "estimate": e.to_dict()} for sc, e in meet],
        "merge_at_meeting": [{"scenario": asdict(sc), "estimate": e.to_dict()} for sc, e in merge],
        "N_moments": [{"scenario": asdict(sc), **e.to_dict()} for sc, e in moments],
    }
    _write_report(cfg, "mc.json", out)
    d = _outdir(cfg)
    if d is not None:
        for n, (_, e) in enumerate(moments):
            (d / f"N_histogram_{n}.csv").write_text(e.histogram_csv())
    return out, EXIT_OK


def cmd_verify(cfg: ExperimentConfig, inject_bias: float = 0.0) -> tuple[dict, int]:
    """Monte Carlo against quadrature for every scenario, plus the bound checks."""
    m, q, mc = cfg.matrix, cfg.quadrature, cfg.mc
    meet, merge, moments = _mc_estimates(cfg)
    verdicts = []
    for sc, est in meet:
        a = analytics.meet_next_prob(m, sc, q).value + inject_bias
        v = montecarlo.compare(a, est, mc.sigma)
        verdicts.append({"check": "meet_next_prob", "scenario": asdict(sc), **v.to_dict()})
        if m.is_markov:
            c = analytics.markov_meet_prob(m, sc.i, sc.j) + inject_bias
            v = montecarlo.compare(c, est, mc.sigma)
            verdicts.append({"check": "markov_meet_prob", "scenario": asdict(sc), **v.to_dict()})
    for sc, est in merge:
        a = analytics.merge_prob(m, sc, q).value + inject_bias
        v = montecarlo.compare(a, est, mc.sigma)
        verdicts.append({"check": "merge_prob", "scenario": asdict(sc), **v.to_dict()})
    if len(m.states) >= 2 and moments:
        rng = analytics.not_meet_range(m, q, cfg.age_grid)
        for sc, est in moments:
            for n, tail in est.tail.items():
                b = analytics.never_meet_bound(m, q, n, cfg.age_grid, rng)
                bound = b.value + inject_bias
                verdicts.append({"check": "never_meet_bound", "scenario": {**asdict(sc), "n": n},
                                 "bound": bound, "empirical": tail.mean, "passed": tail.mean <= bound,
                                 "caveat": b.caveat})
            for r, e in est.moments.items():
                b = analytics.moment_bound(m, q, r, cfg.age_grid, rng)
                bound = b.value + inject_bias
                verdicts.append({"check": "moment_bound", "scenario": {**asdict(sc), "r": r},
                                 "bound": bound, "empirical": e.mean, "passed": e.mean <= bound,
                                 "caveat": b.caveat})
    ok = all(v["passed"] for v in verdicts)
    out = {"config": cfg.to_dict(), "all_passed": ok, "verdicts": verdicts}
    _write_report(cfg, "verify.json", out)
    return out, EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="smflow",
        description="Coupled semi-Markov flows: validation, analytics, simulation, Monte Carlo.",
        epilog=SCHEMA_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--config", help="config JSON file, or '-' for stdin")
        src.add_argument("--builtin", help="built-in matrix with default scenarios")
        src.add_argument("--example-3-3", action="store_true",
                         help="two-state saturating chain with the scripted meet-then-separate noise")
        sp.add_argument("--out", help="directory for report/log files")
        sp.add_argument("--seed", type=int, help="master seed (overrides mc.seed)")
        sp.add_argument("--n", type=int, help="replicas (overrides mc.n)")
        sp.add_argument("--jobs", type=int, help="worker processes (overrides mc.jobs)")

    for name, text in [
        ("validate", "check rate-matrix assumptions"),
        ("analyze", "evaluate meet/merge probabilities and bounds"),
        ("simulate", "simulate one chain or a coupled pair and emit the path log"),
        ("mc", "Monte Carlo estimates for the configured scenarios"),
        ("verify", "compare Monte Carlo against the analytic values"),
    ]:
        sp = sub.add_parser(name, help=text, epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        common(sp)
        if name == "verify":
            sp.add_argument("--inject-bias", type=float, default=0.0,
                            help="add this offset to every analytic value (plumbing test)")
    sub.add_parser("schema", help="print the config JSON schema")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "mc": cmd_mc,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "schema":
        _dump(CONFIG_SCHEMA)
        return EXIT_OK
    try:
        cfg = _load(args)
        t0 = time.perf_counter()
        if args.command == "verify":
            out, code = cmd_verify(cfg, args.inject_bias)
        else:
            out, code = COMMANDS[args.command](cfg)
        out["elapsed_s"] = time.perf_counter() - t0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _dump(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
