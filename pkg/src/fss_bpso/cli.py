"""Command-line entry point: ``fss-bpso <subcommand>``."""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import yaml

from . import harness
from .em_oracle import HFOracle, OracleConfig
from .errors import ConfigInvalid, FssBpsoError
from .surrogate import (DEFAULT_MEMBERS, DEFAULT_RIDGE_LAMBDA, DEFAULT_TRAIN_SIZE, generate_dataset,
                        held_out_mae, load_ensemble, save_ensemble, train_ensemble)


def _oracle_from(path) -> OracleConfig:
    if path is None:
        return OracleConfig()
    raw = yaml.safe_load(Path(path).read_text()) or {}
    return harness._build(OracleConfig, raw.get("oracle"), "oracle")


def cmd_train(args) -> int:
    oracle = HFOracle(_oracle_from(args.config))
    t0 = time.perf_counter()
    ts = generate_dataset(args.n_train, args.data_seed, oracle)
    ens = train_ensemble(ts, args.members, args.seed, args.ridge_lambda)
    save_ensemble(ens, args.out)
    test = generate_dataset(1000, args.data_seed + 1, oracle)
    print(f"trained {len(ens)} members on {len(ts)} designs in {time.perf_counter() - t0:.1f}s")
    print(f"held-out MAE (member 0, 1000 designs): {held_out_mae(ens.primary, test):.4f}")
    print(f"saved to {args.out}")
    return 0


def _configs(args):
    configs, extra = harness.load_config(args.config)
    overrides = {}
    if getattr(args, "runs", None):
        overrides["n_runs"] = args.runs
    if getattr(args, "workers", None):
        overrides["workers"] = args.workers
    if getattr(args, "model", None):
        overrides["model_path"] = Path(args.model)
    configs = [dataclasses.replace(c, **overrides) for c in configs]
    return configs, extra


def cmd_run(args) -> int:
    configs, _ = _configs(args)
    cfg = dataclasses.replace(configs[0], n_runs=args.run_id + 1)
    if args.scenario:
        cfg = dataclasses.replace(cfg, scenario=harness.Scenario.parse(args.scenario))
    cfg.validate()
    ens = harness._load_models(cfg)
    oracle = HFOracle(cfg.oracle)
    rec = harness._one_run(cfg, ens, oracle, args.run_id)
    print(f"scenario {rec.scenario}  target {cfg.target.value}  seed {rec.seed}")
    print(f"{'itr':>3} {'mode':<9} {'lf_des_mae':>10} {'hf_des_mae':>10} {'hf_calls':>8}  design")
    for it in rec.iterations:
        hf = it.hf_des_mae if it.hf_des_mae is not None else it.post_hoc_hf_des_mae
        hf_txt = "" if hf is None else f"{hf:.6f}"
        print(f"{it.iteration:>3} {it.mode:<9} {it.best_lf_des_mae:>10.6f} {hf_txt:>10} "
              f"{it.hf_calls_cumulative:>8}  {it.design}")
    print(f"final HF-DES-MAE {rec.final_hf_des_mae:.6f}  in-run HF calls {rec.hf_calls}  "
          f"post-hoc HF calls {rec.post_hoc_hf_calls}  LF calls {rec.lf_calls}")
    return 0


def _print_results(results) -> None:
    print(f"{'scenario':<22} {'success':>7} {'median':>8} {'hf_calls':>9} {'post_hoc':>9} {'lf_calls':>9} {'wall_s':>7}")
    for r in results:
        med = float(sorted(r.finals)[len(r.finals) // 2])
        print(f"{r.scenario:<22} {100 * r.success_rate:>6.0f}% {med:>8.4f} {r.hf_calls:>9} "
              f"{r.post_hoc_hf_calls:>9} {r.lf_calls:>9} {r.wall_time:>7.1f}")


def cmd_campaign(args) -> int:
    configs, extra = _configs(args)
    out = args.out or extra.get("output_dir")
    if out is None:
        raise ConfigInvalid("no output directory: pass --out or set output_dir in the config")
    ens = harness._load_models(configs[0])
    results = [harness.run_campaign(c, ensemble=ens) for c in configs]
    harness.write_campaign_outputs(results, out)
    _print_results(results)
    if len(results) >= 2:
        print()
        print(harness.compare_scenarios(results).significance_table())
    print(f"outputs written to {out}")
    return 0


def cmd_compare(args) -> int:
    results = []
    for d in args.dirs:
        results.extend(harness.load_campaign_outputs(d))
    report = harness.compare_scenarios(results)
    _print_results(results)
    print()
    print(report.significance_table())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        harness.write_curves(results, args.out)
        print(f"curves written to {args.out}")
    return 0


def cmd_triage(args) -> int:
    ens = load_ensemble(args.model)
    oracle = HFOracle(_oracle_from(args.config))
    rep = harness.triage_experiment(ens.primary, ens, args.n_test, args.budget, args.trials, args.seed, oracle)
    print(f"triage: {args.trials} trials, {args.n_test} designs, budget {args.budget:.0%}")
    for s in rep.max_after:
        rel = rep.relative_reduction(s)
        line = f"  {s:<9} mean max-MAE reduction {100 * rel.mean():5.1f}%"
        if s != "random":
            line += f"  beats random in {rep.wins(s)}/{args.trials} trials"
        print(line)
    d, p = rep.random_vs_noop()
    print(f"  random vs no-op remaining max: KS D={d:.3f} p={p:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fss-bpso", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-surrogate", help="train and save a surrogate ensemble")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--config", help="config file whose 'oracle' section sets the oracle")
    p.add_argument("--n-train", type=int, default=DEFAULT_TRAIN_SIZE)
    p.add_argument("--members", type=int, default=DEFAULT_MEMBERS)
    p.add_argument("--seed", type=int, default=0, help="feature seed root for the ensemble")
    p.add_argument("--data-seed", type=int, default=1, help="seed of the training designs")
    p.add_argument("--ridge-lambda", type=float, default=DEFAULT_RIDGE_LAMBDA)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="execute one run and print every iteration")
    p.add_argument("--config", required=True)
    p.add_argument("--run-id", type=int, default=0)
    p.add_argument("--scenario", help="override the config's (first) scenario")
    p.add_argument("--model")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("campaign", help="run seeded batteries for every configured scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--runs", type=int, help="override n_runs")
    p.add_argument("--workers", type=int)
    p.add_argument("--model")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("compare", help="KS matrix, success rates and curves across campaign outputs")
    p.add_argument("dirs", nargs="+", help="campaign output directories")
    p.add_argument("--out", help="directory for ecdf/convergence/ks_matrix CSVs")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("triage", help="uncertainty-ranked HF re-evaluation experiment")
    p.add_argument("--model", required=True)
    p.add_argument("--config")
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--budget", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_triage)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FssBpsoError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
