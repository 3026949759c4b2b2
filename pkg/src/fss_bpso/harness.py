"""
Campaign orchestration: seeded batteries of swarm runs, HF-call accounting,
persistence of per-iteration records and comparison reports.

Output files written by :func:`write_campaign_outputs`:

* ``runs.ndjson`` - one JSON object per run iteration
* ``summary.csv`` - one row per run with its final HF-DES-MAE
* ``timing.csv`` - wall times, kept apart so the other files are reproducible byte for byte
* ``ecdf.csv``, ``convergence.csv``, ``ks_matrix.csv`` - comparison curves and tables
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import bpso, stats
from . import design_codec as dc
from .em_oracle import HFOracle, OracleConfig, TargetKind, target_profile, transmission_magnitude
from .errors import ConfigInvalid, MissingModel, TargetMismatch
from .metrics import SUCCESS_THRESHOLD, MetricKind, des_mae, lf_mae, phy_unc, ensb_unc
from .surrogate import Ensemble, SurrogateModel, generate_dataset, load_ensemble


class Strategy(str, enum.Enum):
    BASELINE = "baseline"
    SINGLE = "single"
    STAGED = "staged"
    ALTERNATING = "alternating"


@dataclass(frozen=True)
class Scenario:
    strategy: Strategy
    metric: MetricKind | None = None

    @property
    def name(self) -> str:
        if self.strategy is Strategy.BASELINE:
            return "baseline"
        if self.strategy is Strategy.SINGLE:
            return self.metric.value
        return f"{self.strategy.value}_{self.metric.value}"

    @property
    def needs_post_hoc(self) -> bool:
        """True when the run itself produces no HF values."""
        return self.strategy is Strategy.BASELINE or (
            self.strategy is Strategy.SINGLE and self.metric is not MetricKind.HF_DES_MAE)

    @property
    def needs_ensemble(self) -> bool:
        return self.metric is MetricKind.ENSB_UNC

    @classmethod
    def parse(cls, name: str) -> "Scenario":
        name = name.strip().lower()
        if name == "baseline":
            return cls(Strategy.BASELINE)
        for strat in (Strategy.STAGED, Strategy.ALTERNATING):
            prefix = strat.value + "_"
            if name.startswith(prefix):
                metric = _metric(name[len(prefix):])
                if not metric.is_uncertainty:
                    raise ConfigInvalid(f"{strat.value} scenarios need an uncertainty metric, got {name!r}")
                return cls(strat, metric)
        return cls(Strategy.SINGLE, _metric(name))


def _metric(name: str) -> MetricKind:
    try:
        return MetricKind(name)
    except ValueError:
        raise ConfigInvalid(f"unknown scenario or metric {name!r}") from None


ALL_SCENARIOS = ("baseline", "hf_des_mae", "lf_des_mae", "phy_unc", "ensb_unc",
                 "staged_phy_unc", "staged_ensb_unc", "alternating_phy_unc", "alternating_ensb_unc")


@dataclass
class ExperimentConfig:
    scenario: Scenario
    target: TargetKind = TargetKind.BAND_STOP
    n_runs: int = 100
    swarm: bpso.SwarmConfig = field(default_factory=bpso.SwarmConfig)
    model_path: Path | None = None
    master_seed: int = 0
    workers: int = 1
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def validate(self) -> None:
        if self.n_runs < 1:
            raise ConfigInvalid("n_runs must be >= 1")
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")
        try:
            self.swarm.validate(staged=self.scenario.strategy is Strategy.STAGED)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from None


_TOP_KEYS = {"scenario", "scenarios", "target", "n_runs", "swarm", "model", "master_seed", "workers",
             "oracle", "output_dir"}


def _build(cls, overrides, section: str):
    overrides = overrides or {}
    if not isinstance(overrides, dict):
        raise ConfigInvalid(f"{section} must be a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigInvalid(f"unknown {section} keys: {sorted(unknown)}")
    try:
        return cls(**overrides)
    except TypeError as exc:
        raise ConfigInvalid(f"bad {section} section: {exc}") from None


def parse_config(raw: dict, base_dir: Path | None = None) -> tuple[list[ExperimentConfig], dict]:
    """Build one ExperimentConfig per listed scenario from a key/value mapping.

    Returns the configs and the leftover top-level settings (e.g. ``output_dir``).
    """
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a key/value mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    names = raw.get("scenarios", raw.get("scenario"))
    if names is None:
        raise ConfigInvalid("config needs 'scenario' or 'scenarios'")
    if isinstance(names, str):
        names = [names]
    try:
        target = TargetKind(raw.get("target", TargetKind.BAND_STOP.value))
    except ValueError:
        raise ConfigInvalid(f"unknown target {raw.get('target')!r}") from None
    swarm = _build(bpso.SwarmConfig, raw.get("swarm"), "swarm")
    oracle = _build(OracleConfig, raw.get("oracle"), "oracle")
    model = raw.get("model")
    if model is not None:
        model = Path(model)
        if base_dir is not None and not model.is_absolute():
            model = base_dir / model
    configs = []
    for name in names:
        cfg = ExperimentConfig(
            scenario=Scenario.parse(str(name)), target=target, n_runs=int(raw.get("n_runs", 100)),
            swarm=swarm, model_path=model, master_seed=int(raw.get("master_seed", 0)),
            workers=int(raw.get("workers", 1)), oracle=oracle)
        cfg.validate()
        configs.append(cfg)
    extra = {k: raw[k] for k in ("output_dir",) if k in raw}
    return configs, extra


def load_config(path) -> tuple[list[ExperimentConfig], dict]:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"cannot parse {path}: {exc}") from None
    return parse_config(raw, base_dir=path.parent)


@dataclass
class CampaignResult:
    scenario: str
    target: TargetKind
    runs: list[bpso.RunRecord]
    hf_calls: int  # in-run calls, read from the shared oracle counter
    post_hoc_hf_calls: int
    lf_calls: int
    wall_time: float

    @property
    def finals(self) -> np.ndarray:
        return np.array([r.final_hf_des_mae for r in self.runs], dtype=float)

    @property
    def success_rate(self) -> float:
        return stats.success_rate(self.finals, SUCCESS_THRESHOLD)


def _load_models(cfg: ExperimentConfig) -> Ensemble:
    if cfg.model_path is None:
        raise MissingModel("config does not name a surrogate model file")
    return load_ensemble(cfg.model_path)


def _one_run(cfg: ExperimentConfig, ens: Ensemble, oracle: HFOracle, run_id: int) -> bpso.RunRecord:
    seed = cfg.master_seed + run_id
    swarm = dataclasses.replace(cfg.swarm, seed=seed)
    rng = np.random.default_rng(seed)
    target = target_profile(cfg.target, cfg.oracle)
    sc = cfg.scenario
    lf = ens.primary
    if sc.strategy is Strategy.BASELINE:
        rec = bpso.baseline_bpso(swarm, lf, target, rng)
    elif sc.strategy is Strategy.SINGLE:
        rec = bpso.single_metric_bpso(swarm, sc.metric, lf, ens, oracle, target, rng)
    else:
        rec = bpso.multifidelity_bpso(swarm, sc.metric, lf, ens, oracle, target, rng,
                                      staged=sc.strategy is Strategy.STAGED)
    rec.scenario = sc.name
    rec.run_id = run_id
    if sc.needs_post_hoc:
        # a separate oracle instance keeps the in-run call ledger exact
        post = HFOracle(cfg.oracle)
        vals = des_mae(transmission_magnitude(post(rec.designs())), target)
        for it, v in zip(rec.iterations, vals):
            it.post_hoc_hf_des_mae = float(v)
        rec.post_hoc_hf_calls = post.calls
        rec.final_hf_des_mae = float(vals.min())
    return rec


def run_campaign(cfg: ExperimentConfig, ensemble: Ensemble | None = None,
                 oracle: HFOracle | None = None) -> CampaignResult:
    """Execute ``n_runs`` seeded runs; run r uses seed ``master_seed + r``.

    ``oracle`` is the shared HF-call counter; a fresh one is made if omitted.
    """
    cfg.validate()
    ens = ensemble if ensemble is not None else _load_models(cfg)
    oracle = oracle if oracle is not None else HFOracle(cfg.oracle)
    start_calls = oracle.calls
    t0 = time.perf_counter()
    ids = range(cfg.n_runs)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            runs = list(pool.map(lambda r: _one_run(cfg, ens, oracle, r), ids))
    else:
        runs = [_one_run(cfg, ens, oracle, r) for r in ids]
    return CampaignResult(
        scenario=cfg.scenario.name, target=cfg.target, runs=runs,
        hf_calls=oracle.calls - start_calls,
        post_hoc_hf_calls=sum(r.post_hoc_hf_calls for r in runs),
        lf_calls=sum(r.lf_calls for r in runs),
        wall_time=time.perf_counter() - t0)


# -- comparison ---------------------------------------------------------------

@dataclass
class ConvergenceCurve:
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray


@dataclass
class ComparisonReport:
    target: TargetKind
    scenarios: list[str]
    success: dict[str, float]
    ks: dict[tuple[str, str], tuple[float, float]]
    ecdfs: dict[str, stats.EcdfCurve]
    convergence: dict[str, ConvergenceCurve]

    def significance_table(self) -> str:
        """Pairwise +/- table: + marks p < 0.05."""
        width = max(len(s) for s in self.scenarios)
        lines = [" " * width + "  " + " ".join(f"{i:>2d}" for i in range(len(self.scenarios)))]
        for i, r in enumerate(self.scenarios):
            marks = " ".join(" +" if self.ks[r, c][1] < stats.SIGNIFICANCE else " -" for c in self.scenarios)
            lines.append(f"{r:<{width}}  {marks}   [{i}] success {100 * self.success[r]:.0f}%")
        return "\n".join(lines)


def convergence_curve(runs: Sequence[bpso.RunRecord]) -> ConvergenceCurve:
    """Median and interquartile band of the cumulative-minimum HF-DES-MAE per iteration."""
    traces = np.array([r.cumulative_min_hf() for r in runs])
    q25, med, q75 = np.nanpercentile(traces, [25, 50, 75], axis=0)
    return ConvergenceCurve(med, q25, q75)


def compare_scenarios(results: Sequence[CampaignResult]) -> ComparisonReport:
    if len(results) < 2:
        raise ValueError("comparison needs at least two campaigns")
    targets = {r.target for r in results}
    if len(targets) != 1:
        raise TargetMismatch(f"campaigns target different profiles: {sorted(t.value for t in targets)}")
    names = [r.scenario for r in results]
    if len(set(names)) != len(names):
        raise ValueError("scenario names must be unique within a comparison")
    samples = {r.scenario: r.finals for r in results}
    return ComparisonReport(
        target=results[0].target,
        scenarios=names,
        success={r.scenario: r.success_rate for r in results},
        ks=stats.ks_matrix(samples),
        ecdfs={n: stats.ecdf(s) for n, s in samples.items()},
        convergence={r.scenario: convergence_curve(r.runs) for r in results},
    )


# -- persistence ----------------------------------------------------------------

def _num(v):
    return None if v is None else round(float(v), 6)


def iteration_rows(rec: bpso.RunRecord):
    for it in rec.iterations:
        yield {
            "run_id": rec.run_id,
            "scenario": rec.scenario,
            "iteration": it.iteration,
            "mode": it.mode,
            "best_lf_des_mae": _num(it.best_lf_des_mae),
            "hf_des_mae": _num(it.hf_des_mae),
            "post_hoc_hf_des_mae": _num(it.post_hoc_hf_des_mae),
            "design": it.design,
            "hf_calls_cumulative": it.hf_calls_cumulative,
        }


SUMMARY_FIELDS = ["run_id", "scenario", "target", "seed", "final_hf_des_mae", "optimized",
                  "hf_calls", "post_hoc_hf_calls", "lf_calls"]


def write_campaign_outputs(results: Sequence[CampaignResult], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.ndjson", "w") as fh:
        for res in results:
            for rec in res.runs:
                for row in iteration_rows(rec):
                    fh.write(json.dumps(row) + "\n")
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_FIELDS)
        for res in results:
            for rec in res.runs:
                w.writerow([rec.run_id, rec.scenario, res.target.value, rec.seed,
                            f"{rec.final_hf_des_mae:.6f}", int(rec.final_hf_des_mae < SUCCESS_THRESHOLD),
                            rec.hf_calls, rec.post_hoc_hf_calls, rec.lf_calls])
    with open(out / "timing.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_id", "scenario", "wall_time_s"])
        for res in results:
            for rec in res.runs:
                w.writerow([rec.run_id, rec.scenario, f"{rec.wall_time:.4f}"])
    write_curves(results, out)
    return out


def write_curves(results: Sequence[CampaignResult], out_dir) -> None:
    out = Path(out_dir)
    with open(out / "ecdf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "final_hf_des_mae", "cumulative_fraction"])
        for res in results:
            curve = stats.ecdf(res.finals)
            for v, f in zip(curve.values, curve.fractions):
                w.writerow([res.scenario, f"{v:.6f}", f"{f:.6f}"])
    with open(out / "convergence.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "iteration", "median", "q25", "q75"])
        for res in results:
            c = convergence_curve(res.runs)
            for i in range(len(c.median)):
                w.writerow([res.scenario, i + 1, f"{c.median[i]:.6f}", f"{c.q25[i]:.6f}", f"{c.q75[i]:.6f}"])
    if len(results) >= 2:
        stats.write_ks_matrix_csv(out / "ks_matrix.csv", {r.scenario: r.finals for r in results})


def load_campaign_outputs(out_dir) -> list[CampaignResult]:
    """Rebuild campaign results (without swarm state) from a directory of outputs."""
    out = Path(out_dir)
    summary = out / "summary.csv"
    if not summary.exists():
        raise FileNotFoundError(f"no summary.csv in {out}")
    iters: dict[tuple[str, int], list[bpso.IterationRecord]] = {}
    with open(out / "runs.ndjson") as fh:
        for line in fh:
            row = json.loads(line)
            iters.setdefault((row["scenario"], row["run_id"]), []).append(bpso.IterationRecord(
                row["iteration"], row["mode"], row["best_lf_des_mae"], row["design"], row["hf_des_mae"],
                row["hf_calls_cumulative"], row.get("post_hoc_hf_des_mae")))
    by_scenario: dict[str, CampaignResult] = {}
    with open(summary, newline="") as fh:
        for row in csv.DictReader(fh):
            name = row["scenario"]
            rec = bpso.RunRecord(name, int(row["seed"]), iters.get((name, int(row["run_id"])), []),
                                 int(row["hf_calls"]), int(row["lf_calls"]), 0.0,
                                 float(row["final_hf_des_mae"]), int(row["post_hoc_hf_calls"]),
                                 int(row["run_id"]))
            res = by_scenario.setdefault(name, CampaignResult(name, TargetKind(row["target"]), [], 0, 0, 0, 0.0))
            res.runs.append(rec)
            res.hf_calls += rec.hf_calls
            res.post_hoc_hf_calls += rec.post_hoc_hf_calls
            res.lf_calls += rec.lf_calls
    return list(by_scenario.values())


# -- triage -------------------------------------------------------------------

TRIAGE_STRATEGIES = ("phy_unc", "ensb_unc", "random")


@dataclass
class TriageReport:
    budget_fraction: float
    n_test: int
    max_before: np.ndarray  # (trials,)
    max_after: dict[str, np.ndarray]  # strategy -> (trials,)

    def reduction(self, strategy: str) -> np.ndarray:
        return self.max_before - self.max_after[strategy]

    def relative_reduction(self, strategy: str) -> np.ndarray:
        return self.reduction(strategy) / self.max_before

    def wins(self, strategy: str, versus: str = "random") -> int:
        """Trials where ``strategy`` strictly beats ``versus`` on max-residual reduction."""
        return int(np.count_nonzero(self.reduction(strategy) > self.reduction(versus)))

    def random_vs_noop(self) -> tuple[float, float]:
        """KS comparison of the random strategy's remaining maximum against doing nothing."""
        return stats.ks_two_sample(self.max_after["random"], self.max_before)


def triage_experiment(model: SurrogateModel, ensemble: Ensemble | None, n_test: int = 1000,
                      budget_fraction: float = 0.1, trials: int = 50, seed: int = 0,
                      oracle: HFOracle | None = None) -> TriageReport:
    """Re-evaluate the most uncertain fraction of fresh test sets with the HF oracle.

    Re-evaluated designs carry zero residual error; the report holds the
    maximum remaining LF-MAE per trial for each ranking strategy.
    """
    if model is None:
        raise MissingModel("triage needs a trained surrogate")
    if n_test < 100:
        raise ValueError("n_test must be >= 100")
    if not 0.0 <= budget_fraction <= 1.0:
        raise ValueError("budget_fraction must lie in [0, 1]")
    oracle = oracle or HFOracle()
    k = int(round(budget_fraction * n_test))
    strategies = [s for s in TRIAGE_STRATEGIES if s != "ensb_unc" or ensemble is not None]
    before = np.empty(trials)
    after = {s: np.empty(trials) for s in strategies}
    for t in range(trials):
        trial_seed = int(np.random.SeedSequence([seed, t]).generate_state(1)[0])
        test = generate_dataset(n_test, trial_seed, oracle)
        pred = model.predict(test.designs)
        err = lf_mae(pred, test.responses)
        before[t] = err.max()
        scores = {"phy_unc": phy_unc(pred), "random": None}
        if ensemble is not None:
            scores["ensb_unc"] = ensb_unc(ensemble.magnitudes(test.designs))
        pick_rng = np.random.default_rng([trial_seed, 1])
        for s in strategies:
            if s == "random":
                chosen = pick_rng.choice(n_test, size=k, replace=False)
            else:
                chosen = np.argsort(-scores[s], kind="stable")[:k]
            residual = err.copy()
            residual[chosen] = 0.0
            after[s][t] = residual.max()
    return TriageReport(budget_fraction, n_test, before, after)


def random_octants(n: int, seed: int) -> np.ndarray:
    return dc.random_design(np.random.default_rng(seed), size=n)
